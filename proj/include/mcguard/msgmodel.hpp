#pragma once

// Canonical GOOSE / SV message model shared by every mcguard module.
//
// All types here are plain values. Once built they are never mutated by the
// detectors, so they can be handed to concurrent workers freely.

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mcguard {

enum class Protocol : uint8_t { Goose, Sv };

inline constexpr uint16_t kGooseEthertype = 0x88B8;
inline constexpr uint16_t kSvEthertype = 0x88BA;

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view text);

// Fractional-second digits the time format rules require: GOOSE timestamps
// carry six (HH:MM:SS.mmmmmm), SV timestamps three (HH:MM:SS.mmm).
inline constexpr int kGooseTimeDigits = 6;
inline constexpr int kSvTimeDigits = 3;
constexpr int required_time_digits(Protocol p) {
    return p == Protocol::Goose ? kGooseTimeDigits : kSvTimeDigits;
}

// ---------------------------------------------------------------------------
// Timestamp: time of day with microsecond resolution, plus the text it came
// from. Captures are assumed not to cross midnight.
// ---------------------------------------------------------------------------
struct Timestamp {
    static constexpr int64_t kMicrosPerDay = 86'400'000'000;

    int64_t micros_since_midnight = 0;
    std::string raw_text = "00:00:00.000000";
    int fractional_digits = 6;

    // Keeps `micros` exactly; raw_text is its truncating render at `digits`
    // fractional digits. Throws UsageError when out of range.
    static Timestamp from_micros(int64_t micros, int digits);

    bool operator==(const Timestamp&) const = default;
    std::strong_ordering operator<=>(const Timestamp& other) const;
};

// HH:MM:SS[.f{1,6}] with two-digit fields. Throws FormatError.
Timestamp parse_timestamp(std::string_view text);

// Truncates (never rounds) to `digits` fractional digits, 0 <= digits <= 6.
std::string format_timestamp(int64_t micros_since_midnight, int digits);
std::string format_timestamp(const Timestamp& ts, int digits);

// ---------------------------------------------------------------------------
// MacAddress
// ---------------------------------------------------------------------------
struct MacAddress {
    std::array<uint8_t, 6> octets{};

    bool operator==(const MacAddress&) const = default;
    auto operator<=>(const MacAddress&) const = default;

    std::string to_string() const;  // "01:0C:CD:01:00:03"
};

enum class MacRole : uint8_t { Destination, Source };

// Three-octet display forms ("01 00 03") are left-padded: destinations with the
// IEC 61850 multicast prefix 01:0C:CD, sources with 00:00:00.
inline constexpr std::array<uint8_t, 3> kMulticastPrefix{0x01, 0x0C, 0xCD};
inline constexpr std::array<uint8_t, 3> kSourcePadding{0x00, 0x00, 0x00};

// Accepts ':', '-', ' ' or no separators. Throws FormatError.
MacAddress parse_mac(std::string_view text, MacRole role);

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------
struct GooseMessage {
    Timestamp time;
    MacAddress dm;
    MacAddress sm;
    uint16_t ethertype = kGooseEthertype;
    uint32_t appid = 0;
    std::string dataset;
    std::string goid;
    uint64_t stnum = 0;
    uint64_t sqnum = 0;
    uint8_t data1 = 0;
    uint8_t data2 = 0;
    uint64_t seq_index = 0;

    bool operator==(const GooseMessage&) const = default;
};

struct SvMessage {
    Timestamp time;
    MacAddress dm;
    MacAddress sm;
    uint16_t ethertype = kSvEthertype;
    uint32_t appid = 0;
    std::string svid;
    uint64_t smpcnt = 0;
    uint64_t seq_index = 0;

    bool operator==(const SvMessage&) const = default;
};

using Message = std::variant<GooseMessage, SvMessage>;

Protocol protocol_of(const Message& m);
const Timestamp& time_of(const Message& m);
uint64_t seq_index_of(const Message& m);
void set_seq_index(Message& m, uint64_t seq);

// ---------------------------------------------------------------------------
// Stream identity
// ---------------------------------------------------------------------------
struct StreamKey {
    MacAddress dm;
    MacAddress sm;
    uint32_t appid = 0;

    bool operator==(const StreamKey&) const = default;
    auto operator<=>(const StreamKey&) const = default;

    std::string to_string() const;
};

StreamKey stream_key_of(const Message& m);

struct StreamKeyHash {
    size_t operator()(const StreamKey& k) const noexcept;
};

// ---------------------------------------------------------------------------
// Rules and verdicts
// ---------------------------------------------------------------------------
enum class RuleId : uint8_t {
    GR1, GR2, GR3, GR4, GR5, GR6, GR7, GR8,
    SR1, SR2, SR3, SR4, SR5, SR6, SR7, SR8,
};

inline constexpr std::array<RuleId, 8> kGooseRules{
    RuleId::GR1, RuleId::GR2, RuleId::GR3, RuleId::GR4,
    RuleId::GR5, RuleId::GR6, RuleId::GR7, RuleId::GR8};
inline constexpr std::array<RuleId, 8> kSvRules{
    RuleId::SR1, RuleId::SR2, RuleId::SR3, RuleId::SR4,
    RuleId::SR5, RuleId::SR6, RuleId::SR7, RuleId::SR8};

std::string_view rule_name(RuleId id);  // "GR#1"
RuleId parse_rule_id(std::string_view text);  // accepts "GR#1", "GR1", "gr1"
Protocol rule_protocol(RuleId id);
int rule_number(RuleId id);  // 1..8
RuleId make_rule(Protocol p, int number);

enum class Outcome : uint8_t { Compliant, Anomalous, NotApplicable };
std::string_view to_string(Outcome o);

struct RuleVerdict {
    RuleId rule_id = RuleId::GR1;
    Outcome outcome = Outcome::NotApplicable;

    bool operator==(const RuleVerdict&) const = default;
};

struct PacketVerdict {
    uint64_t seq_index = 0;
    std::vector<RuleVerdict> per_rule;
    bool anomalous = false;

    bool operator==(const PacketVerdict&) const = default;
};

// Sets `anomalous` from per_rule.
PacketVerdict make_packet_verdict(uint64_t seq_index, std::vector<RuleVerdict> per_rule);

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------
enum class Label : uint8_t { Normal, Anomalous };
std::string_view to_string(Label l);
Label parse_label(std::string_view text);

struct LabeledRecord {
    Message message;
    Label label = Label::Normal;
    std::optional<std::string> attack_tag;  // present iff label == Anomalous

    bool operator==(const LabeledRecord&) const = default;
};

}  // namespace mcguard
