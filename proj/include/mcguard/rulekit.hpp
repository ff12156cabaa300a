#pragma once

// GOOSE (GR#1-GR#8) and SV (SR#1-SR#8) compliance rules as streaming,
// per-stream stateful predicates.
//
// Every rule is stated as a predicate over the current message and its
// stream history. Whether "predicate holds" means compliant or anomalous is
// recorded per rule in its RuleSpec; RuleVerdict always carries the
// normalized outcome, so consumers never see the raw polarity.
//
// History semantics:
//   * "previous" means the previous message with the same StreamKey
//     (destination MAC, source MAC, APPID) and protocol.
//   * A stream's first message yields NotApplicable for every rule that
//     needs history. Window rules stay NotApplicable until the window fills.
//   * Identity rules (GR#4 / SR#4) additionally flag the first message of a
//     new stream when an earlier message of another stream already used the
//     same publisher identity (goID / svID): the publisher's DM, SM or APPID
//     changed.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcguard/msgmodel.hpp"

namespace mcguard {

enum class Polarity : uint8_t { PredicateTrueMeansCompliant, PredicateTrueMeansAnomalous };

struct RuleSpec {
    RuleId rule_id;
    Polarity polarity;
    std::string_view trigger;    // when the rule applies
    std::string_view predicate;  // the tested condition, in words
    int window;                  // packets of history (0 = whole-stream summary)
};

std::span<const RuleSpec> rule_specs();
const RuleSpec& rule_spec(RuleId id);

// Machine-readable polarity table (JSON text), shipped as docs/rule_manifest.json.
std::string rule_manifest_json();

// ---------------------------------------------------------------------------
// Training levels and system frequency
// ---------------------------------------------------------------------------

enum class Level : uint8_t { WT, PT, FT };
std::string_view to_string(Level l);
Level parse_level(std::string_view text);

struct TrainingLevel {
    Level level = Level::FT;

    // WT: none; PT: rules #1-#5; FT: rules #1-#8, for the given protocol.
    std::vector<RuleId> enabled_rules(Protocol p) const;
    bool enables(RuleId id) const;

    bool operator==(const TrainingLevel&) const = default;
};

struct SystemFrequency {
    enum class Hertz : uint8_t { F60, F50 } hertz = Hertz::F60;

    int hz() const { return hertz == Hertz::F60 ? 60 : 50; }
    // 80 samples per nominal cycle.
    uint64_t smpcnt_max() const { return 80ULL * static_cast<uint64_t>(hz()) - 1; }

    static SystemFrequency from_hz(int hz);
    bool operator==(const SystemFrequency&) const = default;
};

// Window and interval constants.
inline constexpr int64_t kGooseBurstGapMicros = 10;            // GR#6
inline constexpr int kGooseBurstWindow = 10;                    // GR#6, packets
inline constexpr int64_t kGooseMaxGapMicros = 10'000'000;       // GR#7
inline constexpr int64_t kSvMinIntervalMicros = 200;            // SR#6
inline constexpr int64_t kSvMaxIntervalMicros = 215;            // SR#6
inline constexpr int64_t kSvFloodSpanMicros = 2'083;            // SR#7
inline constexpr int kSvFloodWindow = 12;                       // SR#7, packets

// ---------------------------------------------------------------------------
// Stream state
// ---------------------------------------------------------------------------

// Fixed-capacity ring of the most recent timestamps (oldest evicted first).
class TimeRing {
public:
    static constexpr size_t kCapacity = 12;

    void push(int64_t micros);
    size_t size() const { return size_; }
    // age 0 is the most recent entry.
    int64_t at_age(size_t age) const;

    bool operator==(const TimeRing& other) const;

private:
    std::array<int64_t, kCapacity> buf_{};
    size_t head_ = 0;  // next write position
    size_t size_ = 0;
};

struct StreamState {
    StreamKey key;
    std::optional<Message> last_msg;
    uint64_t max_stnum_seen = 0;
    TimeRing recent_times;
    std::optional<Timestamp> first_seen;
    uint64_t packets_seen = 0;
    // Set when the stream opened with a publisher identity already used by a
    // different stream.
    bool identity_conflict = false;

    void update(const Message& m);
    bool operator==(const StreamState&) const = default;
};

// Pure: never mutates `state`. Throws UsageError for a non-GOOSE rule id.
RuleVerdict eval_goose_rule(RuleId id, const GooseMessage& current, const StreamState& state);
// Pure: never mutates `state`. Throws UsageError for a non-SV rule id.
RuleVerdict eval_sv_rule(RuleId id, const SvMessage& current, const StreamState& state, SystemFrequency freq);

// ---------------------------------------------------------------------------
// Streaming engine
// ---------------------------------------------------------------------------

struct ShardKey {
    Protocol protocol = Protocol::Goose;
    StreamKey key;

    bool operator==(const ShardKey&) const = default;
};

struct ShardKeyHash {
    size_t operator()(const ShardKey& k) const noexcept {
        return StreamKeyHash{}(k.key) * 31 + static_cast<size_t>(k.protocol);
    }
};

class RuleEngine {
public:
    RuleEngine(TrainingLevel level, SystemFrequency freq);

    // Evaluates the enabled rules for `m`, then folds `m` into its stream state.
    PacketVerdict evaluate(const Message& m);

    const std::unordered_map<ShardKey, StreamState, ShardKeyHash>& streams() const { return states_; }
    TrainingLevel level() const { return level_; }
    SystemFrequency frequency() const { return freq_; }

    bool operator==(const RuleEngine& other) const;

private:
    TrainingLevel level_;
    SystemFrequency freq_;
    std::vector<RuleId> goose_rules_;
    std::vector<RuleId> sv_rules_;
    std::unordered_map<ShardKey, StreamState, ShardKeyHash> states_;
    // publisher identity (goID / svID) -> streams that have used it
    std::unordered_map<std::string, std::vector<StreamKey>> goose_identities_;
    std::unordered_map<std::string, std::vector<StreamKey>> sv_identities_;
};

std::vector<PacketVerdict> evaluate_stream(std::span<const Message> messages, TrainingLevel level,
                                           SystemFrequency freq);

// Independent re-implementation of every rule by naive scans over the full
// list. Used as a differential oracle for evaluate_stream.
std::vector<PacketVerdict> oracle_evaluate(std::span<const Message> messages, TrainingLevel level,
                                           SystemFrequency freq);

}  // namespace mcguard
