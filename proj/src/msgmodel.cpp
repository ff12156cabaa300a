#include "mcguard/msgmodel.hpp"

#include <cctype>
#include <cstdio>

#include "mcguard/error.hpp"

namespace mcguard {

namespace {

constexpr int64_t kPow10[7] = {1, 10, 100, 1000, 10000, 100000, 1000000};

bool parse_two_digits(std::string_view s, int& out) {
    if (s.size() != 2 || !std::isdigit(static_cast<unsigned char>(s[0])) ||
        !std::isdigit(static_cast<unsigned char>(s[1]))) {
        return false;
    }
    out = (s[0] - '0') * 10 + (s[1] - '0');
    return true;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

std::string_view to_string(Protocol p) {
    return p == Protocol::Goose ? "goose" : "sv";
}

Protocol parse_protocol(std::string_view text) {
    const auto t = lower(text);
    if (t == "goose") return Protocol::Goose;
    if (t == "sv") return Protocol::Sv;
    throw FormatError("unknown protocol", std::string(text));
}

// --- Timestamp --------------------------------------------------------------

Timestamp Timestamp::from_micros(int64_t micros, int digits) {
    if (micros < 0 || micros >= kMicrosPerDay) {
        throw UsageError("timestamp outside a single day: " + std::to_string(micros));
    }
    if (digits < 0 || digits > 6) {
        throw UsageError("fractional digits must be within 0..6");
    }
    return Timestamp{micros, format_timestamp(micros, digits), digits};
}

std::strong_ordering Timestamp::operator<=>(const Timestamp& other) const {
    if (auto c = micros_since_midnight <=> other.micros_since_midnight; c != 0) return c;
    if (auto c = fractional_digits <=> other.fractional_digits; c != 0) return c;
    return raw_text.compare(other.raw_text) <=> 0;
}

Timestamp parse_timestamp(std::string_view text) {
    // HH:MM:SS or HH:MM:SS.f..f
    if (text.size() < 8 || text[2] != ':' || text[5] != ':') {
        throw FormatError("malformed timestamp", std::string(text));
    }
    int hh = 0, mm = 0, ss = 0;
    if (!parse_two_digits(text.substr(0, 2), hh)) throw FormatError("non-numeric hour", std::string(text.substr(0, 2)));
    if (!parse_two_digits(text.substr(3, 2), mm)) throw FormatError("non-numeric minute", std::string(text.substr(3, 2)));
    if (!parse_two_digits(text.substr(6, 2), ss)) throw FormatError("non-numeric second", std::string(text.substr(6, 2)));
    if (hh > 23) throw FormatError("hour out of range", std::string(text.substr(0, 2)));
    if (mm > 59) throw FormatError("minute out of range", std::string(text.substr(3, 2)));
    if (ss > 59) throw FormatError("second out of range", std::string(text.substr(6, 2)));

    int digits = 0;
    int64_t fraction = 0;
    if (text.size() > 8) {
        if (text[8] != '.') throw FormatError("unexpected trailing text", std::string(text.substr(8)));
        const auto frac = text.substr(9);
        if (frac.empty()) throw FormatError("empty fractional part", std::string(text));
        if (frac.size() > 6) throw FormatError("more than 6 fractional digits", std::string(frac));
        for (char c : frac) {
            if (!std::isdigit(static_cast<unsigned char>(c))) {
                throw FormatError("non-numeric fractional part", std::string(frac));
            }
            fraction = fraction * 10 + (c - '0');
        }
        digits = static_cast<int>(frac.size());
    }
    const int64_t micros = hh * 3'600'000'000LL + mm * 60'000'000LL + ss * 1'000'000LL +
                           fraction * kPow10[6 - digits];
    return Timestamp{micros, std::string(text), digits};
}

std::string format_timestamp(int64_t micros, int digits) {
    if (digits < 0 || digits > 6) throw UsageError("fractional digits must be within 0..6");
    if (micros < 0 || micros >= Timestamp::kMicrosPerDay) {
        throw UsageError("timestamp outside a single day: " + std::to_string(micros));
    }
    const int64_t secs = micros / 1'000'000;
    const int64_t frac = micros % 1'000'000;
    char buf[32];
    int n = std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(secs / 3600),
                          static_cast<long long>((secs / 60) % 60), static_cast<long long>(secs % 60));
    if (digits > 0) {
        std::snprintf(buf + n, sizeof buf - n, ".%0*lld", digits,
                      static_cast<long long>(frac / kPow10[6 - digits]));
    }
    return buf;
}

std::string format_timestamp(const Timestamp& ts, int digits) {
    return format_timestamp(ts.micros_since_midnight, digits);
}

// --- MacAddress -------------------------------------------------------------

std::string MacAddress::to_string() const {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02X:%02X:%02X:%02X:%02X:%02X", octets[0], octets[1], octets[2],
                  octets[3], octets[4], octets[5]);
    return buf;
}

MacAddress parse_mac(std::string_view text, MacRole role) {
    std::vector<uint8_t> bytes;
    size_t i = 0;
    const auto fail = [&] { throw FormatError("malformed MAC address", std::string(text)); };
    while (i < text.size()) {
        char c = text[i];
        if (c == ':' || c == '-' || c == ' ') {
            ++i;
            continue;
        }
        // One or two hex digits per octet when separated; exactly two otherwise.
        int hi = hex_value(c);
        if (hi < 0) fail();
        int value = hi;
        if (i + 1 < text.size() && hex_value(text[i + 1]) >= 0) {
            value = hi * 16 + hex_value(text[i + 1]);
            i += 2;
        } else {
            i += 1;
        }
        bytes.push_back(static_cast<uint8_t>(value));
        if (bytes.size() > 6) fail();
    }
    MacAddress mac;
    if (bytes.size() == 6) {
        std::copy(bytes.begin(), bytes.end(), mac.octets.begin());
    } else if (bytes.size() == 3) {
        const auto& pad = role == MacRole::Destination ? kMulticastPrefix : kSourcePadding;
        std::copy(pad.begin(), pad.end(), mac.octets.begin());
        std::copy(bytes.begin(), bytes.end(), mac.octets.begin() + 3);
    } else {
        fail();
    }
    return mac;
}

// --- Messages ---------------------------------------------------------------

Protocol protocol_of(const Message& m) {
    return std::holds_alternative<GooseMessage>(m) ? Protocol::Goose : Protocol::Sv;
}

const Timestamp& time_of(const Message& m) {
    return std::visit([](const auto& x) -> const Timestamp& { return x.time; }, m);
}

uint64_t seq_index_of(const Message& m) {
    return std::visit([](const auto& x) { return x.seq_index; }, m);
}

void set_seq_index(Message& m, uint64_t seq) {
    std::visit([seq](auto& x) { x.seq_index = seq; }, m);
}

std::string StreamKey::to_string() const {
    return dm.to_string() + "/" + sm.to_string() + "/" + std::to_string(appid);
}

StreamKey stream_key_of(const Message& m) {
    return std::visit([](const auto& x) { return StreamKey{x.dm, x.sm, x.appid}; }, m);
}

size_t StreamKeyHash::operator()(const StreamKey& k) const noexcept {
    uint64_t h = 1469598103934665603ULL;
    const auto mix = [&h](uint8_t b) {
        h ^= b;
        h *= 1099511628211ULL;
    };
    for (auto b : k.dm.octets) mix(b);
    for (auto b : k.sm.octets) mix(b);
    for (int s = 0; s < 32; s += 8) mix(static_cast<uint8_t>(k.appid >> s));
    return static_cast<size_t>(h);
}

// --- Rules ------------------------------------------------------------------

std::string_view rule_name(RuleId id) {
    static constexpr std::string_view names[] = {
        "GR#1", "GR#2", "GR#3", "GR#4", "GR#5", "GR#6", "GR#7", "GR#8",
        "SR#1", "SR#2", "SR#3", "SR#4", "SR#5", "SR#6", "SR#7", "SR#8"};
    return names[static_cast<size_t>(id)];
}

RuleId parse_rule_id(std::string_view text) {
    std::string t;
    for (char c : text) {
        if (c != '#') t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (t.size() == 3 && (t[0] == 'G' || t[0] == 'S') && t[1] == 'R' && t[2] >= '1' && t[2] <= '8') {
        return make_rule(t[0] == 'G' ? Protocol::Goose : Protocol::Sv, t[2] - '0');
    }
    throw FormatError("unknown rule id", std::string(text));
}

Protocol rule_protocol(RuleId id) {
    return static_cast<int>(id) < 8 ? Protocol::Goose : Protocol::Sv;
}

int rule_number(RuleId id) { return static_cast<int>(id) % 8 + 1; }

RuleId make_rule(Protocol p, int number) {
    if (number < 1 || number > 8) throw UsageError("rule number must be within 1..8");
    return static_cast<RuleId>((p == Protocol::Goose ? 0 : 8) + number - 1);
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Compliant: return "Compliant";
        case Outcome::Anomalous: return "Anomalous";
        case Outcome::NotApplicable: return "NotApplicable";
    }
    return "?";
}

PacketVerdict make_packet_verdict(uint64_t seq_index, std::vector<RuleVerdict> per_rule) {
    PacketVerdict v{seq_index, std::move(per_rule), false};
    for (const auto& r : v.per_rule) {
        if (r.outcome == Outcome::Anomalous) {
            v.anomalous = true;
            break;
        }
    }
    return v;
}

std::string_view to_string(Label l) { return l == Label::Normal ? "Normal" : "Anomalous"; }

Label parse_label(std::string_view text) {
    const auto t = lower(text);
    if (t == "normal" || t == "0") return Label::Normal;
    if (t == "anomalous" || t == "1") return Label::Anomalous;
    throw FormatError("unknown label", std::string(text));
}

}  // namespace mcguard
