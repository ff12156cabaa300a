#include "mcguard/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "mcguard/capture.hpp"
#include "mcguard/error.hpp"

namespace mcguard {

namespace {

constexpr int64_t kGooseFloodSpacing = 1;  // us between flood packets
constexpr int64_t kSvFloodSpacing = 10;
constexpr size_t kMargin = 12;  // packets kept clear between injections

struct AttackName {
    AttackKind kind;
    std::string_view name;
};
constexpr AttackName kAttackNames[] = {
    {AttackKind::ReplayStnumRegression, "ReplayStnumRegression"},
    {AttackKind::SqnumSkip, "SqnumSkip"},
    {AttackKind::DataChangeSpoof, "DataChangeSpoof"},
    {AttackKind::FieldTamper, "FieldTamper"},
    {AttackKind::Flood, "Flood"},
    {AttackKind::Suppression, "Suppression"},
    {AttackKind::TimestampMalformat, "TimestampMalformat"},
    {AttackKind::SmpcntJump, "SmpcntJump"},
    {AttackKind::SmpcntOutOfRange, "SmpcntOutOfRange"},
    {AttackKind::IntervalDrift, "IntervalDrift"},
};

}  // namespace

std::string_view to_string(AttackKind a) {
    for (const auto& n : kAttackNames)
        if (n.kind == a) return n.name;
    return "?";
}

AttackKind parse_attack(std::string_view text) {
    std::string want;
    for (char c : text)
        if (c != '_' && c != '-') want += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const auto& n : kAttackNames) {
        std::string have;
        for (char c : n.name) have += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (have == want) return n.kind;
    }
    throw SpecError("unknown attack '" + std::string(text) + "'");
}

bool attack_applies(AttackKind a, Protocol p) {
    switch (a) {
        case AttackKind::ReplayStnumRegression:
        case AttackKind::SqnumSkip:
        case AttackKind::DataChangeSpoof: return p == Protocol::Goose;
        case AttackKind::SmpcntJump:
        case AttackKind::SmpcntOutOfRange:
        case AttackKind::IntervalDrift: return p == Protocol::Sv;
        default: return true;
    }
}

std::vector<RuleId> attack_rules(AttackKind a, Protocol p) {
    const bool g = p == Protocol::Goose;
    switch (a) {
        case AttackKind::ReplayStnumRegression: return {RuleId::GR3};
        case AttackKind::SqnumSkip: return {RuleId::GR1};
        case AttackKind::DataChangeSpoof: return {RuleId::GR8, RuleId::GR2};
        case AttackKind::FieldTamper: return {g ? RuleId::GR4 : RuleId::SR4};
        case AttackKind::Flood: return g ? std::vector<RuleId>{RuleId::GR6} : std::vector<RuleId>{RuleId::SR7, RuleId::SR6};
        case AttackKind::Suppression: return {g ? RuleId::GR7 : RuleId::SR6};
        case AttackKind::TimestampMalformat: return {g ? RuleId::GR5 : RuleId::SR5};
        case AttackKind::SmpcntJump: return {RuleId::SR8};
        case AttackKind::SmpcntOutOfRange: return {RuleId::SR1, RuleId::SR2, RuleId::SR3, RuleId::SR8};
        case AttackKind::IntervalDrift: return {RuleId::SR6};
    }
    return {};
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

// Modulo mapping keeps streams identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : e_(seed) {}

    int64_t between(int64_t lo, int64_t hi) {
        return lo + static_cast<int64_t>(e_() % static_cast<uint64_t>(hi - lo + 1));
    }
    double unit() { return static_cast<double>(e_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return unit() < p; }

private:
    std::mt19937_64 e_;
};

struct Pkt {
    Message msg;
    bool state_change = false;
    std::string tag;  // empty: normal
};
using Stream = std::vector<Pkt>;

int64_t micros_of(const Pkt& p) { return time_of(p.msg).micros_since_midnight; }

void set_time(Message& m, int64_t us, std::optional<int> digits = std::nullopt) {
    if (us < 0 || us >= Timestamp::kMicrosPerDay) throw SpecError("scenario runs past midnight");
    std::visit([&](auto& x) { x.time = Timestamp::from_micros(us, digits.value_or(x.time.fractional_digits)); }, m);
}

GooseMessage& goose(Pkt& p) { return std::get<GooseMessage>(p.msg); }
SvMessage& sv(Pkt& p) { return std::get<SvMessage>(p.msg); }

MacAddress mac(uint8_t a, uint8_t b, uint8_t c, uint8_t d, uint8_t e, uint8_t f) {
    MacAddress m;
    m.octets = {a, b, c, d, e, f};
    return m;
}

Stream goose_baseline(const ScenarioSpec& spec, size_t k, uint64_t budget, int64_t start, Rng& rng) {
    const auto& tm = spec.goose;
    const auto n = static_cast<uint8_t>(k + 1);
    GooseMessage g;
    g.dm = mac(0x01, 0x0C, 0xCD, 0x01, 0x00, n);
    g.sm = mac(0x00, 0x1A, 0xB6, 0x00, 0x01, n);
    g.appid = static_cast<uint32_t>(1 + k);
    g.dataset = "IED" + std::to_string(k + 1) + "LD0/LLN0$DS1";
    g.goid = "IED" + std::to_string(k + 1) + "_GOOSE1";
    g.stnum = 1;
    g.sqnum = 0;
    g.data1 = static_cast<uint8_t>(rng.between(0, 1));
    g.data2 = static_cast<uint8_t>(rng.between(0, 1));

    const int64_t end = kScenarioStartMicros + static_cast<int64_t>(std::llround(spec.duration * 1e6));
    Stream out;
    int64_t t = start;
    auto emit = [&](bool change) {
        if (budget ? out.size() >= budget : t > end) return false;
        Pkt p{g, change, {}};
        set_time(p.msg, t, kGooseTimeDigits);
        out.push_back(std::move(p));
        return true;
    };
    if (!emit(false)) return out;
    for (;;) {
        if (rng.chance(tm.state_change_probability)) {
            t += rng.between(tm.heartbeat_us / 10, tm.heartbeat_us - 1);
            ++g.stnum;
            g.sqnum = 0;
            if (rng.between(0, 1)) g.data1 ^= 1; else g.data2 ^= 1;
            if (!emit(true)) return out;
            for (int64_t gap = tm.first_retransmit_us; gap < tm.heartbeat_us; gap *= 2) {
                t += gap;
                ++g.sqnum;
                if (!emit(false)) return out;
            }
        } else {
            t += tm.heartbeat_us + rng.between(-tm.jitter_us, tm.jitter_us);
            ++g.sqnum;
            if (!emit(false)) return out;
        }
    }
}

Stream sv_baseline(const ScenarioSpec& spec, size_t k, uint64_t budget, int64_t start, Rng& rng) {
    const auto n = static_cast<uint8_t>(k + 1);
    SvMessage s;
    s.dm = mac(0x01, 0x0C, 0xCD, 0x04, 0x00, n);
    s.sm = mac(0x00, 0x1A, 0xB6, 0x00, 0x02, n);
    s.appid = static_cast<uint32_t>(0x4000 + k);
    char svid[16];
    std::snprintf(svid, sizeof svid, "MU%02zu", k + 1);
    s.svid = svid;

    const uint64_t count =
        budget ? budget
               : static_cast<uint64_t>(std::llround(spec.duration * 80.0 * static_cast<double>(spec.freq.hz())));
    const uint64_t wrap = spec.freq.smpcnt_max() + 1;
    Stream out;
    out.reserve(count);
    int64_t t = start;
    for (uint64_t i = 0; i < count; ++i) {
        s.smpcnt = i % wrap;
        Pkt p{s, false, {}};
        set_time(p.msg, t, kSvTimeDigits);
        out.push_back(std::move(p));
        t += rng.between(spec.sv.interval_min_us, spec.sv.interval_max_us);
    }
    return out;
}

// An injection resolved to a packet of one stream.
struct Planned {
    AttackKind attack;
    size_t stream = 0;
    size_t index = 0;  // into the baseline stream
    int64_t magnitude = 0;
    int64_t count = 1;
    std::string field;
    size_t span = 0;        // packets after index whose verdicts it changes
    uint64_t est_labels = 1;
};

bool is_key_field(const std::string& f) { return f == "dm" || f == "sm" || f == "appid"; }

Planned plan(const InjectionSpec& in, const ScenarioSpec& spec) {
    const Protocol p = spec.protocol;
    if (!attack_applies(in.attack, p))
        throw SpecError(std::string(to_string(in.attack)) + " does not apply to " + std::string(to_string(p)));
    if (in.stream >= spec.streams)
        throw SpecError("injection stream " + std::to_string(in.stream) + " does not exist (streams = " +
                        std::to_string(spec.streams) + ")");
    if (!(in.at >= 0)) throw SpecError("injection time must be >= 0");

    const auto max = static_cast<int64_t>(spec.freq.smpcnt_max());
    Planned pl;
    pl.attack = in.attack;
    pl.stream = in.stream;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) throw SpecError(std::string(to_string(in.attack)) + ": " + what);
    };
    switch (in.attack) {
        case AttackKind::ReplayStnumRegression:
            pl.magnitude = in.magnitude.value_or(1);
            pl.count = in.count.value_or(3);
            need(pl.magnitude >= 1, "magnitude (stnum step back) must be >= 1");
            need(pl.count >= 1, "count must be >= 1");
            pl.span = static_cast<size_t>(pl.count);
            pl.est_labels = static_cast<uint64_t>(pl.count);
            break;
        case AttackKind::SqnumSkip:
            pl.magnitude = in.magnitude.value_or(5);
            need(pl.magnitude >= 1, "magnitude (extra sqnum step) must be >= 1");
            break;
        case AttackKind::DataChangeSpoof: break;
        case AttackKind::FieldTamper: {
            pl.field = in.field.empty() ? (p == Protocol::Goose ? "goid" : "svid") : in.field;
            static const std::set<std::string> goose_fields{"dm", "sm", "type", "appid", "dataset", "goid"};
            static const std::set<std::string> sv_fields{"dm", "sm", "type", "appid", "svid"};
            need((p == Protocol::Goose ? goose_fields : sv_fields).count(pl.field) == 1,
                 "field '" + pl.field + "' cannot be tampered for " + std::string(to_string(p)));
            pl.magnitude = in.magnitude.value_or(-1);
            if (pl.field == "type")
                need(pl.magnitude == -1 || (pl.magnitude >= 0 && pl.magnitude <= 0xFFFF), "type must fit 16 bits");
            if (pl.field == "appid")
                need(pl.magnitude == -1 || (pl.magnitude >= 0 && pl.magnitude <= 0xFFFF), "appid must fit 16 bits");
            if (pl.field == "dm" || pl.field == "sm")
                need(pl.magnitude == -1 || (pl.magnitude >= 0 && pl.magnitude <= 0xFF),
                     "magnitude is the new last MAC octet (0..255)");
            break;
        }
        case AttackKind::Flood:
            pl.magnitude = in.magnitude.value_or(p == Protocol::Goose ? 20 : 24);
            need(pl.magnitude <= 10'000, "burst of more than 10000 packets");
            if (p == Protocol::Goose) {
                need(pl.magnitude >= kGooseBurstWindow - 1, "a GOOSE burst needs at least 9 packets");
                pl.est_labels = static_cast<uint64_t>(pl.magnitude - (kGooseBurstWindow - 2));
            } else {
                need(pl.magnitude >= 1, "burst must have at least 1 packet");
                pl.est_labels = static_cast<uint64_t>(pl.magnitude) + 10;
            }
            pl.span = kMargin;
            break;
        case AttackKind::Suppression:
            if (p == Protocol::Goose) {
                pl.magnitude = in.magnitude.value_or(11'000'000);
                need(pl.magnitude > kGooseMaxGapMicros, "GOOSE gap must exceed 10 s (magnitude in us)");
            } else {
                pl.magnitude = in.magnitude.value_or(1'000);
                need(pl.magnitude > kSvMaxIntervalMicros - kSvMinIntervalMicros,
                     "SV gap must exceed 15 us (magnitude in us)");
            }
            break;
        case AttackKind::TimestampMalformat:
            pl.magnitude = in.magnitude.value_or(p == Protocol::Goose ? 3 : 6);
            need(pl.magnitude >= 0 && pl.magnitude <= 6, "digits must be within 0..6");
            need(pl.magnitude != required_time_digits(p), "digits equal the required format");
            break;
        case AttackKind::SmpcntJump:
            pl.magnitude = in.magnitude.value_or(100);
            need(pl.magnitude >= 1, "magnitude must be >= 1");
            need(pl.magnitude % (max + 1) != 0, "a multiple of the counter range is not a jump");
            break;
        case AttackKind::SmpcntOutOfRange:
            pl.magnitude = in.magnitude.value_or(max + 1);
            pl.count = in.count.value_or(1);
            need(pl.magnitude >= max + 1, "offset must push smpcnt above " + std::to_string(max));
            need(pl.magnitude <= 0xFFFF, "offset must fit 16 bits");
            need(pl.count >= 1, "count must be >= 1");
            pl.span = static_cast<size_t>(pl.count);
            pl.est_labels = static_cast<uint64_t>(pl.count) + 1;
            break;
        case AttackKind::IntervalDrift:
            pl.magnitude = in.magnitude.value_or(25);
            need(std::llabs(pl.magnitude) > kSvMaxIntervalMicros - kSvMinIntervalMicros,
                 "drift must be at least 16 us either way");
            need(pl.magnitude >= kSvFloodSpanMicros + 1 - (kSvFloodWindow - 1) * kSvMinIntervalMicros,
                 "drift below -116 us would look like a flood");
            pl.span = 1;
            break;
    }
    return pl;
}

bool needs_history(AttackKind a) {
    return a != AttackKind::Flood && a != AttackKind::TimestampMalformat && a != AttackKind::SmpcntOutOfRange;
}

bool eligible(const Planned& pl, const Stream& st, size_t i) {
    if (i >= st.size()) return false;
    if (needs_history(pl.attack) && i == 0) return false;
    switch (pl.attack) {
        case AttackKind::ReplayStnumRegression: {
            if (i + static_cast<size_t>(pl.count) > st.size()) return false;
            for (size_t j = i; j <= i + static_cast<size_t>(pl.count) && j < st.size(); ++j)
                if (st[j].state_change) return false;
            return std::get<GooseMessage>(st[i].msg).stnum >= static_cast<uint64_t>(pl.magnitude);
        }
        case AttackKind::SqnumSkip:
        case AttackKind::DataChangeSpoof: return !st[i].state_change;
        case AttackKind::SmpcntOutOfRange: return i + static_cast<size_t>(pl.count) <= st.size();
        default: return true;
    }
}

bool fits(const std::vector<Planned>& planned, const Planned& c) {
    for (const auto& o : planned) {
        if (o.stream != c.stream) continue;
        const auto& [a, b] = o.index <= c.index ? std::pair(&o, &c) : std::pair(&c, &o);
        if (b->index <= a->index + a->span + kMargin) return false;
    }
    return true;
}

uint8_t data_mask(const GooseMessage& g) { return static_cast<uint8_t>((g.data1 & 1) | (g.data2 & 1) << 1); }

void apply(const Planned& pl, Stream& st, size_t i, const ScenarioSpec& spec, std::set<StreamKey>& keys) {
    const std::string tag(to_string(pl.attack));
    const auto wrap = static_cast<uint64_t>(spec.freq.smpcnt_max()) + 1;
    switch (pl.attack) {
        case AttackKind::ReplayStnumRegression:
            for (size_t j = i; j < i + static_cast<size_t>(pl.count); ++j) {
                goose(st[j]).stnum -= static_cast<uint64_t>(pl.magnitude);
                st[j].tag = tag;
            }
            break;
        case AttackKind::SqnumSkip:
            for (size_t j = i; j < st.size() && (j == i || !st[j].state_change); ++j)
                goose(st[j]).sqnum += static_cast<uint64_t>(pl.magnitude);
            st[i].tag = tag;
            break;
        case AttackKind::DataChangeSpoof: {
            size_t next = i + 1;
            while (next < st.size() && !st[next].state_change) ++next;
            // The flipped bit must not equal the next state change's flip, or
            // that change would look like no data change at all.
            uint8_t bit = 1;
            if (next < st.size()) {
                const uint8_t before = data_mask(goose(st[next - 1]));
                const uint8_t after = data_mask(goose(st[next]));
                bit = (before ^ 1) != after ? 1 : 2;
            }
            for (size_t j = i; j < next; ++j) {
                if (bit == 1) goose(st[j]).data1 ^= 1; else goose(st[j]).data2 ^= 1;
            }
            st[i].tag = tag;
            break;
        }
        case AttackKind::FieldTamper: {
            const bool key = is_key_field(pl.field);
            std::optional<StreamKey> new_key;
            for (size_t j = i; j < st.size(); ++j) {
                std::visit(
                    [&](auto& m) {
                        if (pl.field == "dm") {
                            m.dm.octets[5] = pl.magnitude >= 0 ? static_cast<uint8_t>(pl.magnitude) : m.dm.octets[5] ^ 0x80;
                        } else if (pl.field == "sm") {
                            m.sm.octets[5] = pl.magnitude >= 0 ? static_cast<uint8_t>(pl.magnitude) : m.sm.octets[5] ^ 0x80;
                        } else if (pl.field == "appid") {
                            m.appid = pl.magnitude >= 0 ? static_cast<uint32_t>(pl.magnitude) : (m.appid + 0x100) & 0xFFFF;
                        } else if (pl.field == "type") {
                            m.ethertype = pl.magnitude >= 0 ? static_cast<uint16_t>(pl.magnitude) : m.ethertype ^ 0x0001;
                        }
                    },
                    st[j].msg);
                if (auto* g = std::get_if<GooseMessage>(&st[j].msg)) {
                    if (pl.field == "dataset") g->dataset += "X";
                    if (pl.field == "goid") g->goid += "X";
                } else {
                    if (pl.field == "svid") sv(st[j]).svid += "X";
                }
                if (key && !new_key) new_key = stream_key_of(st[j].msg);
            }
            if (key) {
                if (keys.count(*new_key))
                    throw SpecError("FieldTamper on " + pl.field + " would reuse an existing stream key " +
                                    new_key->to_string());
                keys.insert(*new_key);
            } else if (pl.field == "type" && pl.magnitude >= 0 &&
                       static_cast<uint16_t>(pl.magnitude) == std::visit([](auto& m) { return m.ethertype; }, st[i - 1].msg)) {
                throw SpecError("FieldTamper: new type equals the current one");
            }
            st[i].tag = tag;
            break;
        }
        case AttackKind::Flood: {
            const bool is_goose = spec.protocol == Protocol::Goose;
            const int64_t spacing = is_goose ? kGooseFloodSpacing : kSvFloodSpacing;
            const auto burst = static_cast<size_t>(pl.magnitude);
            const int64_t shift = static_cast<int64_t>(burst) * spacing;
            // later packets move back by the burst length and their counters
            // continue after the burst
            bool same_state = true;
            for (size_t j = i + 1; j < st.size(); ++j) {
                set_time(st[j].msg, micros_of(st[j]) + shift);
                if (is_goose) {
                    if (st[j].state_change) same_state = false;
                    if (same_state) goose(st[j]).sqnum += burst;
                } else {
                    sv(st[j]).smpcnt = (sv(st[j]).smpcnt + burst) % wrap;
                }
            }
            std::vector<Pkt> extra;
            for (size_t b = 1; b <= burst; ++b) {
                Pkt p{st[i].msg, false, {}};
                set_time(p.msg, micros_of(st[i]) + static_cast<int64_t>(b) * spacing);
                if (is_goose) {
                    goose(p).sqnum += b;
                } else {
                    sv(p).smpcnt = (sv(p).smpcnt + b) % wrap;
                    p.tag = tag;  // every SV burst packet breaks the interval rule
                }
                extra.push_back(std::move(p));
            }
            st.insert(st.begin() + static_cast<std::ptrdiff_t>(i + 1), extra.begin(), extra.end());
            break;
        }
        case AttackKind::Suppression:
            for (size_t j = i; j < st.size(); ++j) set_time(st[j].msg, micros_of(st[j]) + pl.magnitude);
            st[i].tag = tag;
            break;
        case AttackKind::TimestampMalformat:
            set_time(st[i].msg, micros_of(st[i]), static_cast<int>(pl.magnitude));
            st[i].tag = tag;
            break;
        case AttackKind::SmpcntJump:
            for (size_t j = i; j < st.size(); ++j)
                sv(st[j]).smpcnt = (sv(st[j]).smpcnt + static_cast<uint64_t>(pl.magnitude)) % wrap;
            st[i].tag = tag;
            break;
        case AttackKind::SmpcntOutOfRange: {
            const size_t end = i + static_cast<size_t>(pl.count);
            for (size_t j = i; j < end; ++j) {
                sv(st[j]).smpcnt += static_cast<uint64_t>(pl.magnitude);
                st[j].tag = tag;
            }
            if (end < st.size()) st[end].tag = tag;  // re-entry breaks the progression rules
            break;
        }
        case AttackKind::IntervalDrift:
            for (size_t j = i; j < st.size(); ++j) set_time(st[j].msg, micros_of(st[j]) + pl.magnitude);
            st[i].tag = tag;
            break;
    }
}

// Labels every packet that satisfies the flood rate condition of its stream.
void label_floods(std::vector<Pkt>& merged, Protocol p) {
    std::map<StreamKey, std::vector<int64_t>> times;
    for (auto& pk : merged) {
        auto& ts = times[stream_key_of(pk.msg)];
        ts.push_back(micros_of(pk));
        bool flood = false;
        if (p == Protocol::Goose) {
            const size_t w = kGooseBurstWindow;
            if (ts.size() >= w) {
                flood = true;
                for (size_t k = ts.size() - w + 1; k < ts.size(); ++k)
                    if (ts[k] - ts[k - 1] > kGooseBurstGapMicros) flood = false;
            }
        } else {
            const size_t w = kSvFloodWindow;
            flood = ts.size() >= w && ts.back() - ts[ts.size() - w] <= kSvFloodSpanMicros;
        }
        if (flood && pk.tag.empty()) pk.tag = std::string(to_string(AttackKind::Flood));
    }
}

void validate(const ScenarioSpec& s) {
    if (s.streams < 1 || s.streams > 200) throw SpecError("streams must be within 1..200");
    if (!s.packets && !(s.duration > 0)) throw SpecError("duration must be positive");
    if (!s.packets && s.duration > 12 * 3600) throw SpecError("duration longer than 12 h");
    if (s.packets && *s.packets < s.streams) throw SpecError("fewer packets than streams");
    if (s.anomaly_rate && !(*s.anomaly_rate > 0 && *s.anomaly_rate <= 0.5))
        throw SpecError("anomaly_rate must be within (0, 0.5]");
    const auto& g = s.goose;
    if (g.heartbeat_us <= kGooseBurstGapMicros || g.jitter_us < 0 || g.heartbeat_us - g.jitter_us <= kGooseBurstGapMicros ||
        g.heartbeat_us + g.jitter_us > kGooseMaxGapMicros)
        throw SpecError("GOOSE heartbeat +/- jitter must stay within (10 us, 10 s]");
    if (g.first_retransmit_us <= kGooseBurstGapMicros) throw SpecError("first retransmission must be > 10 us");
    if (!(g.state_change_probability >= 0 && g.state_change_probability <= 1))
        throw SpecError("state_change_probability must be within [0, 1]");
    if (s.sv.interval_min_us < kSvMinIntervalMicros || s.sv.interval_max_us > kSvMaxIntervalMicros ||
        s.sv.interval_min_us > s.sv.interval_max_us)
        throw SpecError("SV interval bounds must lie within [200, 215] us");
}

}  // namespace

std::vector<LabeledRecord> generate(const ScenarioSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);

    // baseline
    std::vector<Stream> streams;
    for (size_t k = 0; k < spec.streams; ++k) {
        uint64_t budget = 0;
        if (spec.packets) budget = *spec.packets / spec.streams + (k < *spec.packets % spec.streams ? 1 : 0);
        int64_t start = kScenarioStartMicros;
        if (k > 0)
            start += spec.protocol == Protocol::Goose ? rng.between(1, spec.goose.heartbeat_us / 2)
                                                      : rng.between(0, kSvMinIntervalMicros - 1);
        streams.push_back(spec.protocol == Protocol::Goose ? goose_baseline(spec, k, budget, start, rng)
                                                           : sv_baseline(spec, k, budget, start, rng));
    }

    // explicit injections
    std::vector<Planned> planned;
    for (const auto& in : spec.injections) {
        Planned pl = plan(in, spec);
        const Stream& st = streams[pl.stream];
        const int64_t at = kScenarioStartMicros + static_cast<int64_t>(std::llround(in.at * 1e6));
        size_t i = 0;
        while (i < st.size() && micros_of(st[i]) < at) ++i;
        while (i < st.size() && !eligible(pl, st, i)) ++i;
        if (i >= st.size())
            throw SpecError(std::string(to_string(in.attack)) + " at t=" + std::to_string(in.at) +
                            " s: no eligible packet in stream " + std::to_string(pl.stream));
        pl.index = i;
        if (!fits(planned, pl))
            throw SpecError(std::string(to_string(in.attack)) + " at t=" + std::to_string(in.at) +
                            " s collides with another injection (packets must be at least " +
                            std::to_string(kMargin) + " apart)");
        planned.push_back(pl);
    }

    // random mix
    if (spec.anomaly_rate) {
        std::vector<AttackKind> kinds;
        for (AttackKind a : kAllAttacks)
            if (attack_applies(a, spec.protocol)) kinds.push_back(a);
        uint64_t total = 0;
        for (const auto& st : streams) total += st.size();
        const double want = *spec.anomaly_rate * static_cast<double>(total);
        double have = 0;
        for (const auto& p : planned) have += static_cast<double>(p.est_labels);

        double mean_labels = 0;
        for (AttackKind a : kinds) {
            InjectionSpec probe;
            probe.attack = a;
            mean_labels += static_cast<double>(plan(probe, spec).est_labels);
        }
        mean_labels /= static_cast<double>(kinds.size());
        // spread injections evenly; a second pass from the start fills any
        // shortfall left by ineligible targets
        const double per_stream = static_cast<double>(total) * mean_labels / std::max(want, 1.0);
        const auto jitter = static_cast<int64_t>(std::max(0.0, 2.0 * (per_stream - static_cast<double>(kMargin) - 2.0)));

        for (int pass = 0; pass < 2 && have < want; ++pass) {
            std::vector<size_t> cursor(streams.size(), 1);
            std::vector<bool> done(streams.size(), false);
            while (have < want && std::find(done.begin(), done.end(), false) != done.end()) {
                const auto s = static_cast<size_t>(rng.between(0, static_cast<int64_t>(streams.size()) - 1));
                if (done[s]) continue;
                InjectionSpec in;
                in.attack = kinds[static_cast<size_t>(rng.between(0, static_cast<int64_t>(kinds.size()) - 1))];
                in.stream = s;
                if (in.attack == AttackKind::FieldTamper) {
                    // key fields would need globally fresh keys and a changed
                    // ethertype hides frames from capture readers
                    in.field = spec.protocol == Protocol::Goose ? (rng.between(0, 1) ? "goid" : "dataset") : "svid";
                }
                Planned pl = plan(in, spec);
                const Stream& st = streams[s];
                size_t i = cursor[s] + static_cast<size_t>(pass == 0 ? rng.between(0, jitter) : 0);
                for (; i < st.size(); ++i) {
                    pl.index = i;
                    if (eligible(pl, st, i) && fits(planned, pl)) break;
                }
                if (i >= st.size()) {
                    done[s] = true;
                    continue;
                }
                cursor[s] = i + pl.span + kMargin + 1;
                have += static_cast<double>(pl.est_labels);
                planned.push_back(pl);
            }
        }
    }

    // apply in stream order; inserted flood packets shift later targets
    std::sort(planned.begin(), planned.end(),
              [](const Planned& a, const Planned& b) { return std::tie(a.stream, a.index) < std::tie(b.stream, b.index); });
    std::set<StreamKey> keys;
    for (const auto& st : streams) keys.insert(stream_key_of(st.front().msg));
    std::vector<size_t> inserted(streams.size(), 0);
    bool any_flood = false;
    for (const auto& pl : planned) {
        const size_t before = streams[pl.stream].size();
        apply(pl, streams[pl.stream], pl.index + inserted[pl.stream], spec, keys);
        inserted[pl.stream] += streams[pl.stream].size() - before;
        any_flood = any_flood || pl.attack == AttackKind::Flood;
    }

    // merge by time; ties keep stream order
    struct Ref {
        int64_t t;
        size_t s;
        size_t i;
    };
    std::vector<Ref> order;
    for (size_t s = 0; s < streams.size(); ++s)
        for (size_t i = 0; i < streams[s].size(); ++i) order.push_back({micros_of(streams[s][i]), s, i});
    std::sort(order.begin(), order.end(),
              [](const Ref& a, const Ref& b) { return std::tie(a.t, a.s, a.i) < std::tie(b.t, b.s, b.i); });
    std::vector<Pkt> merged;
    merged.reserve(order.size());
    for (const auto& r : order) merged.push_back(std::move(streams[r.s][r.i]));
    if (any_flood) label_floods(merged, spec.protocol);

    std::vector<LabeledRecord> out;
    out.reserve(merged.size());
    for (size_t k = 0; k < merged.size(); ++k) {
        LabeledRecord rec;
        rec.message = std::move(merged[k].msg);
        set_seq_index(rec.message, k);
        if (!merged[k].tag.empty()) {
            rec.label = Label::Anomalous;
            rec.attack_tag = std::move(merged[k].tag);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::map<std::string, uint64_t> summarize(const std::vector<LabeledRecord>& records) {
    std::map<std::string, uint64_t> out;
    for (const auto& r : records) ++out[r.attack_tag ? *r.attack_tag : "Normal"];
    return out;
}

// ---------------------------------------------------------------------------
// Spec files
// ---------------------------------------------------------------------------

ScenarioSpec scenario_from_config(const ConfigTable& t) {
    t.check_keys({"name", "protocol", "duration", "packets", "frequency", "seed", "streams", "anomaly_rate", "goose",
                  "sv", "injection"});
    ScenarioSpec s;
    try {
        if (auto v = t.get_string("name")) s.name = *v;
        const auto proto = t.get_string("protocol");
        if (!proto) throw SpecError("scenario needs protocol = \"goose\" or \"sv\"");
        s.protocol = parse_protocol(*proto);
    } catch (const FormatError& e) {
        throw SpecError(e.what());
    }
    if (auto v = t.get_double("duration")) s.duration = *v;
    if (auto v = t.get_int("packets")) {
        if (*v <= 0) throw SpecError("packets must be positive");
        s.packets = static_cast<uint64_t>(*v);
    }
    if (auto v = t.get_int("frequency")) {
        try {
            s.freq = SystemFrequency::from_hz(static_cast<int>(*v));
        } catch (const UsageError& e) {
            throw SpecError(e.what());
        }
    }
    if (auto v = t.get_int("seed")) s.seed = static_cast<uint64_t>(*v);
    if (auto v = t.get_int("streams")) {
        if (*v < 1) throw SpecError("streams must be >= 1");
        s.streams = static_cast<size_t>(*v);
    }
    if (auto v = t.get_double("anomaly_rate")) s.anomaly_rate = *v;
    if (const auto* g = t.table("goose")) {
        g->check_keys({"heartbeat_us", "jitter_us", "state_change_probability", "first_retransmit_us"});
        if (auto v = g->get_int("heartbeat_us")) s.goose.heartbeat_us = *v;
        if (auto v = g->get_int("jitter_us")) s.goose.jitter_us = *v;
        if (auto v = g->get_double("state_change_probability")) s.goose.state_change_probability = *v;
        if (auto v = g->get_int("first_retransmit_us")) s.goose.first_retransmit_us = *v;
    }
    if (const auto* v = t.table("sv")) {
        v->check_keys({"interval_min_us", "interval_max_us"});
        if (auto x = v->get_int("interval_min_us")) s.sv.interval_min_us = *x;
        if (auto x = v->get_int("interval_max_us")) s.sv.interval_max_us = *x;
    }
    for (const auto& it : t.array("injection")) {
        it.check_keys({"attack", "at", "magnitude", "count", "field", "stream"});
        InjectionSpec in;
        const auto attack = it.get_string("attack");
        if (!attack) throw SpecError(it.path + ": injection needs an attack");
        in.attack = parse_attack(*attack);
        in.at = it.get_double("at").value_or(0);
        in.magnitude = it.get_int("magnitude");
        in.count = it.get_int("count");
        in.field = it.get_string("field").value_or("");
        if (auto v = it.get_int("stream")) {
            if (*v < 0) throw SpecError(it.path + ": stream must be >= 0");
            in.stream = static_cast<size_t>(*v);
        }
        s.injections.push_back(std::move(in));
    }
    return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& file) {
    ScenarioSpec s = scenario_from_config(load_config(file));
    if (s.name == "scenario") s.name = file.stem().string();
    return s;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

void export_csv(const std::vector<LabeledRecord>& records, const std::filesystem::path& path) {
    if (records.empty()) throw UsageError("nothing to export to " + path.string());
    auto out = open_out(path);
    out << csv_header(protocol_of(records.front().message)) << '\n';
    for (const auto& r : records) out << csv_row(r.message) << '\n';
    finish(out, path);
}

void export_pcap(const std::vector<LabeledRecord>& records, const std::filesystem::path& path) {
    if (records.empty()) throw UsageError("nothing to export to " + path.string());
    PcapWriter w(path);
    for (const auto& r : records) w.write(r.message);
}

void export_labels(const std::vector<LabeledRecord>& records, const std::filesystem::path& path) {
    if (records.empty()) throw UsageError("nothing to export to " + path.string());
    auto out = open_out(path);
    out << "seq_index,label,attack_tag\n";
    for (const auto& r : records)
        out << seq_index_of(r.message) << ',' << to_string(r.label) << ',' << csv_escape(r.attack_tag.value_or(""))
            << '\n';
    finish(out, path);
}

DatasetFiles export_dataset(const std::vector<LabeledRecord>& records, const std::filesystem::path& dir,
                            const std::string& stem) {
    DatasetFiles f{dir / (stem + ".csv"), dir / (stem + ".pcap"), dir / (stem + ".labels.csv")};
    export_csv(records, f.csv);
    export_pcap(records, f.pcap);
    export_labels(records, f.labels);
    return f;
}

std::vector<LabelRow> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read labels file " + path.string());
    std::string line;
    std::vector<std::string> cells;
    uint64_t lineno = 0;
    std::vector<LabelRow> out;
    bool header = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!split_csv_line(line, cells))
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": unterminated quote", line);
        if (header) {
            if (cells.size() < 2 || cells[0] != "seq_index" || cells[1] != "label")
                throw SchemaError(path.string() + ": expected header seq_index,label,attack_tag");
            header = false;
            continue;
        }
        if (cells.size() < 2)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected at least 2 columns", line);
        LabelRow r;
        try {
            size_t used = 0;
            r.seq_index = std::stoull(cells[0], &used);
            if (used != cells[0].size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad seq_index", cells[0]);
        }
        try {
            r.label = parse_label(cells[1]);
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad label", cells[1]);
        }
        if (cells.size() > 2) r.attack_tag = cells[2];
        out.push_back(std::move(r));
    }
    if (header) throw SchemaError(path.string() + ": empty labels file");
    return out;
}

}  // namespace mcguard
