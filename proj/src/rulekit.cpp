#include "mcguard/rulekit.hpp"

#include <algorithm>

#include <json.hpp>

#include "mcguard/error.hpp"

namespace mcguard {

namespace {

using P = Polarity;

constexpr RuleSpec kSpecs[] = {
    {RuleId::GR1, P::PredicateTrueMeansCompliant, "data1 and data2 unchanged since the previous packet",
     "sqnum = prev.sqnum + 1", 2},
    {RuleId::GR2, P::PredicateTrueMeansCompliant, "data1 or data2 changed since the previous packet",
     "stnum = prev.stnum + 1 and sqnum = 0", 2},
    {RuleId::GR3, P::PredicateTrueMeansCompliant, "any packet after the first of its stream",
     "stnum >= max stnum of all earlier packets of the stream", 0},
    {RuleId::GR4, P::PredicateTrueMeansCompliant,
     "any packet after the first of its stream; first packet when its goID was already used by another stream",
     "DM, SM, type, appid, dataset and goID unchanged", 2},
    {RuleId::GR5, P::PredicateTrueMeansCompliant, "every packet", "time carries exactly 6 fractional digits", 1},
    {RuleId::GR6, P::PredicateTrueMeansAnomalous, "once the stream holds 10 packets",
     "the 9 gaps between the last 10 packets are all <= 10 us", 10},
    {RuleId::GR7, P::PredicateTrueMeansCompliant, "any packet after the first of its stream",
     "time - prev.time <= 10 s", 2},
    {RuleId::GR8, P::PredicateTrueMeansAnomalous, "data1 or data2 changed since the previous packet",
     "stnum = prev.stnum and sqnum > prev.sqnum", 2},
    {RuleId::SR1, P::PredicateTrueMeansCompliant, "every packet", "0 <= smpcnt <= smpcnt_max", 1},
    {RuleId::SR2, P::PredicateTrueMeansCompliant, "any packet after the first of its stream",
     "prev.smpcnt < smpcnt <= smpcnt_max, or smpcnt = 0 after smpcnt_max", 2},
    {RuleId::SR3, P::PredicateTrueMeansCompliant, "any packet after the first of its stream",
     "smpcnt >= prev.smpcnt, or smpcnt = 0 after smpcnt_max", 2},
    {RuleId::SR4, P::PredicateTrueMeansCompliant,
     "any packet after the first of its stream; first packet when its svID was already used by another stream",
     "DM, SM, type, appid and svID unchanged", 2},
    {RuleId::SR5, P::PredicateTrueMeansCompliant, "every packet", "time carries exactly 3 fractional digits", 1},
    {RuleId::SR6, P::PredicateTrueMeansCompliant, "any packet after the first of its stream",
     "200 us <= time - prev.time <= 215 us", 2},
    {RuleId::SR7, P::PredicateTrueMeansAnomalous, "once the stream holds 12 packets",
     "time - time of the 11th previous packet <= 2083 us", 12},
    {RuleId::SR8, P::PredicateTrueMeansCompliant, "any packet after the first of its stream",
     "smpcnt = prev.smpcnt + 1, or smpcnt = 0 after smpcnt_max", 2},
};

// nullopt: rule not applicable.
Outcome normalize(RuleId id, std::optional<bool> predicate) {
    if (!predicate) return Outcome::NotApplicable;
    bool compliant = rule_spec(id).polarity == P::PredicateTrueMeansCompliant ? *predicate : !*predicate;
    return compliant ? Outcome::Compliant : Outcome::Anomalous;
}

bool data_changed(const GooseMessage& cur, const GooseMessage& prev) {
    return cur.data1 != prev.data1 || cur.data2 != prev.data2;
}

}  // namespace

std::span<const RuleSpec> rule_specs() { return kSpecs; }

const RuleSpec& rule_spec(RuleId id) { return kSpecs[static_cast<size_t>(id)]; }

std::string rule_manifest_json() {
    nlohmann::ordered_json rules = nlohmann::ordered_json::array();
    for (const auto& s : kSpecs) {
        nlohmann::ordered_json r;
        r["rule_id"] = rule_name(s.rule_id);
        r["protocol"] = to_string(rule_protocol(s.rule_id));
        r["polarity"] = s.polarity == P::PredicateTrueMeansCompliant ? "PredicateTrueMeansCompliant"
                                                                     : "PredicateTrueMeansAnomalous";
        r["trigger"] = s.trigger;
        r["predicate"] = s.predicate;
        r["window"] = s.window;
        r["levels"] = rule_number(s.rule_id) <= 5 ? nlohmann::ordered_json{"PT", "FT"} : nlohmann::ordered_json{"FT"};
        rules.push_back(std::move(r));
    }
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["rules"] = std::move(rules);
    return doc.dump(2) + "\n";
}

std::string_view to_string(Level l) {
    switch (l) {
        case Level::WT: return "WT";
        case Level::PT: return "PT";
        case Level::FT: return "FT";
    }
    return "?";
}

Level parse_level(std::string_view text) {
    std::string t(text);
    for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (t == "WT") return Level::WT;
    if (t == "PT") return Level::PT;
    if (t == "FT") return Level::FT;
    throw UsageError("unknown training level '" + std::string(text) + "' (expected WT, PT or FT)");
}

std::vector<RuleId> TrainingLevel::enabled_rules(Protocol p) const {
    std::vector<RuleId> out;
    const int last = level == Level::WT ? 0 : level == Level::PT ? 5 : 8;
    for (int n = 1; n <= last; ++n) out.push_back(make_rule(p, n));
    return out;
}

bool TrainingLevel::enables(RuleId id) const {
    const int n = rule_number(id);
    switch (level) {
        case Level::WT: return false;
        case Level::PT: return n <= 5;
        case Level::FT: return true;
    }
    return false;
}

SystemFrequency SystemFrequency::from_hz(int hz) {
    if (hz == 60) return {Hertz::F60};
    if (hz == 50) return {Hertz::F50};
    throw UsageError("system frequency must be 50 or 60 Hz, got " + std::to_string(hz));
}

// ---------------------------------------------------------------------------

void TimeRing::push(int64_t micros) {
    buf_[head_] = micros;
    head_ = (head_ + 1) % kCapacity;
    if (size_ < kCapacity) ++size_;
}

int64_t TimeRing::at_age(size_t age) const {
    if (age >= size_) throw UsageError("TimeRing::at_age out of range");
    return buf_[(head_ + kCapacity - 1 - age) % kCapacity];
}

bool TimeRing::operator==(const TimeRing& other) const {
    if (size_ != other.size_) return false;
    for (size_t i = 0; i < size_; ++i)
        if (at_age(i) != other.at_age(i)) return false;
    return true;
}

void StreamState::update(const Message& m) {
    if (!first_seen) first_seen = time_of(m);
    if (const auto* g = std::get_if<GooseMessage>(&m))
        max_stnum_seen = packets_seen == 0 ? g->stnum : std::max(max_stnum_seen, g->stnum);
    recent_times.push(time_of(m).micros_since_midnight);
    last_msg = m;
    ++packets_seen;
}

// ---------------------------------------------------------------------------

RuleVerdict eval_goose_rule(RuleId id, const GooseMessage& cur, const StreamState& state) {
    if (rule_protocol(id) != Protocol::Goose)
        throw UsageError(std::string(rule_name(id)) + " is not a GOOSE rule");

    const GooseMessage* prev = state.last_msg ? std::get_if<GooseMessage>(&*state.last_msg) : nullptr;
    std::optional<bool> pred;

    switch (id) {
        case RuleId::GR1:
            if (prev && !data_changed(cur, *prev)) pred = cur.sqnum == prev->sqnum + 1;
            break;
        case RuleId::GR2:
            if (prev && data_changed(cur, *prev)) pred = cur.stnum == prev->stnum + 1 && cur.sqnum == 0;
            break;
        case RuleId::GR3:
            if (prev) pred = cur.stnum >= state.max_stnum_seen;
            break;
        case RuleId::GR4:
            if (prev)
                pred = cur.dm == prev->dm && cur.sm == prev->sm && cur.ethertype == prev->ethertype &&
                       cur.appid == prev->appid && cur.dataset == prev->dataset && cur.goid == prev->goid;
            else if (state.identity_conflict)
                pred = false;
            break;
        case RuleId::GR5:
            pred = cur.time.fractional_digits == kGooseTimeDigits;
            break;
        case RuleId::GR6: {
            const size_t gaps = kGooseBurstWindow - 1;
            if (state.recent_times.size() >= gaps) {
                bool all_tight = true;
                int64_t later = cur.time.micros_since_midnight;
                for (size_t age = 0; age < gaps && all_tight; ++age) {
                    const int64_t earlier = state.recent_times.at_age(age);
                    all_tight = later - earlier <= kGooseBurstGapMicros;
                    later = earlier;
                }
                pred = all_tight;
            }
            break;
        }
        case RuleId::GR7:
            if (prev) pred = cur.time.micros_since_midnight - prev->time.micros_since_midnight <= kGooseMaxGapMicros;
            break;
        case RuleId::GR8:
            if (prev && data_changed(cur, *prev)) pred = cur.stnum == prev->stnum && cur.sqnum > prev->sqnum;
            break;
        default:
            break;
    }
    return {id, normalize(id, pred)};
}

RuleVerdict eval_sv_rule(RuleId id, const SvMessage& cur, const StreamState& state, SystemFrequency freq) {
    if (rule_protocol(id) != Protocol::Sv) throw UsageError(std::string(rule_name(id)) + " is not an SV rule");

    const SvMessage* prev = state.last_msg ? std::get_if<SvMessage>(&*state.last_msg) : nullptr;
    const uint64_t max = freq.smpcnt_max();
    const uint64_t s = cur.smpcnt;
    std::optional<bool> pred;

    switch (id) {
        case RuleId::SR1:
            pred = s <= max;
            break;
        case RuleId::SR2:
            if (prev) pred = (s > prev->smpcnt && s <= max) || (s == 0 && prev->smpcnt == max);
            break;
        case RuleId::SR3:
            if (prev) pred = s >= prev->smpcnt || (s == 0 && prev->smpcnt == max);
            break;
        case RuleId::SR4:
            if (prev)
                pred = cur.dm == prev->dm && cur.sm == prev->sm && cur.ethertype == prev->ethertype &&
                       cur.appid == prev->appid && cur.svid == prev->svid;
            else if (state.identity_conflict)
                pred = false;
            break;
        case RuleId::SR5:
            pred = cur.time.fractional_digits == kSvTimeDigits;
            break;
        case RuleId::SR6:
            if (prev) {
                const int64_t d = cur.time.micros_since_midnight - prev->time.micros_since_midnight;
                pred = d >= kSvMinIntervalMicros && d <= kSvMaxIntervalMicros;
            }
            break;
        case RuleId::SR7: {
            const size_t back = kSvFloodWindow - 1;
            if (state.recent_times.size() >= back)
                pred = cur.time.micros_since_midnight - state.recent_times.at_age(back - 1) <= kSvFloodSpanMicros;
            break;
        }
        case RuleId::SR8:
            if (prev) pred = (prev->smpcnt < max && s == prev->smpcnt + 1) || (prev->smpcnt == max && s == 0);
            break;
        default:
            break;
    }
    return {id, normalize(id, pred)};
}

// ---------------------------------------------------------------------------

RuleEngine::RuleEngine(TrainingLevel level, SystemFrequency freq)
    : level_(level),
      freq_(freq),
      goose_rules_(level.enabled_rules(Protocol::Goose)),
      sv_rules_(level.enabled_rules(Protocol::Sv)) {}

PacketVerdict RuleEngine::evaluate(const Message& m) {
    const Protocol p = protocol_of(m);
    const StreamKey key = stream_key_of(m);
    const std::string& identity =
        p == Protocol::Goose ? std::get<GooseMessage>(m).goid : std::get<SvMessage>(m).svid;
    auto& registry = p == Protocol::Goose ? goose_identities_ : sv_identities_;

    auto [it, inserted] = states_.try_emplace(ShardKey{p, key});
    StreamState& state = it->second;
    if (inserted) {
        state.key = key;
        auto r = registry.find(identity);
        state.identity_conflict = r != registry.end() && !r->second.empty();
    }

    std::vector<RuleVerdict> per_rule;
    if (p == Protocol::Goose) {
        const auto& g = std::get<GooseMessage>(m);
        per_rule.reserve(goose_rules_.size());
        for (RuleId id : goose_rules_) per_rule.push_back(eval_goose_rule(id, g, state));
    } else {
        const auto& s = std::get<SvMessage>(m);
        per_rule.reserve(sv_rules_.size());
        for (RuleId id : sv_rules_) per_rule.push_back(eval_sv_rule(id, s, state, freq_));
    }

    state.update(m);
    auto& users = registry[identity];
    if (std::find(users.begin(), users.end(), key) == users.end()) users.push_back(key);

    return make_packet_verdict(seq_index_of(m), std::move(per_rule));
}

bool RuleEngine::operator==(const RuleEngine& other) const {
    return level_ == other.level_ && freq_ == other.freq_ && states_ == other.states_ &&
           goose_identities_ == other.goose_identities_ && sv_identities_ == other.sv_identities_;
}

std::vector<PacketVerdict> evaluate_stream(std::span<const Message> messages, TrainingLevel level,
                                           SystemFrequency freq) {
    RuleEngine engine(level, freq);
    std::vector<PacketVerdict> out;
    out.reserve(messages.size());
    for (const auto& m : messages) out.push_back(engine.evaluate(m));
    return out;
}

}  // namespace mcguard
