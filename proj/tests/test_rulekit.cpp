#include <doctest.h>

#include "mcguard/error.hpp"
#include "mcguard/rulekit.hpp"
#include "support/corpus.hpp"

using namespace mcguard;

namespace {

GooseMessage goose(int64_t micros, uint64_t stnum, uint64_t sqnum, uint8_t d1 = 0, uint8_t d2 = 0) {
    GooseMessage g;
    g.time = Timestamp::from_micros(micros, 6);
    g.dm = parse_mac("01:0C:CD:01:00:03", MacRole::Destination);
    g.sm = parse_mac("00:00:00:00:00:01", MacRole::Source);
    g.appid = 3;
    g.dataset = "LD0/LLN0$DS1";
    g.goid = "GO1";
    g.stnum = stnum;
    g.sqnum = sqnum;
    g.data1 = d1;
    g.data2 = d2;
    return g;
}

SvMessage sv(int64_t micros, uint64_t smpcnt) {
    SvMessage s;
    s.time = Timestamp::from_micros(micros, 3);
    s.dm = parse_mac("01:0C:CD:04:00:01", MacRole::Destination);
    s.sm = parse_mac("00:00:00:00:00:02", MacRole::Source);
    s.appid = 0x4000;
    s.svid = "MU01";
    s.smpcnt = smpcnt;
    return s;
}

StreamState after(std::initializer_list<Message> prior) {
    StreamState st;
    for (const auto& m : prior) st.update(m);
    return st;
}

Outcome g_rule(RuleId id, const GooseMessage& cur, std::initializer_list<Message> prior) {
    return eval_goose_rule(id, cur, after(prior)).outcome;
}

Outcome s_rule(RuleId id, const SvMessage& cur, std::initializer_list<Message> prior,
               SystemFrequency f = {}) {
    return eval_sv_rule(id, cur, after(prior), f).outcome;
}

constexpr int64_t T0 = 36'000'000'000;

}  // namespace

TEST_CASE("GR#1 sequence increment") {
    CHECK(g_rule(RuleId::GR1, goose(T0 + 1000, 1, 6), {goose(T0, 1, 5)}) == Outcome::Compliant);
    CHECK(g_rule(RuleId::GR1, goose(T0 + 1000, 1, 7), {goose(T0, 1, 5)}) == Outcome::Anomalous);
    CHECK(g_rule(RuleId::GR1, goose(T0, 1, 5), {}) == Outcome::NotApplicable);
    // a data change hands the transition to GR#2
    CHECK(g_rule(RuleId::GR1, goose(T0 + 1000, 2, 0, 1), {goose(T0, 1, 5)}) == Outcome::NotApplicable);
}

TEST_CASE("GR#2 state change") {
    const Message prev = goose(T0, 4, 9, 0);
    CHECK(g_rule(RuleId::GR2, goose(T0 + 100, 5, 0, 1), {prev}) == Outcome::Compliant);
    CHECK(g_rule(RuleId::GR2, goose(T0 + 100, 5, 3, 1), {prev}) == Outcome::Anomalous);
    CHECK(g_rule(RuleId::GR2, goose(T0 + 100, 4, 10, 0), {prev}) == Outcome::NotApplicable);
}

TEST_CASE("GR#3 stnum regression against the historical max") {
    CHECK(g_rule(RuleId::GR3, goose(T0 + 2, 3, 0, 1), {goose(T0, 5, 0), goose(T0 + 1, 5, 1)}) ==
          Outcome::Anomalous);
    CHECK(g_rule(RuleId::GR3, goose(T0 + 2, 5, 2), {goose(T0, 5, 0), goose(T0 + 1, 5, 1)}) == Outcome::Compliant);
    // back at the max after a replayed run is fine
    CHECK(g_rule(RuleId::GR3, goose(T0 + 3, 5, 3), {goose(T0, 5, 0), goose(T0 + 1, 4, 1)}) == Outcome::Compliant);
    CHECK(g_rule(RuleId::GR3, goose(T0, 1, 0), {}) == Outcome::NotApplicable);
}

TEST_CASE("GR#4 publisher identity") {
    GooseMessage cur = goose(T0 + 10, 1, 1);
    CHECK(g_rule(RuleId::GR4, cur, {goose(T0, 1, 0)}) == Outcome::Compliant);
    cur.dataset = "LD0/LLN0$DS2";
    CHECK(g_rule(RuleId::GR4, cur, {goose(T0, 1, 0)}) == Outcome::Anomalous);
    cur = goose(T0 + 10, 1, 1);
    cur.goid = "GO9";
    CHECK(g_rule(RuleId::GR4, cur, {goose(T0, 1, 0)}) == Outcome::Anomalous);
    cur = goose(T0 + 10, 1, 1);
    cur.ethertype = 0x88B9;
    CHECK(g_rule(RuleId::GR4, cur, {goose(T0, 1, 0)}) == Outcome::Anomalous);
}

TEST_CASE("GR#4 through the engine: a moved publisher opens a conflicting stream") {
    std::vector<Message> ms{goose(T0, 1, 0), goose(T0 + 1000, 1, 1)};
    GooseMessage moved = goose(T0 + 2000, 1, 2);
    moved.sm = parse_mac("00:00:00:00:00:66", MacRole::Source);
    ms.emplace_back(moved);
    GooseMessage other = goose(T0 + 3000, 1, 0);
    other.appid = 9;
    other.goid = "GO-other";
    ms.emplace_back(other);
    for (size_t i = 0; i < ms.size(); ++i) set_seq_index(ms[i], i);
    const auto v = evaluate_stream(ms, {Level::FT}, {});
    CHECK_FALSE(v[0].anomalous);
    CHECK_FALSE(v[1].anomalous);
    CHECK(v[2].anomalous);
    CHECK(v[2].per_rule[3].outcome == Outcome::Anomalous);
    CHECK(v[3].per_rule[3].outcome == Outcome::NotApplicable);
}

TEST_CASE("GR#5 / SR#5 time format") {
    GooseMessage g = goose(T0, 1, 0);
    CHECK(g_rule(RuleId::GR5, g, {}) == Outcome::Compliant);
    g.time = Timestamp::from_micros(T0, 3);
    CHECK(g_rule(RuleId::GR5, g, {}) == Outcome::Anomalous);
    SvMessage s = sv(T0, 0);
    CHECK(s_rule(RuleId::SR5, s, {}) == Outcome::Compliant);
    s.time = parse_timestamp("10:00:00.000000");
    CHECK(s_rule(RuleId::SR5, s, {}) == Outcome::Anomalous);
}

TEST_CASE("GR#6 flood window") {
    std::vector<Message> ms;
    for (int i = 0; i < 10; ++i) ms.emplace_back(goose(T0 + i, 1, static_cast<uint64_t>(i)));
    for (size_t i = 0; i < ms.size(); ++i) set_seq_index(ms[i], i);
    auto v = evaluate_stream(ms, {Level::FT}, {});
    for (int i = 0; i < 9; ++i) CHECK(v[static_cast<size_t>(i)].per_rule[5].outcome == Outcome::NotApplicable);
    CHECK(v[9].per_rule[5].outcome == Outcome::Anomalous);

    // one wide gap inside the window clears it
    ms[5] = goose(T0 + 100, 1, 5);
    for (int i = 6; i < 10; ++i) ms[static_cast<size_t>(i)] = goose(T0 + 100 + i, 1, static_cast<uint64_t>(i));
    v = evaluate_stream(ms, {Level::FT}, {});
    CHECK(v[9].per_rule[5].outcome == Outcome::Compliant);
}

TEST_CASE("GR#7 heartbeat gap") {
    CHECK(g_rule(RuleId::GR7, goose(T0 + 11'000'000, 1, 1), {goose(T0, 1, 0)}) == Outcome::Anomalous);
    CHECK(g_rule(RuleId::GR7, goose(T0 + 10'000'000, 1, 1), {goose(T0, 1, 0)}) == Outcome::Compliant);
}

TEST_CASE("GR#8 data change disguised as retransmission") {
    const Message prev = goose(T0, 4, 2, 0);
    CHECK(g_rule(RuleId::GR8, goose(T0 + 5, 4, 3, 1), {prev}) == Outcome::Anomalous);
    CHECK(g_rule(RuleId::GR8, goose(T0 + 5, 5, 0, 1), {prev}) == Outcome::Compliant);
    CHECK(g_rule(RuleId::GR8, goose(T0 + 5, 4, 3, 0), {prev}) == Outcome::NotApplicable);
}

TEST_CASE("SR#1 range by frequency") {
    CHECK(s_rule(RuleId::SR1, sv(T0, 4800), {}) == Outcome::Anomalous);
    CHECK(s_rule(RuleId::SR1, sv(T0, 4799), {}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR1, sv(T0, 4000), {}, SystemFrequency::from_hz(50)) == Outcome::Anomalous);
    CHECK(s_rule(RuleId::SR1, sv(T0, 3999), {}, SystemFrequency::from_hz(50)) == Outcome::Compliant);
}

TEST_CASE("SR#2 / SR#3 / SR#8 counter progression") {
    CHECK(s_rule(RuleId::SR2, sv(T0 + 208, 0), {sv(T0, 4799)}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR3, sv(T0 + 208, 0), {sv(T0, 4799)}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR8, sv(T0 + 208, 0), {sv(T0, 4799)}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR8, sv(T0 + 208, 12), {sv(T0, 10)}) == Outcome::Anomalous);
    CHECK(s_rule(RuleId::SR2, sv(T0 + 208, 12), {sv(T0, 10)}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR2, sv(T0 + 208, 10), {sv(T0, 10)}) == Outcome::Anomalous);
    CHECK(s_rule(RuleId::SR3, sv(T0 + 208, 10), {sv(T0, 10)}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR3, sv(T0 + 208, 9), {sv(T0, 10)}) == Outcome::Anomalous);
    CHECK(s_rule(RuleId::SR2, sv(T0 + 208, 1), {sv(T0, 4799)}) == Outcome::Anomalous);
}

TEST_CASE("SR#4 identity") {
    SvMessage cur = sv(T0 + 208, 1);
    cur.svid = "MU99";
    CHECK(s_rule(RuleId::SR4, cur, {sv(T0, 0)}) == Outcome::Anomalous);
    CHECK(s_rule(RuleId::SR4, sv(T0 + 208, 1), {sv(T0, 0)}) == Outcome::Compliant);
}

TEST_CASE("SR#6 interval bounds") {
    CHECK(s_rule(RuleId::SR6, sv(T0 + 210, 1), {sv(T0, 0)}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR6, sv(T0 + 199, 1), {sv(T0, 0)}) == Outcome::Anomalous);
    CHECK(s_rule(RuleId::SR6, sv(T0 + 200, 1), {sv(T0, 0)}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR6, sv(T0 + 215, 1), {sv(T0, 0)}) == Outcome::Compliant);
    CHECK(s_rule(RuleId::SR6, sv(T0 + 216, 1), {sv(T0, 0)}) == Outcome::Anomalous);
}

TEST_CASE("SR#7 flood window") {
    std::vector<Message> ms;
    for (int i = 0; i < 12; ++i) ms.emplace_back(sv(T0 + i * 180, static_cast<uint64_t>(i)));
    for (size_t i = 0; i < ms.size(); ++i) set_seq_index(ms[i], i);
    auto v = evaluate_stream(ms, {Level::FT}, {});
    CHECK(v[10].per_rule[6].outcome == Outcome::NotApplicable);
    CHECK(v[11].per_rule[6].outcome == Outcome::Anomalous);  // 1980 us span

    ms.clear();
    for (int i = 0; i < 12; ++i) ms.emplace_back(sv(T0 + i * 208, static_cast<uint64_t>(i)));
    v = evaluate_stream(ms, {Level::FT}, {});
    CHECK(v[11].per_rule[6].outcome == Outcome::Compliant);  // 2288 us span
}

TEST_CASE("rule family mismatch raises UsageError") {
    CHECK_THROWS_AS(eval_goose_rule(RuleId::SR1, goose(T0, 1, 0), {}), UsageError);
    CHECK_THROWS_AS(eval_sv_rule(RuleId::GR1, sv(T0, 0), {}, {}), UsageError);
}

TEST_CASE("training levels") {
    CHECK(TrainingLevel{Level::WT}.enabled_rules(Protocol::Goose).empty());
    CHECK(TrainingLevel{Level::PT}.enabled_rules(Protocol::Sv).size() == 5);
    CHECK(TrainingLevel{Level::FT}.enabled_rules(Protocol::Goose).size() == 8);
    CHECK_FALSE(TrainingLevel{Level::PT}.enables(RuleId::GR7));
    CHECK(SystemFrequency::from_hz(50).smpcnt_max() == 3999);
    CHECK(SystemFrequency{}.smpcnt_max() == 4799);
}

TEST_CASE("WT flags nothing, PT misses a GR#7-only violation that FT catches") {
    std::vector<Message> ms{goose(T0, 1, 0), goose(T0 + 11'000'000, 1, 1)};
    set_seq_index(ms[1], 1);
    for (const auto& v : evaluate_stream(ms, {Level::WT}, {})) {
        CHECK(v.per_rule.empty());
        CHECK_FALSE(v.anomalous);
    }
    CHECK_FALSE(evaluate_stream(ms, {Level::PT}, {})[1].anomalous);
    CHECK(evaluate_stream(ms, {Level::FT}, {})[1].anomalous);
}

TEST_CASE("single packet: only format and range rules apply") {
    std::vector<Message> g{goose(T0, 1, 0)};
    const auto vg = evaluate_stream(g, {Level::FT}, {});
    for (const auto& rv : vg[0].per_rule) {
        if (rv.rule_id == RuleId::GR5) CHECK(rv.outcome == Outcome::Compliant);
        else CHECK(rv.outcome == Outcome::NotApplicable);
    }
    std::vector<Message> s{sv(T0, 0)};
    const auto vs = evaluate_stream(s, {Level::FT}, {});
    for (const auto& rv : vs[0].per_rule) {
        if (rv.rule_id == RuleId::SR1 || rv.rule_id == RuleId::SR5) CHECK(rv.outcome == Outcome::Compliant);
        else CHECK(rv.outcome == Outcome::NotApplicable);
    }
}

TEST_CASE("engine matches the brute-force oracle") {
    testing::CorpusGen gen(11);
    CHECK(oracle_evaluate({}, {Level::FT}, {}).empty());
    for (int k = 0; k < 200; ++k) {
        const auto ms = gen.mixed(gen.uniform(1, 200));
        for (Level l : {Level::WT, Level::PT, Level::FT}) {
            const auto freq = k % 2 ? SystemFrequency::from_hz(50) : SystemFrequency{};
            REQUIRE(evaluate_stream(ms, {l}, freq) == oracle_evaluate(ms, {l}, freq));
        }
    }
}

TEST_CASE("StreamState bookkeeping") {
    StreamState st;
    for (int i = 0; i < 20; ++i) st.update(goose(T0 + i, static_cast<uint64_t>(i % 7), 0));
    CHECK(st.max_stnum_seen == 6);
    CHECK(st.recent_times.size() == 12);
    CHECK(st.recent_times.at_age(0) == T0 + 19);
    CHECK(st.recent_times.at_age(11) == T0 + 8);
    CHECK(st.first_seen->micros_since_midnight == T0);
}

TEST_CASE("window rules are translation invariant") {
    testing::CorpusGen gen(5);
    for (int k = 0; k < 50; ++k) {
        auto ms = gen.mixed(150);
        const auto base = evaluate_stream(ms, {Level::FT}, {});
        for (auto& m : ms) {
            std::visit(
                [](auto& x) {
                    x.time = Timestamp::from_micros(x.time.micros_since_midnight + 1'234'567, x.time.fractional_digits);
                },
                m);
        }
        CHECK(evaluate_stream(ms, {Level::FT}, {}) == base);
    }
}

TEST_CASE("polarity manifest lists every rule") {
    const std::string j = rule_manifest_json();
    for (const auto& s : rule_specs()) CHECK(j.find(std::string(rule_name(s.rule_id))) != std::string::npos);
    CHECK(rule_spec(RuleId::GR6).polarity == Polarity::PredicateTrueMeansAnomalous);
    CHECK(rule_spec(RuleId::SR7).polarity == Polarity::PredicateTrueMeansAnomalous);
    CHECK(rule_spec(RuleId::GR8).polarity == Polarity::PredicateTrueMeansAnomalous);
    CHECK(rule_spec(RuleId::SR7).window == 12);
    CHECK(rule_spec(RuleId::GR6).window == 10);
}
