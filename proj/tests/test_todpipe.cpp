#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "mcguard/error.hpp"
#include "mcguard/scenario.hpp"
#include "mcguard/todpipe.hpp"

using namespace mcguard;
using namespace mcguard::tod;

namespace {

std::vector<Message> messages(const std::vector<LabeledRecord>& rs) {
    std::vector<Message> out;
    for (const auto& r : rs) out.push_back(r.message);
    return out;
}

std::vector<uint64_t> labeled(const std::vector<LabeledRecord>& rs) {
    std::vector<uint64_t> out;
    for (const auto& r : rs)
        if (r.label == Label::Anomalous) out.push_back(seq_index_of(r.message));
    return out;
}

std::set<uint64_t> flagged(const std::vector<Message>& ms, Level level) {
    std::set<uint64_t> out;
    for (const auto& v : evaluate_stream(ms, {level}, {}))
        if (v.anomalous) out.insert(v.seq_index);
    return out;
}

std::vector<LabeledRecord> scenario(Protocol p, std::vector<InjectionSpec> inj, uint64_t seed = 7) {
    ScenarioSpec s;
    s.protocol = p;
    s.seed = seed;
    s.streams = 2;
    if (p == Protocol::Goose) {
        s.duration = 120;
        s.goose.state_change_probability = 0.15;
    } else {
        s.duration = 0.5;
    }
    s.injections = std::move(inj);
    return generate(s);
}

InjectionSpec inject(AttackKind a, double at) {
    InjectionSpec i;
    i.attack = a;
    i.at = at;
    return i;
}

SessionTranscript oracle_session(const std::vector<Message>& ms, Level level) {
    RuleOracleBackend oracle;
    SessionOptions o;
    o.level = level;
    return run_session(ms, o, oracle);
}

bool has_action(const SessionTranscript& t, ActionKind k) {
    for (const auto& r : t.turns)
        for (const auto& a : r.actions)
            if (a.kind == k) return true;
    return false;
}

}  // namespace

TEST_CASE("FT session confirms exactly the labeled flood packets") {
    const auto rs = scenario(Protocol::Goose, {inject(AttackKind::Flood, 30)});
    const auto t = oracle_session(messages(rs), Level::FT);
    REQUIRE(!labeled(rs).empty());
    CHECK(t.predicted_anomalies() == labeled(rs));
    CHECK(t.final_belief.confirmed_packets() == labeled(rs));
    CHECK(has_action(t, ActionKind::EmitReport));
    CHECK(!has_action(t, ActionKind::ProposeRuleEnablement));
    CHECK(!t.aborted);
}

TEST_CASE("FT session matches labels for every attack") {
    for (Protocol p : {Protocol::Goose, Protocol::Sv}) {
        for (AttackKind a : kAllAttacks) {
            if (!attack_applies(a, p)) continue;
            auto i = inject(a, p == Protocol::Goose ? 40 : 0.2);
            if (a == AttackKind::FieldTamper) i.field = p == Protocol::Goose ? "goid" : "svid";
            const auto rs = scenario(p, {i});
            INFO(to_string(p), " ", to_string(a));
            CHECK(oracle_session(messages(rs), Level::FT).predicted_anomalies() == labeled(rs));
        }
    }
}

TEST_CASE("PT session proposes the disabled rules for a GR#7-only attack") {
    const auto rs = scenario(Protocol::Goose, {inject(AttackKind::Suppression, 30)});
    const auto t = oracle_session(messages(rs), Level::PT);
    CHECK(!labeled(rs).empty());
    CHECK(t.predicted_anomalies().empty());
    bool proposed = false;
    for (const auto& r : t.turns)
        for (const auto& a : r.actions)
            if (a.kind == ActionKind::ProposeRuleEnablement) {
                CHECK(a.rules == std::vector<RuleId>{RuleId::GR6, RuleId::GR7, RuleId::GR8});
                proposed = true;
            }
    CHECK(proposed);
}

TEST_CASE("WT session confirms nothing and says so") {
    const auto rs = scenario(Protocol::Sv, {inject(AttackKind::SmpcntJump, 0.2)});
    const auto t = oracle_session(messages(rs), Level::WT);
    CHECK(t.predicted_anomalies().empty());
    CHECK(t.final_summary.find("no rules enabled") != std::string::npos);
    for (const auto& r : t.turns) CHECK(r.suspects.empty());
}

TEST_CASE("sessions are deterministic") {
    ScenarioSpec s;
    s.protocol = Protocol::Goose;
    s.duration = 300;
    s.streams = 3;
    s.seed = 11;
    s.anomaly_rate = 0.05;
    const auto ms = messages(generate(s));
    for (Level l : {Level::WT, Level::PT, Level::FT}) {
        const auto first = to_jsonl(oracle_session(ms, l));
        for (int i = 0; i < 4; ++i) CHECK(to_jsonl(oracle_session(ms, l)) == first);
    }
}

TEST_CASE("confirmed packets are flagged by the engine and PT is a subset of FT") {
    for (Protocol p : {Protocol::Goose, Protocol::Sv}) {
        ScenarioSpec s;
        s.protocol = p;
        s.duration = p == Protocol::Goose ? 300 : 2;
        s.streams = 2;
        s.seed = 5;
        s.anomaly_rate = 0.05;
        const auto ms = messages(generate(s));
        std::set<uint64_t> by_level[3];
        for (Level l : {Level::WT, Level::PT, Level::FT}) {
            const auto predicted = oracle_session(ms, l).predicted_anomalies();
            const auto engine = flagged(ms, l);
            for (uint64_t q : predicted) CHECK(engine.count(q) == 1);
            by_level[static_cast<int>(l)] = {predicted.begin(), predicted.end()};
        }
        const auto& pt = by_level[static_cast<int>(Level::PT)];
        const auto& ft = by_level[static_cast<int>(Level::FT)];
        CHECK(by_level[static_cast<int>(Level::WT)].empty());
        CHECK(std::includes(ft.begin(), ft.end(), pt.begin(), pt.end()));
        CHECK(pt.size() < ft.size());
    }
}

TEST_CASE("context windows reach back over other streams") {
    ScenarioSpec s;
    s.protocol = Protocol::Sv;
    s.duration = 0.05;
    s.streams = 3;
    const auto ms = messages(generate(s));
    const auto starts = context_starts(ms, 4);
    std::map<StreamKey, std::vector<size_t>> seen;
    for (size_t pos = 0; pos < ms.size(); ++pos) {
        auto& mine = seen[stream_key_of(ms[pos])];
        CHECK(starts[pos] <= pos);
        CHECK(pos - starts[pos] >= std::min<size_t>(pos, 4));
        if (mine.size() >= 4) CHECK(starts[pos] <= mine[mine.size() - 4]);
        mine.push_back(pos);
    }
}

TEST_CASE("scripted replay reproduces a recorded session") {
    ScenarioSpec s;
    s.protocol = Protocol::Goose;
    s.duration = 200;
    s.streams = 2;
    s.seed = 3;
    s.anomaly_rate = 0.05;
    const auto ms = messages(generate(s));
    const auto recorded = oracle_session(ms, Level::FT);

    const auto dir = std::filesystem::temp_directory_path() / "mcguard_test_tod";
    std::filesystem::create_directories(dir);
    const auto file = dir / "recorded.jsonl";
    std::ofstream(file) << to_jsonl(recorded);

    const auto read = read_transcript_actions(file);
    CHECK(read.confirmed == recorded.final_belief.confirmed_packets());
    CHECK(read.predicted_anomalies() == recorded.predicted_anomalies());

    auto scripted = ScriptedBackend::from_file(file);
    SessionOptions o;
    o.level = Level::FT;
    const auto replay = run_session(ms, o, scripted);
    REQUIRE(replay.turns.size() == recorded.turns.size());
    for (size_t i = 0; i < replay.turns.size(); ++i) CHECK(replay.turns[i].actions == recorded.turns[i].actions);
    CHECK(replay.predicted_anomalies() == recorded.predicted_anomalies());
}

TEST_CASE("backend failures abort with the partial transcript") {
    const auto ms = messages(scenario(Protocol::Goose, {}));
    std::map<uint64_t, std::vector<Action>> script;
    script[1] = {Action::more(100)};
    script[2] = {Action::more(100)};
    ScriptedBackend backend(script);
    std::vector<std::string> lines, audit;
    SessionOptions o;
    o.turn_batch = 50;
    try {
        run_session(ms, o, backend, [&](const std::string& l) { lines.push_back(l); },
                    [&](const std::string& l) { audit.push_back(l); });
        FAIL("expected SessionAborted");
    } catch (const SessionAborted& e) {
        CHECK(e.partial().aborted);
        CHECK(e.partial().turns.size() == 2);
    }
    REQUIRE(lines.size() == 1 + 2 * 5 + 1);
    CHECK(lines.back().find("\"aborted\":true") != std::string::npos);
    CHECK(audit.back().find("aborted in turn 3") != std::string::npos);

    ScriptedBackend bad({{1, {Action::confirm({999'999'999})}}});
    CHECK_THROWS_AS(run_session(ms, o, bad), SessionAborted);
    ScriptedBackend enabled({{1, {Action::propose({RuleId::GR1})}}});
    CHECK_THROWS_AS(run_session(ms, o, enabled), SessionAborted);
}

TEST_CASE("remote chat replies are validated") {
    BeliefState belief;
    ValidationOutcome validation;
    const TurnContext ctx{1, Level::PT, Protocol::Goose, 100, belief, validation, {}, {RuleId::GR1, RuleId::GR2},
                          {RuleId::GR6}};
    const auto ok = RemoteChatBackend::parse_reply(
        R"({"actions":[{"kind":"ConfirmAnomaly","seq_indices":[3,4]},{"kind":"ProposeRuleEnablement","rules":["GR#6"]},{"kind":"EmitReport"}]})",
        ctx);
    REQUIRE(ok.size() == 3);
    CHECK(ok[0] == Action::confirm({3, 4}));
    CHECK(ok[1] == Action::propose({RuleId::GR6}));
    CHECK_THROWS_AS(RemoteChatBackend::parse_reply("hello", ctx), BackendProtocolError);
    CHECK_THROWS_AS(RemoteChatBackend::parse_reply(R"({"act":[]})", ctx), BackendProtocolError);
    CHECK_THROWS_AS(RemoteChatBackend::parse_reply(R"({"actions":[{"kind":"Dance"}]})", ctx), BackendProtocolError);
    CHECK_THROWS_AS(RemoteChatBackend::parse_reply(R"({"actions":[{"kind":"ConfirmAnomaly"}]})", ctx),
                    BackendProtocolError);
    CHECK_THROWS_AS(
        RemoteChatBackend::parse_reply(R"({"actions":[{"kind":"ProposeRuleEnablement","rules":["GR#2"]}]})", ctx),
        BackendProtocolError);
    CHECK_THROWS_AS(
        RemoteChatBackend::parse_reply(R"({"actions":[{"kind":"ProposeRuleEnablement","rules":["XR#2"]}]})", ctx),
        BackendProtocolError);
    CHECK(RemoteChatBackend::build_prompt(ctx).find("GR#1, GR#2") != std::string::npos);
    CHECK_THROWS_AS(RemoteChatBackend("ftp://x", ""), ConfigError);
}

TEST_CASE("unreachable chat endpoint aborts without retry") {
    const auto ms = messages(scenario(Protocol::Goose, {}));
    std::vector<std::string> audit;
    RemoteChatBackend chat("http://127.0.0.1:9/chat", "k", [&](const std::string& l) { audit.push_back(l); });
    CHECK_THROWS_AS(run_session(ms, {}, chat, {}, [&](const std::string& l) { audit.push_back(l); }), SessionAborted);
    size_t requests = 0;
    for (const auto& l : audit) requests += l.rfind("remote-chat request", 0) == 0;
    CHECK(requests == 1);
}
