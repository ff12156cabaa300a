#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcguard/cli.hpp"
#include "mcguard/rulekit.hpp"

namespace fs = std::filesystem;
using mcguard::cli::run;

namespace {

const fs::path kFixtures = fs::path(MCGUARD_SOURCE_DIR) / "fixtures";

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("mcguard_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::string fixture(const std::string& name) { return (kFixtures / name).string(); }

}  // namespace

TEST_CASE("generate writes identical datasets on repeated runs") {
    const auto a = scratch("gen_a"), b = scratch("gen_b");
    const auto r1 = cli({"generate", "--spec", fixture("sv60.toml"), "--seed", "7", "--out", a.string()});
    const auto r2 = cli({"generate", "--spec", fixture("sv60.toml"), "--seed", "7", "--out", b.string()});
    REQUIRE(r1.code == 0);
    REQUIRE(r2.code == 0);
    CHECK(r1.out.find("SmpcntJump: 1") != std::string::npos);
    for (const char* f : {"sv60.csv", "sv60.pcap", "sv60.labels.csv"}) {
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const auto other = scratch("gen_c");
    cli({"generate", "--spec", fixture("sv60.toml"), "--seed", "8", "--out", other.string()});
    CHECK(slurp(a / "sv60.csv") != slurp(other / "sv60.csv"));
}

TEST_CASE("generate rejects colliding injections") {
    const auto dir = scratch("collide");
    std::ofstream(dir / "bad.toml") << "protocol = \"goose\"\nduration = 60\n"
                                       "[[injection]]\nattack = \"SqnumSkip\"\nat = 10\n"
                                       "[[injection]]\nattack = \"SqnumSkip\"\nat = 10\n";
    const auto r = cli({"generate", "--spec", (dir / "bad.toml").string(), "--out", dir.string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("detect exit codes and summaries") {
    const auto dir = scratch("detect");
    REQUIRE(cli({"generate", "--spec", fixture("goose_flood.toml"), "--out", dir.string()}).code == 0);
    const auto csv = (dir / "goose_flood.csv").string();

    const auto ft = cli({"detect", "--input", csv, "--level", "FT", "--out", (dir / "ft").string()});
    CHECK(ft.code == 1);
    CHECK(ft.out.find("GR#6: 12") != std::string::npos);
    CHECK(slurp(dir / "ft" / "summary.json").find("\"GR#6\": 12") != std::string::npos);
    const auto v = lines(dir / "ft" / "verdicts.jsonl");
    CHECK(v.size() == 1 + 542);

    CHECK(cli({"detect", "--input", csv, "--level", "WT", "--out", (dir / "wt").string()}).code == 0);
    CHECK(cli({"detect", "--input", (dir / "goose_flood.pcap").string(), "--out", (dir / "p").string()}).code == 1);
    CHECK(cli({"detect", "--input", (dir / "missing.csv").string()}).code == 2);

    const auto q = cli({"detect", "--input", csv, "--query", "SELECT COUNT FROM goose WHERE sqnum > 0", "--out",
                        (dir / "q").string()});
    CHECK(q.code == 0);
    CHECK(q.out.rfind("count: ", 0) == 0);
    CHECK(q.out != "count: 0\n");
    CHECK(cli({"detect", "--input", csv, "--query", "SELECT FROM nowhere"}).code == 2);
}

TEST_CASE("sv query from the command line") {
    const auto dir = scratch("svq");
    REQUIRE(cli({"generate", "--spec", fixture("sv60.toml"), "--out", dir.string()}).code == 0);
    const auto r = cli({"detect", "--input", (dir / "sv60.csv").string(), "--query",
                        "SELECT COUNT FROM sv WHERE smpcnt > 4799", "--out", dir.string()});
    CHECK(r.code == 0);
    CHECK(r.out == "count: 0\n");
}

TEST_CASE("session from a run config, with flag overrides") {
    const auto dir = scratch("session");
    const auto pt = cli({"session", "--config", fixture("run_session_pt.toml"), "--out", (dir / "pt").string()});
    REQUIRE(pt.code == 0);
    const auto transcript = slurp(dir / "pt" / "transcript.jsonl");
    CHECK(transcript.find("ProposeRuleEnablement") != std::string::npos);
    CHECK(transcript.find("\"level\":\"PT\"") != std::string::npos);
    CHECK(fs::exists(dir / "pt" / "audit.log"));
    CHECK(fs::exists(dir / "pt" / "summary.txt"));
    CHECK(fs::exists(dir / "pt" / "report.json"));

    const auto ft = cli({"session", "--config", fixture("run_session_pt.toml"), "--level", "FT", "--out",
                         (dir / "ft").string()});
    REQUIRE(ft.code == 0);
    CHECK(slurp(dir / "ft" / "transcript.jsonl").find("ProposeRuleEnablement") == std::string::npos);
    CHECK(ft.out.find("informedness 1,") != std::string::npos);

    CHECK(cli({"session", "--spec", fixture("goose_flood.toml"), "--input", "x.csv"}).code == 2);
}

TEST_CASE("scripted replay reproduces the recorded transcript") {
    const auto dir = scratch("replay");
    REQUIRE(cli({"session", "--spec", fixture("goose_mixed.toml"), "--out", (dir / "rec").string()}).code == 0);
    const auto rec = dir / "rec" / "transcript.jsonl";
    REQUIRE(cli({"session", "--spec", fixture("goose_mixed.toml"), "--backend", "scripted", "--script",
                 rec.string(), "--out", (dir / "rep").string()})
                .code == 0);
    const auto a = lines(rec), b = lines(dir / "rep" / "transcript.jsonl");
    REQUIRE(a.size() == b.size());
    CHECK(a.front() != b.front());  // backend name differs
    for (size_t i = 1; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("HITL fixture replays with misses and false positives") {
    const auto dir = scratch("hitl");
    const auto r = cli({"session", "--spec", fixture("goose_mixed.toml"), "--backend", "scripted", "--script",
                        fixture("hitl/goose_mixed.script.jsonl"), "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto csv = slurp(dir / "report.csv");
    CHECK(csv.find("goose,HITL,FT,Computed,goose_mixed,") != std::string::npos);
    CHECK(r.out.find("tp 0,") == std::string::npos);
    CHECK(r.out.find("fp 0,") == std::string::npos);
    CHECK(r.out.find("fn 0") == std::string::npos);
}

TEST_CASE("remote chat without an endpoint is a configuration error") {
    unsetenv("MCGUARD_CHAT_ENDPOINT");
    const auto dir = scratch("chat");
    const auto r = cli({"session", "--spec", fixture("goose_flood.toml"), "--backend", "remote-chat", "--out",
                        dir.string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("MCGUARD_CHAT_ENDPOINT") != std::string::npos);
}

TEST_CASE("eval scores verdicts and transcripts and merges fixtures") {
    const auto dir = scratch("eval");
    REQUIRE(cli({"generate", "--spec", fixture("goose_flood.toml"), "--out", dir.string()}).code == 0);
    const auto labels = (dir / "goose_flood.labels.csv").string();
    REQUIRE(cli({"detect", "--input", (dir / "goose_flood.csv").string(), "--out", (dir / "d").string()}).code == 1);

    const auto e = cli({"eval", "--labels", labels, "--verdicts", (dir / "d" / "verdicts.jsonl").string(), "--out",
                        (dir / "e").string()});
    REQUIRE(e.code == 0);
    CHECK(e.out.find("informedness 1, markedness 1, mcc 1, gm 1") != std::string::npos);
    CHECK(slurp(dir / "e" / "report.csv").find("goose,ToD,FT,Computed,goose_flood,1,1,1,1,1.000000,12,0,530,0") !=
          std::string::npos);

    const auto fx = cli({"eval", "--labels", labels, "--verdicts", (dir / "d" / "verdicts.jsonl").string(),
                         "--with-fixtures", "--out", (dir / "f").string()});
    REQUIRE(fx.code == 0);
    const auto csv = slurp(dir / "f" / "report.csv");
    CHECK(csv.find("goose,ToD,FT,Fixture,Table I,0.9492,0.9492,0.9491,0.9746,") != std::string::npos);
    CHECK(fx.out.find("ToD FT [Fixture]") != std::string::npos);

    std::ofstream(dir / "empty.labels.csv") << "";
    CHECK(cli({"eval", "--labels", (dir / "empty.labels.csv").string(), "--verdicts",
               (dir / "d" / "verdicts.jsonl").string(), "--out", (dir / "x").string()})
              .code == 2);
    std::ofstream(dir / "header.labels.csv") << "seq_index,label,attack_tag\n";
    CHECK(cli({"eval", "--labels", (dir / "header.labels.csv").string(), "--verdicts",
               (dir / "d" / "verdicts.jsonl").string(), "--out", (dir / "x").string()})
              .code == 2);

    REQUIRE(cli({"generate", "--spec", fixture("goose_suppression.toml"), "--out", dir.string()}).code == 0);
    CHECK(cli({"eval", "--labels", (dir / "goose_suppression.labels.csv").string(), "--verdicts",
               (dir / "d" / "verdicts.jsonl").string(), "--out", (dir / "x").string()})
              .code == 2);

    REQUIRE(cli({"session", "--spec", fixture("goose_flood.toml"), "--level", "PT", "--out", (dir / "s").string()})
                .code == 0);
    const auto t = cli({"eval", "--labels", labels, "--transcript", (dir / "s" / "transcript.jsonl").string(),
                        "--out", (dir / "t").string()});
    REQUIRE(t.code == 0);
    CHECK(slurp(dir / "t" / "report.csv").find("goose,ToD,PT,Computed,goose_flood,0,") != std::string::npos);

    const auto merged = cli({"report", "--from", (dir / "e" / "report.json").string(), "--from",
                             (dir / "t" / "report.json").string(), "--from", (dir / "f" / "report.json").string(),
                             "--out", (dir / "m").string()});
    REQUIRE(merged.code == 0);
    const auto m = lines(dir / "m" / "report.csv");
    CHECK(m.size() == 1 + 12 + 2);
    CHECK(slurp(dir / "m" / "accuracy_by_level.csv").find("goose,ToD,goose_flood,FT,1.000000,") !=
          std::string::npos);
}

TEST_CASE("generate, detect and eval are hash-stable end to end") {
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
        const auto dir = scratch("e2e_" + std::to_string(i));
        REQUIRE(cli({"generate", "--spec", fixture("goose_mixed.toml"), "--out", dir.string()}).code == 0);
        cli({"detect", "--input", (dir / "goose_mixed.csv").string(), "--out", (dir / "d").string()});
        REQUIRE(cli({"eval", "--labels", (dir / "goose_mixed.labels.csv").string(), "--verdicts",
                     (dir / "d" / "verdicts.jsonl").string(), "--out", (dir / "e").string()})
                    .code == 0);
        reports[i] = slurp(dir / "e" / "report.json");
    }
    CHECK(reports[0] == reports[1]);
}

TEST_CASE("usage errors and help") {
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"session", "--help"}).out.find("--context-window") != std::string::npos);
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"eval"}).code == 2);
    CHECK(cli({"detect", "--input", "a.csv", "--level", "XT"}).code == 2);
    CHECK(cli({"detect", "--input", "a.csv", "--frequency", "55"}).code == 2);
}

TEST_CASE("config keys are checked") {
    const auto dir = scratch("config");
    std::ofstream(dir / "typo.toml") << "levle = \"PT\"\n";
    const auto r = cli({"detect", "--config", (dir / "typo.toml").string(), "--input", "x.csv"});
    CHECK(r.code == 2);
    CHECK(r.err.find("levle") != std::string::npos);

    mcguard::cli::RunConfig c;
    mcguard::ConfigTable t = mcguard::parse_config("level = \"WT\"\nturn_batch = 7\noutput_dir = \"o\"\n");
    mcguard::cli::apply_config(t, c, {"out"});
    CHECK(c.level == mcguard::Level::WT);
    CHECK(c.turn_batch == 7);
    CHECK(c.output_dir == ".");
}

TEST_CASE("the published rule manifest matches the rule table") {
    std::string doc = slurp(fs::path(MCGUARD_SOURCE_DIR) / "docs" / "rule_manifest.json");
    while (!doc.empty() && doc.back() == '\n') doc.pop_back();
    std::string live = mcguard::rule_manifest_json();
    while (!live.empty() && live.back() == '\n') live.pop_back();
    CHECK(doc == live);
}
