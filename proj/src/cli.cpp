#include "mcguard/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcguard/capture.hpp"
#include "mcguard/error.hpp"
#include "mcguard/evalmetrics.hpp"
#include "mcguard/filterql.hpp"
#include "mcguard/todpipe.hpp"

namespace mcguard::cli {

namespace fs = std::filesystem;

size_t RunConfig::input_sources() const {
    const size_t n = !input.empty() + !spec.empty() + scenario.has_value();
    if (n > 1) throw UsageError("give exactly one input source: --input, --spec or a [scenario] table");
    return n;
}

void apply_config(const ConfigTable& t, RunConfig& c, const std::vector<std::string>& given) {
    t.check_keys({"protocol", "level", "frequency", "backend", "script", "input", "spec", "labels", "output_dir",
                  "seed", "turn_batch", "context_window", "query", "method", "scenario"});
    auto skip = [&](std::string flag) { return std::find(given.begin(), given.end(), flag) != given.end(); };
    auto str = [&](const char* key, const char* flag, std::string& dst) {
        if (skip(flag)) return;
        if (auto v = t.get_string(key)) dst = *v;
    };
    auto count = [&](const char* key, const char* flag, size_t& dst) {
        if (skip(flag)) return;
        if (auto v = t.get_int(key)) {
            if (*v <= 0) throw ConfigError(std::string(key) + " must be positive");
            dst = static_cast<size_t>(*v);
        }
    };
    str("protocol", "protocol", c.protocol);
    str("backend", "backend", c.backend);
    str("script", "script", c.script);
    str("input", "input", c.input);
    str("spec", "spec", c.spec);
    str("labels", "labels", c.labels);
    str("output_dir", "out", c.output_dir);
    str("query", "query", c.query);
    str("method", "method", c.method);
    count("turn_batch", "turn-batch", c.turn_batch);
    count("context_window", "context-window", c.context_window);
    if (!skip("level"))
        if (auto v = t.get_string("level")) c.level = parse_level(*v);
    if (!skip("frequency"))
        if (auto v = t.get_int("frequency")) c.frequency = static_cast<int>(*v);
    if (!skip("seed"))
        if (auto v = t.get_int("seed")) {
            if (*v < 0) throw ConfigError("seed must not be negative");
            c.seed = static_cast<uint64_t>(*v);
        }
    if (const auto* s = t.table("scenario")) c.scenario = scenario_from_config(*s);
}

namespace {

struct Flags {
    RunConfig c;
    std::string config;
    std::string level;
    uint64_t seed = 0;
    std::vector<std::string> from;
    std::string verdicts;
    std::string transcript;
    std::string source;
    bool with_fixtures = false;
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
}

std::string normalized(std::string s) {
    s = lower(std::move(s));
    s.erase(std::remove_if(s.begin(), s.end(), [](char ch) { return ch == '-' || ch == '_'; }), s.end());
    return s;
}

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw UsageError("output directory " + dir.string() + " is not writable");
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw UsageError("cannot write " + path.string());
    return f;
}

std::vector<Message> read_input(const RunConfig& c, std::ostream& err) {
    CaptureSource s;
    s.path = c.input;
    const auto ext = lower(s.path.extension().string());
    s.kind = ext == ".pcap" || ext == ".pcapng" || ext == ".cap" ? CaptureKind::PcapFile : CaptureKind::CsvFile;
    s.protocol_hint = parse_protocol_hint(c.protocol);
    if (!fs::exists(s.path)) throw UsageError("input " + c.input + " does not exist");
    std::vector<RowError> errors;
    auto messages = read_capture(s, {}, nullptr, &errors);
    constexpr size_t kShown = 20;
    for (size_t i = 0; i < std::min(errors.size(), kShown); ++i)
        err << "warning: " << c.input << ":" << errors[i].line << ": skipped: " << errors[i].message << "\n";
    if (errors.size() > kShown) err << "warning: " << errors.size() - kShown << " more rows skipped\n";
    return messages;
}

ScenarioSpec scenario_of(const RunConfig& c) {
    ScenarioSpec spec;
    if (!c.spec.empty())
        spec = load_scenario(c.spec);
    else if (c.scenario)
        spec = *c.scenario;
    else
        throw UsageError("a scenario spec is required (--spec or a [scenario] table in --config)");
    if (c.seed) spec.seed = *c.seed;
    return spec;
}

std::string stem_of(const RunConfig& c, const ScenarioSpec& spec) {
    return c.spec.empty() ? spec.name : fs::path(c.spec).stem().string();
}

std::vector<LabelRow> label_rows(const std::vector<LabeledRecord>& records) {
    std::vector<LabelRow> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({seq_index_of(r.message), r.label, r.attack_tag.value_or("")});
    return out;
}

std::string stream_protocol(const std::vector<Message>& ms) {
    if (ms.empty()) return "none";
    const Protocol p = protocol_of(ms.front());
    for (const auto& m : ms)
        if (protocol_of(m) != p) return "mixed";
    return std::string(to_string(p));
}

Protocol resolve_protocol(const std::string& flag, const std::string& recorded) {
    const std::string text = flag != "auto" ? flag : recorded;
    if (text != "goose" && text != "sv" && text != "GOOSE" && text != "SV")
        throw UsageError("cannot tell the protocol of this run (" + recorded + "); pass --protocol goose|sv");
    return parse_protocol(text);
}

// ---------------------------------------------------------------------------

int cmd_generate(const RunConfig& c, std::ostream& out) {
    const auto spec = scenario_of(c);
    const auto records = generate(spec);
    prepare_dir(c.output_dir);
    const auto files = export_dataset(records, c.output_dir, stem_of(c, spec));
    out << "generated " << records.size() << " " << to_string(spec.protocol) << " packets (seed " << spec.seed
        << ")\n";
    for (const auto& [tag, n] : summarize(records)) out << "  " << tag << ": " << n << "\n";
    out << "wrote " << files.csv.string() << ", " << files.pcap.string() << ", " << files.labels.string() << "\n";
    return kExitClean;
}

int cmd_detect(const RunConfig& c, std::ostream& out, std::ostream& err) {
    if (c.input.empty()) throw UsageError("detect needs --input");
    const auto messages = read_input(c, err);
    const auto freq = SystemFrequency::from_hz(c.frequency);
    prepare_dir(c.output_dir);

    if (!c.query.empty()) {
        const auto q = filterql::parse_query(c.query);
        const auto r = filterql::run_query(q, messages);
        out << "count: " << r.count << "\n";
        if (q.projection == filterql::Projection::Rows) {
            auto f = open_out(fs::path(c.output_dir) / "query_rows.txt");
            for (uint64_t s : r.rows) f << s << "\n";
            out << "rows written to " << (fs::path(c.output_dir) / "query_rows.txt").string() << "\n";
        }
        return kExitClean;
    }

    const auto verdicts = evaluate_stream(messages, {c.level}, freq);
    nlohmann::ordered_json header;
    header["schema_version"] = kOutputSchemaVersion;
    header["record"] = "detect";
    header["protocol"] = stream_protocol(messages);
    header["level"] = to_string(c.level);
    header["frequency_hz"] = c.frequency;
    header["input"] = c.input;

    std::map<RuleId, uint64_t> per_rule;
    uint64_t anomalous = 0;
    std::string buf = header.dump() + "\n";
    buf.reserve(verdicts.size() * 160);
    for (const auto& v : verdicts) {
        buf += R"({"schema_version":1,"record":"verdict","seq_index":)";
        buf += std::to_string(v.seq_index);
        buf += v.anomalous ? R"(,"anomalous":true,"rules":{)" : R"(,"anomalous":false,"rules":{)";
        bool first = true;
        for (const auto& rv : v.per_rule) {
            if (!first) buf += ',';
            first = false;
            buf += '"';
            buf += rule_name(rv.rule_id);
            buf += "\":\"";
            buf += to_string(rv.outcome);
            buf += '"';
            if (rv.outcome == Outcome::Anomalous) ++per_rule[rv.rule_id];
        }
        buf += "}}\n";
        anomalous += v.anomalous;
    }
    open_out(fs::path(c.output_dir) / "verdicts.jsonl") << buf;

    nlohmann::ordered_json summary = header;
    summary["record"] = "detect_summary";
    summary["packets"] = verdicts.size();
    summary["anomalous_packets"] = anomalous;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [r, n] : per_rule) counts[std::string(rule_name(r))] = n;
    summary["anomalous_by_rule"] = counts;
    open_out(fs::path(c.output_dir) / "summary.json") << summary.dump(2) << "\n";

    out << verdicts.size() << " packets, " << anomalous << " anomalous at " << to_string(c.level) << "\n";
    for (const auto& [r, n] : per_rule) out << "  " << rule_name(r) << ": " << n << "\n";
    return anomalous ? kExitAnomalies : kExitClean;
}

std::unique_ptr<tod::AnalystBackend> make_backend(const RunConfig& c, const tod::AuditSink& audit) {
    const auto name = normalized(c.backend);
    if (name == "ruleoracle") return std::make_unique<tod::RuleOracleBackend>();
    if (name == "scripted" || name == "scriptedtranscript") {
        if (c.script.empty()) throw UsageError("the scripted backend needs --script");
        return std::make_unique<tod::ScriptedBackend>(tod::ScriptedBackend::from_file(c.script));
    }
    if (name == "remotechat") return std::make_unique<tod::RemoteChatBackend>(tod::RemoteChatBackend::from_env(audit));
    throw UsageError("unknown backend '" + c.backend + "' (rule-oracle, scripted, remote-chat)");
}

Method default_method(const RunConfig& c, const std::string& backend) {
    if (!c.method.empty()) return parse_method(c.method);
    return normalized(backend).rfind("scripted", 0) == 0 ? Method::HITL : Method::ToD;
}

void print_cell(const ReportCell& cell, std::ostream& out) {
    const auto& cm = *cell.confusion;
    out << "tp " << cm.tp << ", fp " << cm.fp << ", tn " << cm.tn << ", fn " << cm.fn << "\n";
    out << "informedness " << cell.text[0] << ", markedness " << cell.text[1] << ", mcc " << cell.text[2] << ", gm "
        << cell.text[3] << "\n";
}

int cmd_session(const RunConfig& c, std::ostream& out, std::ostream& err) {
    if (c.input_sources() == 0) throw UsageError("session needs --input, --spec or a [scenario] table");
    prepare_dir(c.output_dir);
    const fs::path dir = c.output_dir;

    std::vector<Message> messages;
    std::vector<LabelRow> labels;
    std::string source;
    if (!c.input.empty()) {
        messages = read_input(c, err);
        source = fs::path(c.input).stem().string();
    } else {
        const auto spec = scenario_of(c);
        const auto records = generate(spec);
        for (const auto& r : records) messages.push_back(r.message);
        labels = label_rows(records);
        export_labels(records, dir / "labels.csv");
        source = stem_of(c, spec);
    }
    if (!c.labels.empty()) labels = read_labels(c.labels);

    auto transcript = open_out(dir / "transcript.jsonl");
    auto audit_file = open_out(dir / "audit.log");
    const tod::AuditSink audit = [&](const std::string& line) { audit_file << line << "\n" << std::flush; };
    const tod::TranscriptSink sink = [&](const std::string& line) { transcript << line << "\n" << std::flush; };

    auto backend = make_backend(c, audit);
    tod::SessionOptions options;
    options.level = c.level;
    options.freq = SystemFrequency::from_hz(c.frequency);
    options.turn_batch = c.turn_batch;
    options.context_window = c.context_window;

    tod::SessionTranscript t;
    try {
        t = tod::run_session(messages, options, *backend, sink, audit);
    } catch (const tod::SessionAborted& e) {
        open_out(dir / "summary.txt") << e.partial().final_summary << "\n";
        err << "error: " << e.what() << " (partial transcript in " << (dir / "transcript.jsonl").string() << ")\n";
        return kExitError;
    }
    open_out(dir / "summary.txt") << t.final_summary << "\n";
    out << t.final_summary << "\n";
    for (const auto& r : t.turns)
        for (const auto& a : r.actions)
            if (a.kind == tod::ActionKind::ProposeRuleEnablement) {
                std::string rules;
                for (RuleId id : a.rules) rules += (rules.empty() ? "" : ", ") + std::string(rule_name(id));
                out << "turn " << r.turn << ": propose enabling " << rules << "\n";
            }

    if (!labels.empty()) {
        const auto cm = confusion(t.predicted_anomalies(), labels);
        const auto cell = computed_cell(t.protocol, default_method(c, t.backend), c.level, cm, source);
        write_report(build_report({cell}), dir);
        print_cell(cell, out);
    }
    return kExitClean;
}

struct Recorded {
    std::string protocol = "none";
    std::optional<Level> level;
    std::string backend;
};

std::vector<PacketVerdict> read_verdicts(const fs::path& path, Recorded& rec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read verdicts " + path.string());
    std::vector<PacketVerdict> out;
    std::string line;
    uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        try {
            const auto j = nlohmann::json::parse(line);
            if (j.at("schema_version").get<int>() != kOutputSchemaVersion)
                throw SchemaError(where + "unsupported schema_version");
            const auto record = j.at("record").get<std::string>();
            if (record == "detect") {
                rec.protocol = j.at("protocol").get<std::string>();
                rec.level = parse_level(j.at("level").get<std::string>());
            } else if (record == "verdict") {
                PacketVerdict v;
                v.seq_index = j.at("seq_index").get<uint64_t>();
                v.anomalous = j.at("anomalous").get<bool>();
                out.push_back(std::move(v));
            }
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(where + e.what());
        }
    }
    return out;
}

Recorded read_transcript_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    if (!in || !std::getline(in, line)) throw SchemaError(path.string() + ": empty transcript");
    Recorded rec;
    try {
        const auto j = nlohmann::json::parse(line);
        if (j.value("record", "") != "session") throw SchemaError(path.string() + ":1: missing session header");
        rec.protocol = lower(j.at("protocol").get<std::string>());
        rec.level = parse_level(j.at("level").get<std::string>());
        rec.backend = j.value("backend", "");
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ":1: " + e.what());
    }
    return rec;
}

int cmd_eval(const Flags& f, std::ostream& out) {
    const RunConfig& c = f.c;
    std::vector<ReportCell> cells;
    if (!f.verdicts.empty() && !f.transcript.empty()) throw UsageError("give --verdicts or --transcript, not both");
    if (!f.verdicts.empty() || !f.transcript.empty()) {
        if (c.labels.empty()) throw UsageError("eval needs --labels");
        const auto labels = read_labels(c.labels);
        if (labels.empty()) throw UsageError("labels file " + c.labels + " has no rows");
        Recorded rec;
        ConfusionMatrix cm;
        if (!f.verdicts.empty()) {
            const auto verdicts = read_verdicts(f.verdicts, rec);
            cm = confusion(verdicts, labels);
        } else {
            rec = read_transcript_header(f.transcript);
            const auto actions = tod::read_transcript_actions(f.transcript);
            cm = confusion(actions.predicted_anomalies(), labels);
        }
        const Protocol p = resolve_protocol(c.protocol, rec.protocol);
        const Level level = !f.level.empty() ? c.level : rec.level.value_or(c.level);
        const std::string source = !f.source.empty() ? f.source : fs::path(c.labels).stem().stem().string();
        const auto cell = computed_cell(p, default_method(c, rec.backend), level, cm, source);
        print_cell(cell, out);
        cells.push_back(cell);
    } else if (!f.with_fixtures) {
        throw UsageError("nothing to evaluate: give --verdicts or --transcript with --labels, or --with-fixtures");
    }
    if (f.with_fixtures) cells.insert(cells.end(), table_i_fixtures().begin(), table_i_fixtures().end());
    const auto report = build_report(std::move(cells));
    prepare_dir(c.output_dir);
    const auto files = write_report(report, c.output_dir);
    out << render_markdown(report);
    out << "wrote " << files.markdown.string() << ", " << files.csv.string() << ", " << files.json.string() << ", "
        << files.accuracy.string() << "\n";
    return kExitClean;
}

int cmd_report(const Flags& f, std::ostream& out) {
    std::vector<ReportCell> cells;
    for (const auto& from : f.from) {
        std::ifstream in(from, std::ios::binary);
        if (!in) throw UsageError("cannot read report " + from);
        std::ostringstream text;
        text << in.rdbuf();
        for (auto& cell : parse_report_json(text.str()).cells)
            if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(std::move(cell));
    }
    const auto report = build_report(std::move(cells));
    prepare_dir(f.c.output_dir);
    write_report(report, f.c.output_dir);
    out << render_markdown(report);
    return kExitClean;
}

// ---------------------------------------------------------------------------

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "Run config file (flags override its values)");
    sub->add_option("--out", f.c.output_dir, "Output directory")->capture_default_str();
}

void add_level(CLI::App* sub, Flags& f) {
    sub->add_option("--level", f.level, "Training level: WT, PT or FT (default FT)");
    sub->add_option("--frequency", f.c.frequency, "System frequency in Hz: 50 or 60")->capture_default_str();
}

void add_protocol(CLI::App* sub, Flags& f) {
    sub->add_option("--protocol", f.c.protocol, "goose, sv or auto")->capture_default_str();
}

std::vector<std::string> given_flags(const CLI::App* sub) {
    std::vector<std::string> out;
    for (const auto* opt : sub->get_options())
        if (opt->count() > 0) out.push_back(opt->get_single_name());
    return out;
}

void finish(const CLI::App* sub, Flags& f) {
    if (!f.config.empty()) apply_config(load_config(f.config), f.c, given_flags(sub));
    if (!f.level.empty()) f.c.level = parse_level(f.level);
    if (sub->get_option_no_throw("--seed") && sub->get_option("--seed")->count()) f.c.seed = f.seed;
    f.c.input_sources();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"IEC 61850 GOOSE/SV anomaly detection toolkit", "mcguard"};
    app.require_subcommand(1);
    Flags f;

    auto* gen = app.add_subcommand("generate", "Generate a labeled synthetic dataset from a scenario spec");
    gen->add_option("--spec", f.c.spec, "Scenario spec file");
    gen->add_option("--seed", f.seed, "Override the spec's seed");
    add_common(gen, f);

    auto* det = app.add_subcommand("detect", "Evaluate the rule set over a capture");
    det->add_option("--input", f.c.input, "Capture file (.csv, .pcap, .pcapng)");
    det->add_option("--query", f.c.query, "Run a filter query instead of the rule set");
    add_protocol(det, f);
    add_level(det, f);
    add_common(det, f);

    auto* ses = app.add_subcommand("session", "Run a task-oriented dialogue detection session");
    ses->add_option("--input", f.c.input, "Capture file");
    ses->add_option("--spec", f.c.spec, "Scenario spec file (generated in memory, labels kept)");
    ses->add_option("--seed", f.seed, "Override the spec's seed");
    ses->add_option("--labels", f.c.labels, "Label sidecar for scoring");
    ses->add_option("--backend", f.c.backend, "rule-oracle, scripted or remote-chat")->capture_default_str();
    ses->add_option("--script", f.c.script, "Scripted backend: transcript or actions file");
    ses->add_option("--method", f.c.method, "Method label for the report: ToD or HITL");
    ses->add_option("--turn-batch", f.c.turn_batch, "Packets per turn")->capture_default_str();
    ses->add_option("--context-window", f.c.context_window, "Validation context k")->capture_default_str();
    add_protocol(ses, f);
    add_level(ses, f);
    add_common(ses, f);

    auto* ev = app.add_subcommand("eval", "Score verdicts or a transcript against labels");
    ev->add_option("--labels", f.c.labels, "Label sidecar");
    ev->add_option("--verdicts", f.verdicts, "verdicts.jsonl from detect");
    ev->add_option("--transcript", f.transcript, "transcript.jsonl from session");
    ev->add_option("--method", f.c.method, "ToD or HITL (default from the input)");
    ev->add_option("--source", f.source, "Dataset id shown in the report");
    ev->add_flag("--with-fixtures", f.with_fixtures, "Add the published reference cells, marked Fixture");
    add_protocol(ev, f);
    add_level(ev, f);
    add_common(ev, f);

    auto* rep = app.add_subcommand("report", "Merge report.json files into one report");
    rep->add_option("--from", f.from, "report.json to merge (repeatable)")->required();
    add_common(rep, f);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitClean : kExitError;
    }

    try {
        if (gen->parsed()) {
            finish(gen, f);
            return cmd_generate(f.c, out);
        }
        if (det->parsed()) {
            finish(det, f);
            return cmd_detect(f.c, out, err);
        }
        if (ses->parsed()) {
            finish(ses, f);
            return cmd_session(f.c, out, err);
        }
        if (ev->parsed()) {
            finish(ev, f);
            return cmd_eval(f, out);
        }
        finish(rep, f);
        return cmd_report(f, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kExitError;
}

}  // namespace mcguard::cli
