#include "mcguard/todpipe.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace mcguard::tod {

using json = nlohmann::ordered_json;

std::string_view to_string(Confidence c) { return c == Confidence::Suspect ? "Suspect" : "Confirmed"; }

namespace {

constexpr std::string_view kActionNames[] = {"ConfirmAnomaly", "RequestMorePackets", "ProposeRuleEnablement",
                                             "EmitReport"};

std::vector<RuleId> protocol_rules(Protocol p) {
    const auto& all = p == Protocol::Goose ? kGooseRules : kSvRules;
    return {all.begin(), all.end()};
}

std::string rule_list(const std::vector<RuleId>& rules) {
    std::string out;
    for (RuleId r : rules) out += (out.empty() ? "" : ", ") + std::string(rule_name(r));
    return out;
}

}  // namespace

std::string_view to_string(ActionKind k) { return kActionNames[static_cast<size_t>(k)]; }

ActionKind parse_action_kind(std::string_view text) {
    for (size_t i = 0; i < std::size(kActionNames); ++i)
        if (kActionNames[i] == text) return static_cast<ActionKind>(i);
    throw BackendProtocolError("unknown action kind '" + std::string(text) + "'");
}

Action Action::confirm(std::vector<uint64_t> seq) {
    Action a;
    a.kind = ActionKind::ConfirmAnomaly;
    a.seq_indices = std::move(seq);
    return a;
}

Action Action::more(uint64_t packets) {
    Action a;
    a.kind = ActionKind::RequestMorePackets;
    a.packets = packets;
    return a;
}

Action Action::propose(std::vector<RuleId> rules) {
    Action a;
    a.kind = ActionKind::ProposeRuleEnablement;
    a.rules = std::move(rules);
    return a;
}

Action Action::report() {
    Action a;
    a.kind = ActionKind::EmitReport;
    return a;
}

std::vector<uint64_t> BeliefState::confirmed_packets() const {
    std::vector<uint64_t> out;
    for (const auto& c : candidates)
        if (c.confidence == Confidence::Confirmed) out.push_back(c.seq_index);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

std::vector<uint64_t> union_of_confirms(const std::map<uint64_t, std::vector<Action>>& per_turn) {
    std::vector<uint64_t> out;
    for (const auto& [_, actions] : per_turn)
        for (const auto& a : actions)
            if (a.kind == ActionKind::ConfirmAnomaly) out.insert(out.end(), a.seq_indices.begin(), a.seq_indices.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

std::vector<uint64_t> SessionTranscript::predicted_anomalies() const {
    std::map<uint64_t, std::vector<Action>> per_turn;
    for (const auto& t : turns) per_turn[t.turn] = t.actions;
    return union_of_confirms(per_turn);
}

std::vector<uint64_t> TranscriptActions::predicted_anomalies() const { return union_of_confirms(per_turn); }

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

ValidationConditions build_conditions(const std::vector<Candidate>& suspects, Level level, Protocol protocol,
                                      SystemFrequency freq) {
    ValidationConditions d;
    std::set<RuleId> rules;
    for (const auto& c : suspects) rules.insert(c.rule_id);
    for (RuleId r : rules) d.queries.push_back({QueryPurpose::Confirm, r, filterql::compile_rule(r, freq), 1});
    if (level == Level::PT) {
        const TrainingLevel tl{level};
        for (RuleId r : protocol_rules(protocol))
            if (!tl.enables(r)) d.queries.push_back({QueryPurpose::Statistic, r, filterql::compile_rule(r, freq), 0});
    }
    return d;
}

std::vector<size_t> context_starts(std::span<const Message> messages, size_t k) {
    std::vector<size_t> out(messages.size());
    std::map<StreamKey, std::vector<size_t>> seen;
    for (size_t pos = 0; pos < messages.size(); ++pos) {
        auto& mine = seen[stream_key_of(messages[pos])];
        size_t start = pos >= k ? pos - k : 0;
        if (!mine.empty()) start = std::min(start, mine.size() >= k ? mine[mine.size() - k] : mine.front());
        out[pos] = start;
        mine.push_back(pos);
    }
    return out;
}

ValidationOutcome validate_candidates(BeliefState& belief, const ValidationConditions& conditions,
                                      std::span<const Message> table, size_t batch_first,
                                      std::span<const size_t> starts) {
    ValidationOutcome out;
    std::unordered_map<uint64_t, size_t> where;
    for (size_t pos = batch_first; pos < table.size(); ++pos) where[seq_index_of(table[pos])] = pos;

    std::vector<Candidate> kept;
    for (const auto& c : belief.candidates) {
        if (c.confidence != Confidence::Suspect) {
            kept.push_back(c);
            continue;
        }
        const auto q = std::find_if(conditions.queries.begin(), conditions.queries.end(), [&](const auto& v) {
            return v.purpose == QueryPurpose::Confirm && v.rule_id == c.rule_id;
        });
        const auto it = where.find(c.seq_index);
        bool confirmed = false;
        if (q != conditions.queries.end() && it != where.end()) {
            const size_t pos = it->second;
            const auto context = table.subspan(starts[pos], pos - starts[pos] + 1);
            const auto rows = filterql::run_query(q->query, context).rows;
            confirmed = std::binary_search(rows.begin(), rows.end(), c.seq_index) && rows.size() >= q->min_count;
        }
        Candidate next = c;
        if (confirmed) {
            next.confidence = Confidence::Confirmed;
            out.promoted.push_back(next);
            kept.push_back(next);
        } else {
            out.demoted.push_back(c);
        }
    }
    belief.candidates = std::move(kept);

    std::unordered_set<uint64_t> batch;
    for (size_t pos = batch_first; pos < table.size(); ++pos) batch.insert(seq_index_of(table[pos]));
    for (const auto& q : conditions.queries) {
        if (q.purpose != QueryPurpose::Statistic) continue;
        const size_t from = batch_first < table.size() ? starts[batch_first] : batch_first;
        uint64_t n = 0;
        for (uint64_t s : filterql::run_query(q.query, table.subspan(from)).rows) n += batch.count(s);
        out.statistics[q.rule_id] = n;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

std::vector<Action> RuleOracleBackend::decide(const TurnContext& ctx) {
    if (!ctx.confirmed_this_turn.empty()) return {Action::confirm(ctx.confirmed_this_turn), Action::report()};
    if (ctx.level == Level::PT) {
        uint64_t irregular = 0;
        for (const auto& [_, n] : ctx.validation.statistics) irregular += n;
        if (irregular > 0) return {Action::propose(ctx.disabled_rules)};
    }
    return {Action::more(ctx.turn_batch)};
}

std::vector<Action> ScriptedBackend::decide(const TurnContext& ctx) {
    auto it = script_.find(ctx.turn);
    if (it == script_.end()) throw BackendProtocolError("script has no actions for turn " + std::to_string(ctx.turn));
    return it->second;
}

namespace {

json action_json(const Action& a) {
    json j;
    j["kind"] = to_string(a.kind);
    switch (a.kind) {
        case ActionKind::ConfirmAnomaly: j["seq_indices"] = a.seq_indices; break;
        case ActionKind::RequestMorePackets: j["packets"] = a.packets; break;
        case ActionKind::ProposeRuleEnablement: {
            json r = json::array();
            for (RuleId id : a.rules) r.push_back(rule_name(id));
            j["rules"] = r;
            break;
        }
        case ActionKind::EmitReport: break;
    }
    return j;
}

Action action_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw BackendProtocolError("action without a kind");
    Action a;
    a.kind = parse_action_kind(j["kind"].get<std::string>());
    try {
        switch (a.kind) {
            case ActionKind::ConfirmAnomaly:
                a.seq_indices = j.at("seq_indices").get<std::vector<uint64_t>>();
                break;
            case ActionKind::RequestMorePackets: a.packets = j.value("packets", uint64_t{0}); break;
            case ActionKind::ProposeRuleEnablement:
                for (const auto& r : j.at("rules")) a.rules.push_back(parse_rule_id(r.get<std::string>()));
                break;
            case ActionKind::EmitReport: break;
        }
    } catch (const nlohmann::json::exception& e) {
        throw BackendProtocolError(std::string("malformed ") + std::string(to_string(a.kind)) + ": " + e.what());
    } catch (const FormatError& e) {
        throw BackendProtocolError(e.what());
    }
    return a;
}

json candidate_json(const Candidate& c) {
    return json{{"seq_index", c.seq_index}, {"rule", rule_name(c.rule_id)}, {"confidence", to_string(c.confidence)}};
}

json rules_json(const std::vector<RuleId>& rules) {
    json r = json::array();
    for (RuleId id : rules) r.push_back(rule_name(id));
    return r;
}

// Split "http://host:port/path" into client base and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("chat endpoint must be an http:// URL: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

RemoteChatBackend::RemoteChatBackend(std::string endpoint, std::string api_key, AuditSink audit)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), audit_(std::move(audit)) {
    if (endpoint_.rfind("http://", 0) != 0)
        throw ConfigError("chat endpoint must start with http:// (got '" + endpoint_ + "')");
}

RemoteChatBackend RemoteChatBackend::from_env(AuditSink audit) {
    const char* endpoint = std::getenv("MCGUARD_CHAT_ENDPOINT");
    if (!endpoint || !*endpoint) throw ConfigError("RemoteChat needs MCGUARD_CHAT_ENDPOINT to be set");
    const char* key = std::getenv("MCGUARD_CHAT_KEY");
    return RemoteChatBackend(endpoint, key ? key : "", std::move(audit));
}

std::string RemoteChatBackend::build_prompt(const TurnContext& ctx) {
    std::ostringstream p;
    p << "You are the analyst in an IEC 61850 " << (ctx.protocol == Protocol::Goose ? "GOOSE" : "SV")
      << " anomaly detection session (turn " << ctx.turn << ", training level " << to_string(ctx.level) << ").\n";
    p << "Enabled rules: " << (ctx.enabled_rules.empty() ? "none" : rule_list(ctx.enabled_rules)) << ".\n";
    p << "Packets confirmed anomalous this turn: " << ctx.confirmed_this_turn.size() << ".\n";
    p << "Candidates demoted by validation: " << ctx.validation.demoted.size() << ".\n";
    for (const auto& [rule, n] : ctx.validation.statistics)
        p << "Packets matching disabled rule " << rule_name(rule) << ": " << n << ".\n";
    p << "Reply with JSON {\"actions\": [...]} using kinds ConfirmAnomaly (seq_indices), RequestMorePackets "
         "(packets), ProposeRuleEnablement (rules, only disabled ones) and EmitReport.\n";
    return p.str();
}

std::vector<Action> RemoteChatBackend::parse_reply(const std::string& body, const TurnContext& ctx) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        throw BackendProtocolError("chat reply is not JSON");
    }
    if (!doc.is_object() || !doc.contains("actions") || !doc["actions"].is_array())
        throw BackendProtocolError("chat reply has no actions array");
    std::vector<Action> out;
    for (const auto& j : doc["actions"]) out.push_back(action_from_json(j));
    for (const auto& a : out)
        for (RuleId r : a.rules)
            if (std::find(ctx.enabled_rules.begin(), ctx.enabled_rules.end(), r) != ctx.enabled_rules.end())
                throw BackendProtocolError("proposal names already enabled rule " + std::string(rule_name(r)));
    return out;
}

}  // namespace mcguard::tod

#include <httplib.h>

namespace mcguard::tod {

std::vector<Action> RemoteChatBackend::decide(const TurnContext& ctx) {
    json context;
    context["turn"] = ctx.turn;
    context["level"] = to_string(ctx.level);
    context["protocol"] = to_string(ctx.protocol);
    context["enabled_rules"] = rules_json(ctx.enabled_rules);
    context["disabled_rules"] = rules_json(ctx.disabled_rules);
    context["confirmed_this_turn"] = ctx.confirmed_this_turn;
    json stats = json::object();
    for (const auto& [r, n] : ctx.validation.statistics) stats[std::string(rule_name(r))] = n;
    context["statistics"] = stats;
    const std::string body = json{{"prompt", build_prompt(ctx)}, {"context", context}}.dump();

    const auto [base, path] = split_url(endpoint_);
    httplib::Client client(base);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    if (audit_) audit_("remote-chat request " + endpoint_ + " " + body);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) throw BackendUnavailable("chat endpoint unreachable: " + httplib::to_string(res.error()));
    if (audit_) audit_("remote-chat response " + std::to_string(res->status) + " " + res->body);
    if (res->status != 200) throw BackendProtocolError("chat endpoint returned HTTP " + std::to_string(res->status));
    return parse_reply(res->body, ctx);
}

std::vector<Action> decide_actions(AnalystBackend& backend, const TurnContext& ctx) { return backend.decide(ctx); }

// ---------------------------------------------------------------------------
// Transcript
// ---------------------------------------------------------------------------

namespace {

json stage(const char* record, uint64_t turn) {
    json j;
    j["schema_version"] = kTranscriptSchemaVersion;
    j["record"] = record;
    j["turn"] = turn;
    return j;
}

json tallies_json(const std::map<RuleId, RuleTally>& tallies) {
    json t = json::object();
    for (const auto& [r, n] : tallies)
        t[std::string(rule_name(r))] = {{"anomalous", n.anomalous}, {"compliant", n.compliant},
                                        {"not_applicable", n.not_applicable}};
    return t;
}

}  // namespace

std::string transcript_header_line(const SessionTranscript& t) {
    json j;
    j["schema_version"] = kTranscriptSchemaVersion;
    j["record"] = "session";
    j["backend"] = t.backend;
    j["protocol"] = to_string(t.protocol);
    j["level"] = to_string(t.options.level);
    j["frequency_hz"] = t.options.freq.hz();
    j["turn_batch"] = t.options.turn_batch;
    j["context_window"] = t.options.context_window;
    return j.dump();
}

std::vector<std::string> turn_lines(const TurnRecord& r) {
    std::vector<std::string> out;
    auto c = stage("C", r.turn);
    c["first_seq"] = r.first_seq;
    c["last_seq"] = r.last_seq;
    c["packets_total"] = r.packets_total;
    out.push_back(c.dump());

    auto b = stage("B", r.turn);
    json suspects = json::array();
    for (const auto& s : r.suspects) suspects.push_back(candidate_json(s));
    b["suspects"] = suspects;
    b["streams"] = r.streams;
    b["tallies"] = tallies_json(r.tallies);
    out.push_back(b.dump());

    auto d = stage("D", r.turn);
    json queries = json::array();
    for (const auto& q : r.conditions.queries)
        queries.push_back({{"purpose", q.purpose == QueryPurpose::Confirm ? "confirm" : "statistic"},
                           {"rule", rule_name(q.rule_id)},
                           {"query", filterql::render(q.query)},
                           {"min_count", q.min_count}});
    d["queries"] = queries;
    json promoted = json::array(), demoted = json::array();
    for (const auto& p : r.validation.promoted) promoted.push_back(candidate_json(p));
    for (const auto& p : r.validation.demoted) demoted.push_back(candidate_json(p));
    d["promoted"] = promoted;
    d["demoted"] = demoted;
    json stats = json::object();
    for (const auto& [rule, n] : r.validation.statistics) stats[std::string(rule_name(rule))] = n;
    d["statistics"] = stats;
    out.push_back(d.dump());

    auto a = stage("A", r.turn);
    json actions = json::array();
    for (const auto& x : r.actions) actions.push_back(action_json(x));
    a["actions"] = actions;
    out.push_back(a.dump());

    auto s = stage("S", r.turn);
    s["summary"] = r.summary;
    out.push_back(s.dump());
    return out;
}

std::string transcript_final_line(const SessionTranscript& t) {
    json j;
    j["schema_version"] = kTranscriptSchemaVersion;
    j["record"] = "final";
    j["turns"] = t.turns.size();
    j["aborted"] = t.aborted;
    j["confirmed"] = t.final_belief.confirmed_packets();
    j["predicted"] = t.predicted_anomalies();
    j["summary"] = t.final_summary;
    return j.dump();
}

std::string to_jsonl(const SessionTranscript& t) {
    std::string out = transcript_header_line(t) + "\n";
    for (const auto& r : t.turns)
        for (const auto& l : turn_lines(r)) out += l + "\n";
    return out + transcript_final_line(t) + "\n";
}

TranscriptActions read_transcript_actions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read transcript " + path.string());
    TranscriptActions out;
    std::string line;
    uint64_t lineno = 0;
    bool any = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw SchemaError(where + "not a JSON object");
        }
        if (!j.is_object() || !j.contains("record")) throw SchemaError(where + "missing record field");
        if (j.value("schema_version", 0) != kTranscriptSchemaVersion)
            throw SchemaError(where + "unsupported schema_version");
        any = true;
        const auto record = j["record"].get<std::string>();
        try {
            if (record == "A") {
                auto& dst = out.per_turn[j.at("turn").get<uint64_t>()];
                for (const auto& a : j.at("actions")) dst.push_back(action_from_json(a));
            } else if (record == "final" && j.contains("confirmed")) {
                out.confirmed = j["confirmed"].get<std::vector<uint64_t>>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(where + e.what());
        } catch (const BackendProtocolError& e) {
            throw SchemaError(where + e.what());
        }
    }
    if (!any) throw SchemaError(path.string() + ": empty transcript");
    return out;
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
    return ScriptedBackend(read_transcript_actions(path).per_turn);
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

namespace {

std::string turn_summary(const TurnRecord& r) {
    std::ostringstream s;
    s << "turn " << r.turn << ", packets " << r.first_seq << ".." << r.last_seq << ": " << r.suspects.size()
      << " suspect, " << r.validation.promoted.size() << " confirmed, " << r.validation.demoted.size()
      << " demoted ->";
    for (size_t i = 0; i < r.actions.size(); ++i) s << (i ? ", " : " ") << to_string(r.actions[i].kind);
    if (r.actions.empty()) s << " no action";
    return s.str();
}

std::string final_summary(const SessionTranscript& t, uint64_t packets, const std::vector<RuleId>& enabled) {
    std::ostringstream s;
    s << "level " << to_string(t.options.level) << ": ";
    if (enabled.empty())
        s << "no rules enabled; ";
    else
        s << "rules " << rule_list(enabled) << "; ";
    s << packets << " packets in " << t.turns.size() << " turns; ";
    std::map<RuleId, uint64_t> per_rule;
    for (const auto& c : t.final_belief.candidates)
        if (c.confidence == Confidence::Confirmed) ++per_rule[c.rule_id];
    s << t.final_belief.confirmed_packets().size() << " packets confirmed anomalous";
    if (!per_rule.empty()) {
        s << " (";
        bool first = true;
        for (const auto& [r, n] : per_rule) {
            s << (first ? "" : ", ") << rule_name(r) << " x" << n;
            first = false;
        }
        s << ")";
    }
    s << "; analyst confirmed " << t.predicted_anomalies().size() << " packets";
    uint64_t proposals = 0;
    for (const auto& r : t.turns)
        for (const auto& a : r.actions) proposals += a.kind == ActionKind::ProposeRuleEnablement;
    if (proposals) s << "; " << proposals << " rule-enablement proposals";
    if (t.aborted) s << "; aborted";
    return s.str();
}

void check_actions(const std::vector<Action>& actions, const std::vector<RuleId>& enabled, uint64_t max_seq) {
    for (const auto& a : actions) {
        for (RuleId r : a.rules)
            if (std::find(enabled.begin(), enabled.end(), r) != enabled.end())
                throw BackendProtocolError("ProposeRuleEnablement names enabled rule " + std::string(rule_name(r)));
        for (uint64_t s : a.seq_indices)
            if (s > max_seq)
                throw BackendProtocolError("ConfirmAnomaly names packet " + std::to_string(s) + " not yet seen");
    }
}

}  // namespace

SessionTranscript run_session(const std::vector<Message>& messages, const SessionOptions& options,
                              AnalystBackend& backend, const TranscriptSink& sink, const AuditSink& audit) {
    if (messages.empty()) throw UsageError("session needs at least one message");
    if (options.turn_batch == 0) throw UsageError("turn batch must be positive");
    const Protocol protocol = protocol_of(messages.front());
    for (const auto& m : messages)
        if (protocol_of(m) != protocol) throw UsageError("session input mixes GOOSE and SV messages");

    SessionTranscript t;
    t.backend = backend.name();
    t.protocol = protocol;
    t.options = options;
    auto emit = [&](const std::string& line) {
        if (sink) sink(line);
    };
    auto log = [&](const std::string& line) {
        if (audit) audit(line);
    };
    emit(transcript_header_line(t));
    log("session start: backend " + t.backend + ", level " + std::string(to_string(options.level)) + ", " +
        std::to_string(messages.size()) + " packets");

    const TrainingLevel tl{options.level};
    const auto enabled = tl.enabled_rules(protocol);
    std::vector<RuleId> disabled;
    for (RuleId r : protocol_rules(protocol))
        if (!tl.enables(r)) disabled.push_back(r);

    RuleEngine engine(tl, options.freq);
    BeliefState belief;
    const auto starts = context_starts(messages, options.context_window);
    const std::span<const Message> all(messages);
    uint64_t max_seq = 0;

    for (size_t first = 0, turn = 1; first < messages.size(); first += options.turn_batch, ++turn) {
        const size_t end = std::min(messages.size(), first + options.turn_batch);
        TurnRecord r;
        r.turn = turn;
        r.first_seq = seq_index_of(messages[first]);
        r.last_seq = seq_index_of(messages[end - 1]);
        r.packets_total = end;

        for (size_t i = first; i < end; ++i) {
            max_seq = std::max(max_seq, seq_index_of(messages[i]));
            const auto v = engine.evaluate(messages[i]);
            for (const auto& rv : v.per_rule) {
                auto& tally = belief.tallies[rv.rule_id];
                switch (rv.outcome) {
                    case Outcome::Anomalous:
                        ++tally.anomalous;
                        r.suspects.push_back({v.seq_index, rv.rule_id, Confidence::Suspect});
                        break;
                    case Outcome::Compliant: ++tally.compliant; break;
                    case Outcome::NotApplicable: ++tally.not_applicable; break;
                }
            }
        }
        belief.streams.clear();
        for (const auto& [k, st] : engine.streams()) belief.streams.emplace(st.key, st);
        belief.candidates.insert(belief.candidates.end(), r.suspects.begin(), r.suspects.end());
        r.tallies = belief.tallies;
        r.streams = belief.streams.size();

        r.conditions = build_conditions(r.suspects, options.level, protocol, options.freq);
        r.validation = validate_candidates(belief, r.conditions, all.first(end), first, starts);
        for (const auto& d : r.validation.demoted)
            log("turn " + std::to_string(turn) + ": demoted " + std::string(rule_name(d.rule_id)) + " at packet " +
                std::to_string(d.seq_index) + " (not reproduced in its context window)");

        std::vector<uint64_t> confirmed;
        for (const auto& p : r.validation.promoted) confirmed.push_back(p.seq_index);
        confirmed.erase(std::unique(confirmed.begin(), confirmed.end()), confirmed.end());
        const TurnContext ctx{turn,      options.level, protocol, options.turn_batch, belief, r.validation,
                              confirmed, enabled,       disabled};

        std::string failure;
        for (int attempt = 0; attempt < 2; ++attempt) {
            try {
                r.actions = decide_actions(backend, ctx);
                check_actions(r.actions, enabled, max_seq);
                failure.clear();
                break;
            } catch (const BackendUnavailable& e) {
                failure = e.what();
                break;
            } catch (const BackendProtocolError& e) {
                failure = e.what();
                log("turn " + std::to_string(turn) + ": backend error (attempt " + std::to_string(attempt + 1) +
                    "): " + failure);
            }
        }
        if (!failure.empty()) {
            t.aborted = true;
            t.final_belief = belief;
            t.final_summary = final_summary(t, first, enabled);
            log("session aborted in turn " + std::to_string(turn) + ": " + failure);
            emit(transcript_final_line(t));
            throw SessionAborted("session aborted in turn " + std::to_string(turn) + ": " + failure, t);
        }
        for (const auto& a : r.actions)
            if (a.kind == ActionKind::ProposeRuleEnablement)
                log("turn " + std::to_string(turn) + ": proposal to enable " + rule_list(a.rules) +
                    " (recorded only, the rule set is unchanged)");

        r.summary = turn_summary(r);
        for (const auto& l : turn_lines(r)) emit(l);
        t.turns.push_back(std::move(r));
    }
    t.final_belief = belief;
    t.final_summary = final_summary(t, messages.size(), enabled);
    emit(transcript_final_line(t));
    log("session end: " + t.final_summary);
    return t;
}

}  // namespace mcguard::tod
