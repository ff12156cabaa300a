#pragma once

// Task-oriented dialogue session over a message stream. Each turn takes a
// batch of packets through five stages:
//
//   C  structured input      append the batch
//   B  automated analysis    rule evaluation, new Suspect candidates
//   D  dynamic validation    re-run the compiled rule query over the k
//                            preceding packets; Suspect -> Confirmed or demoted
//   A  continuous learning   the analyst backend picks actions
//   S  adaptive response     a one-line turn summary
//
// The analyst sits behind AnalystBackend. RuleOracle is a fixed policy
// table, ScriptedTranscript replays recorded actions (HITL fixtures), and
// RemoteChat asks an HTTP chat endpoint.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcguard/error.hpp"
#include "mcguard/filterql.hpp"
#include "mcguard/msgmodel.hpp"
#include "mcguard/rulekit.hpp"

namespace mcguard::tod {

enum class Confidence : uint8_t { Suspect, Confirmed };
std::string_view to_string(Confidence c);

struct Candidate {
    uint64_t seq_index = 0;
    RuleId rule_id = RuleId::GR1;
    Confidence confidence = Confidence::Suspect;

    bool operator==(const Candidate&) const = default;
};

struct RuleTally {
    uint64_t anomalous = 0;
    uint64_t compliant = 0;
    uint64_t not_applicable = 0;

    bool operator==(const RuleTally&) const = default;
};

struct BeliefState {
    std::map<StreamKey, StreamState> streams;
    std::map<RuleId, RuleTally> tallies;
    // Confirmed entries accumulate over the session; Suspect entries only live
    // within the turn that raised them.
    std::vector<Candidate> candidates;

    std::vector<uint64_t> confirmed_packets() const;  // ascending, unique
    bool operator==(const BeliefState&) const = default;
};

enum class QueryPurpose : uint8_t { Confirm, Statistic };

struct ValidationQuery {
    QueryPurpose purpose = QueryPurpose::Confirm;
    RuleId rule_id = RuleId::GR1;
    filterql::Query query;
    uint64_t min_count = 1;  // Confirm: the packet must be selected in its context

    bool operator==(const ValidationQuery&) const = default;
};

struct ValidationConditions {
    std::vector<ValidationQuery> queries;
    bool operator==(const ValidationConditions&) const = default;
};

struct ValidationOutcome {
    std::vector<Candidate> promoted;
    std::vector<Candidate> demoted;
    // Statistic queries: rows selected inside the current batch.
    std::map<RuleId, uint64_t> statistics;

    bool operator==(const ValidationOutcome&) const = default;
};

enum class ActionKind : uint8_t { ConfirmAnomaly, RequestMorePackets, ProposeRuleEnablement, EmitReport };
std::string_view to_string(ActionKind k);
ActionKind parse_action_kind(std::string_view text);  // throws BackendProtocolError

struct Action {
    ActionKind kind = ActionKind::RequestMorePackets;
    std::vector<uint64_t> seq_indices;  // ConfirmAnomaly
    uint64_t packets = 0;               // RequestMorePackets
    std::vector<RuleId> rules;          // ProposeRuleEnablement

    static Action confirm(std::vector<uint64_t> seq);
    static Action more(uint64_t packets);
    static Action propose(std::vector<RuleId> rules);
    static Action report();
    bool operator==(const Action&) const = default;
};

struct SessionOptions {
    Level level = Level::FT;
    SystemFrequency freq;
    size_t turn_batch = 100;
    size_t context_window = 20;  // k preceding packets used for validation
};

struct TurnRecord {
    uint64_t turn = 0;
    // C
    uint64_t first_seq = 0;
    uint64_t last_seq = 0;
    uint64_t packets_total = 0;
    // B
    std::vector<Candidate> suspects;
    std::map<RuleId, RuleTally> tallies;
    size_t streams = 0;
    // D
    ValidationConditions conditions;
    ValidationOutcome validation;
    // A
    std::vector<Action> actions;
    // S
    std::string summary;

    bool operator==(const TurnRecord&) const = default;
};

inline constexpr int kTranscriptSchemaVersion = 1;

struct SessionTranscript {
    std::string backend;
    Protocol protocol = Protocol::Goose;
    SessionOptions options;
    std::vector<TurnRecord> turns;
    std::string final_summary;
    BeliefState final_belief;
    bool aborted = false;

    // Union of every ConfirmAnomaly payload: the session's predictions.
    std::vector<uint64_t> predicted_anomalies() const;
};

// Everything a backend may look at when choosing actions.
struct TurnContext {
    uint64_t turn = 0;
    Level level = Level::FT;
    Protocol protocol = Protocol::Goose;
    size_t turn_batch = 100;
    const BeliefState& belief;
    const ValidationOutcome& validation;
    std::vector<uint64_t> confirmed_this_turn;
    std::vector<RuleId> enabled_rules;
    std::vector<RuleId> disabled_rules;
};

using AuditSink = std::function<void(const std::string&)>;

class AnalystBackend {
public:
    virtual ~AnalystBackend() = default;
    virtual std::string name() const = 0;
    virtual std::vector<Action> decide(const TurnContext& ctx) = 0;
};

// Confirmed this turn -> [ConfirmAnomaly, EmitReport]; else at PT with
// out-of-band statistics -> [ProposeRuleEnablement(disabled rules)]; else
// [RequestMorePackets].
class RuleOracleBackend : public AnalystBackend {
public:
    std::string name() const override { return "RuleOracle"; }
    std::vector<Action> decide(const TurnContext& ctx) override;
};

class ScriptedBackend : public AnalystBackend {
public:
    explicit ScriptedBackend(std::map<uint64_t, std::vector<Action>> per_turn) : script_(std::move(per_turn)) {}
    // Reads the A records of a transcript file (or an actions-only script).
    static ScriptedBackend from_file(const std::filesystem::path& path);

    std::string name() const override { return "ScriptedTranscript"; }
    std::vector<Action> decide(const TurnContext& ctx) override;

private:
    std::map<uint64_t, std::vector<Action>> script_;
};

// POST {prompt, context} to the endpoint; reply {actions: [...]}.
class RemoteChatBackend : public AnalystBackend {
public:
    RemoteChatBackend(std::string endpoint, std::string api_key, AuditSink audit = {});
    // Reads MCGUARD_CHAT_ENDPOINT / MCGUARD_CHAT_KEY; throws ConfigError when
    // the endpoint is unset.
    static RemoteChatBackend from_env(AuditSink audit = {});

    std::string name() const override { return "RemoteChat"; }
    std::vector<Action> decide(const TurnContext& ctx) override;

    static std::string build_prompt(const TurnContext& ctx);
    // Throws BackendProtocolError for anything that is not a valid action list.
    static std::vector<Action> parse_reply(const std::string& body, const TurnContext& ctx);

private:
    std::string endpoint_;
    std::string api_key_;
    AuditSink audit_;
};

// The backend could not be reached at all; the turn is not retried.
class BackendUnavailable : public BackendProtocolError {
public:
    using BackendProtocolError::BackendProtocolError;
};

// Thrown when the backend fails; the transcript so far is attached.
class SessionAborted : public BackendProtocolError {
public:
    SessionAborted(const std::string& what, SessionTranscript partial)
        : BackendProtocolError(what), partial_(std::move(partial)) {}
    const SessionTranscript& partial() const noexcept { return partial_; }

private:
    SessionTranscript partial_;
};

// Compiled rule queries for the suspect rules, plus statistic queries for the
// disabled rules at PT.
ValidationConditions build_conditions(const std::vector<Candidate>& suspects, Level level, Protocol protocol,
                                      SystemFrequency freq);

// Where the validation context of each packet starts: far enough back to hold
// its k preceding same-stream packets, and never fewer than k packets overall
// (a stream's first packet still sees its neighbours).
std::vector<size_t> context_starts(std::span<const Message> messages, size_t k);

// Re-evaluates each Suspect over table[starts[pos], pos] with its rule query.
// Confirmed candidates stay in the belief; Suspects are removed either way.
// Statistic queries count their rows from `batch_first` on.
ValidationOutcome validate_candidates(BeliefState& belief, const ValidationConditions& conditions,
                                      std::span<const Message> table, size_t batch_first,
                                      std::span<const size_t> starts);

std::vector<Action> decide_actions(AnalystBackend& backend, const TurnContext& ctx);

// Called with each transcript line as soon as it is final, so an aborted
// session still leaves its partial transcript behind.
using TranscriptSink = std::function<void(const std::string& line)>;

// Throws UsageError for an empty or mixed-protocol stream, SessionAborted when
// the backend fails twice in a turn or cannot be reached.
SessionTranscript run_session(const std::vector<Message>& messages, const SessionOptions& options,
                              AnalystBackend& backend, const TranscriptSink& sink = {}, const AuditSink& audit = {});

// JSONL: a session header line, five stage lines per turn, a final line.
std::string transcript_header_line(const SessionTranscript& t);
std::vector<std::string> turn_lines(const TurnRecord& r);
std::string transcript_final_line(const SessionTranscript& t);
std::string to_jsonl(const SessionTranscript& t);

// Reads the A records and the final line back; enough to score a session.
struct TranscriptActions {
    std::map<uint64_t, std::vector<Action>> per_turn;
    std::vector<uint64_t> confirmed;  // from the final line, when present

    std::vector<uint64_t> predicted_anomalies() const;
};
TranscriptActions read_transcript_actions(const std::filesystem::path& path);

}  // namespace mcguard::tod
