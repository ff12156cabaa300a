#pragma once

// Synthetic GOOSE / SV traffic with labeled attack injections.
//
// The baseline is compliant with every rule at FT by construction. Each
// attack is shaped so that the packets it labels are exactly the packets the
// matching rules flag (see docs/attacks.md for the attack -> rule table).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcguard/config.hpp"
#include "mcguard/msgmodel.hpp"
#include "mcguard/rulekit.hpp"

namespace mcguard {

enum class AttackKind : uint8_t {
    ReplayStnumRegression,
    SqnumSkip,
    DataChangeSpoof,
    FieldTamper,
    Flood,
    Suppression,
    TimestampMalformat,
    SmpcntJump,
    SmpcntOutOfRange,
    IntervalDrift,
};

inline constexpr AttackKind kAllAttacks[] = {
    AttackKind::ReplayStnumRegression, AttackKind::SqnumSkip,       AttackKind::DataChangeSpoof,
    AttackKind::FieldTamper,           AttackKind::Flood,           AttackKind::Suppression,
    AttackKind::TimestampMalformat,    AttackKind::SmpcntJump,      AttackKind::SmpcntOutOfRange,
    AttackKind::IntervalDrift,
};

std::string_view to_string(AttackKind a);
AttackKind parse_attack(std::string_view text);  // throws SpecError
bool attack_applies(AttackKind a, Protocol p);
// Rules that flag the labeled packets at FT.
std::vector<RuleId> attack_rules(AttackKind a, Protocol p);

struct InjectionSpec {
    AttackKind attack = AttackKind::SqnumSkip;
    double at = 0;                     // seconds after the scenario start
    std::optional<int64_t> magnitude;  // attack specific, see docs/attacks.md
    std::optional<int64_t> count;      // run length (replay, out-of-range)
    std::string field;                 // FieldTamper: dm, sm, type, appid, dataset, goid, svid
    size_t stream = 0;

    bool operator==(const InjectionSpec&) const = default;
};

struct GooseTiming {
    int64_t heartbeat_us = 1'000'000;
    int64_t jitter_us = 1'000;                // heartbeat +/- jitter
    double state_change_probability = 0.02;   // per heartbeat
    int64_t first_retransmit_us = 2'000;      // doubles after each state change

    bool operator==(const GooseTiming&) const = default;
};

struct SvTiming {
    // uniform integer inter-arrival, both bounds inside [200, 215]
    int64_t interval_min_us = 200;
    int64_t interval_max_us = 215;

    bool operator==(const SvTiming&) const = default;
};

struct ScenarioSpec {
    std::string name = "scenario";
    Protocol protocol = Protocol::Goose;
    double duration = 10;             // seconds of baseline traffic
    std::optional<uint64_t> packets;  // total baseline packets; overrides duration
    SystemFrequency freq;
    uint64_t seed = 1;
    size_t streams = 1;
    std::vector<InjectionSpec> injections;
    // When set, random injections of every applicable attack are added until
    // roughly this fraction of packets is labeled.
    std::optional<double> anomaly_rate;
    GooseTiming goose;
    SvTiming sv;

    bool operator==(const ScenarioSpec&) const = default;
};

inline constexpr int64_t kScenarioStartMicros = 36'000'000'000;  // 10:00:00

ScenarioSpec scenario_from_config(const ConfigTable& t);
ScenarioSpec load_scenario(const std::filesystem::path& file);

// Deterministic in (spec). Throws SpecError for invalid parameters, attacks
// that do not apply to the protocol, or colliding injections.
std::vector<LabeledRecord> generate(const ScenarioSpec& spec);

// "Normal" plus one entry per attack tag.
std::map<std::string, uint64_t> summarize(const std::vector<LabeledRecord>& records);

struct DatasetFiles {
    std::filesystem::path csv;
    std::filesystem::path pcap;
    std::filesystem::path labels;
};

void export_csv(const std::vector<LabeledRecord>& records, const std::filesystem::path& path);
void export_pcap(const std::vector<LabeledRecord>& records, const std::filesystem::path& path);
// Sidecar: header seq_index,label,attack_tag
void export_labels(const std::vector<LabeledRecord>& records, const std::filesystem::path& path);
// <dir>/<stem>.csv, <stem>.pcap, <stem>.labels.csv
DatasetFiles export_dataset(const std::vector<LabeledRecord>& records, const std::filesystem::path& dir,
                            const std::string& stem);

struct LabelRow {
    uint64_t seq_index = 0;
    Label label = Label::Normal;
    std::string attack_tag;

    bool operator==(const LabelRow&) const = default;
};

// Throws SchemaError / FormatError with path and line.
std::vector<LabelRow> read_labels(const std::filesystem::path& path);

}  // namespace mcguard
