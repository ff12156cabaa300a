#pragma once

// Confusion matrices, the four correlation-style metrics plus accuracy, and
// the method x level comparison report.
//
// Positive class is Anomalous. A rate whose denominator is zero counts as 0,
// and MCC is 0 when any factor of its denominator is 0.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcguard/msgmodel.hpp"
#include "mcguard/rulekit.hpp"
#include "mcguard/scenario.hpp"

namespace mcguard {

struct ConfusionMatrix {
    uint64_t tp = 0;
    uint64_t fp = 0;
    uint64_t tn = 0;
    uint64_t fn = 0;

    uint64_t total() const { return tp + fp + tn + fn; }
    // Negative class becomes positive: tp<->tn, fp<->fn.
    ConfusionMatrix swapped() const { return {tn, fn, tp, fp}; }
    ConfusionMatrix& operator+=(const ConfusionMatrix& o);

    bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricSet {
    double informedness = 0;  // TPR + TNR - 1
    double markedness = 0;    // PPV + NPV - 1
    double mcc = 0;
    double gm = 0;            // sqrt(TPR * TNR)
    double accuracy = 0;

    bool operator==(const MetricSet&) const = default;
};

// Throws UsageError when the lists differ in length or seq_index order.
ConfusionMatrix confusion(const std::vector<PacketVerdict>& predicted, const std::vector<LabeledRecord>& truth);
ConfusionMatrix confusion(const std::vector<PacketVerdict>& predicted, const std::vector<LabelRow>& truth);
// predicted: seq_index set flagged anomalous; every other labeled packet is predicted normal.
ConfusionMatrix confusion(const std::vector<uint64_t>& predicted_anomalous, const std::vector<LabelRow>& truth);

// Throws UsageError for an all-zero matrix.
MetricSet metrics(const ConfusionMatrix& cm);

// ---------------------------------------------------------------------------
// Comparison report
// ---------------------------------------------------------------------------

enum class Method : uint8_t { HITL, ToD };
std::string_view to_string(Method m);
Method parse_method(std::string_view text);  // throws UsageError

enum class Provenance : uint8_t { Computed, Fixture };
std::string_view to_string(Provenance p);

struct ReportCell {
    Protocol protocol = Protocol::Goose;
    Method method = Method::ToD;
    Level level = Level::FT;
    Provenance provenance = Provenance::Computed;
    std::string source;  // dataset id, or the table citation for fixtures

    MetricSet metrics;
    // Display text for informedness, markedness, mcc, gm. Fixture cells keep
    // the published digits exactly.
    std::array<std::string, 4> text;
    std::optional<ConfusionMatrix> confusion;  // computed cells only
    std::optional<double> accuracy;           // computed cells only

    bool operator==(const ReportCell&) const = default;
};

ReportCell computed_cell(Protocol p, Method m, Level l, const ConfusionMatrix& cm, std::string source);

// The 12 published cells (2 protocols x 2 methods x 3 levels), read-only.
const std::vector<ReportCell>& table_i_fixtures();
inline constexpr const char* kTableICitation = "Table I";

struct ComparisonReport {
    std::vector<ReportCell> cells;
};

inline constexpr int kReportSchemaVersion = 1;

// Throws UsageError when `cells` is empty.
ComparisonReport build_report(std::vector<ReportCell> cells);

std::string render_markdown(const ComparisonReport& r);
std::string render_csv(const ComparisonReport& r);
std::string render_json(const ComparisonReport& r);
// Accuracy per level for computed cells plus the level-to-level delta.
std::string render_accuracy_by_level(const ComparisonReport& r);

// Reads the cells back from render_json output. Throws SchemaError.
ComparisonReport parse_report_json(const std::string& text);

struct ReportFiles {
    std::filesystem::path markdown, csv, json, accuracy;
};
// report.md, report.csv, report.json, accuracy_by_level.csv under dir.
ReportFiles write_report(const ComparisonReport& r, const std::filesystem::path& dir);

}  // namespace mcguard
