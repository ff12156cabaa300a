#include "mcguard/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "mcguard/capture.hpp"
#include "mcguard/error.hpp"

namespace mcguard {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

namespace {

void tally(ConfusionMatrix& cm, bool predicted, bool actual) {
    if (actual) {
        if (predicted) ++cm.tp; else ++cm.fn;
    } else {
        if (predicted) ++cm.fp; else ++cm.tn;
    }
}

double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

}  // namespace

ConfusionMatrix confusion(const std::vector<PacketVerdict>& predicted, const std::vector<LabeledRecord>& truth) {
    if (predicted.size() != truth.size())
        throw UsageError("confusion: " + std::to_string(predicted.size()) + " verdicts vs " +
                         std::to_string(truth.size()) + " labels");
    ConfusionMatrix cm;
    for (size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].seq_index != seq_index_of(truth[i].message))
            throw UsageError("confusion: seq_index mismatch at position " + std::to_string(i));
        tally(cm, predicted[i].anomalous, truth[i].label == Label::Anomalous);
    }
    return cm;
}

ConfusionMatrix confusion(const std::vector<PacketVerdict>& predicted, const std::vector<LabelRow>& truth) {
    if (predicted.size() != truth.size())
        throw UsageError("confusion: " + std::to_string(predicted.size()) + " verdicts vs " +
                         std::to_string(truth.size()) + " labels");
    ConfusionMatrix cm;
    for (size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].seq_index != truth[i].seq_index)
            throw UsageError("confusion: seq_index mismatch at position " + std::to_string(i) + " (" +
                             std::to_string(predicted[i].seq_index) + " vs " + std::to_string(truth[i].seq_index) +
                             ")");
        tally(cm, predicted[i].anomalous, truth[i].label == Label::Anomalous);
    }
    return cm;
}

ConfusionMatrix confusion(const std::vector<uint64_t>& predicted_anomalous, const std::vector<LabelRow>& truth) {
    std::vector<uint64_t> flagged = predicted_anomalous;
    std::sort(flagged.begin(), flagged.end());
    flagged.erase(std::unique(flagged.begin(), flagged.end()), flagged.end());
    std::vector<uint64_t> known;
    known.reserve(truth.size());
    for (const auto& r : truth) known.push_back(r.seq_index);
    std::sort(known.begin(), known.end());
    for (uint64_t s : flagged)
        if (!std::binary_search(known.begin(), known.end(), s))
            throw UsageError("confusion: predicted seq_index " + std::to_string(s) + " has no label");
    ConfusionMatrix cm;
    for (const auto& r : truth)
        tally(cm, std::binary_search(flagged.begin(), flagged.end(), r.seq_index), r.label == Label::Anomalous);
    return cm;
}

MetricSet metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw UsageError("metrics of an empty confusion matrix");
    const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
    const double tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);
    const double tpr = ratio(tp, tp + fn);
    const double tnr = ratio(tn, tn + fp);
    const double ppv = ratio(tp, tp + fp);
    const double npv = ratio(tn, tn + fn);
    MetricSet m;
    m.informedness = tpr + tnr - 1;
    m.markedness = ppv + npv - 1;
    const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    m.mcc = den == 0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den);
    m.gm = std::sqrt(tpr * tnr);
    m.accuracy = (tp + tn) / static_cast<double>(cm.total());
    return m;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Method m) { return m == Method::HITL ? "HITL" : "ToD"; }

Method parse_method(std::string_view text) {
    std::string t;
    for (char c : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (t == "hitl") return Method::HITL;
    if (t == "tod") return Method::ToD;
    throw UsageError("unknown method '" + std::string(text) + "' (expected HITL or ToD)");
}

std::string_view to_string(Provenance p) { return p == Provenance::Computed ? "Computed" : "Fixture"; }

namespace {

// Up to four decimals, trailing zeros dropped: 1 -> "1", 0.94915 -> "0.9492".
std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s = buf;
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

std::string long_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s = buf;
    if (s == "-0.000000") s = "0.000000";
    return s;
}

ReportCell fixture(Protocol p, Method m, Level l, const char* inf, const char* mark, const char* mcc, const char* gm) {
    ReportCell c;
    c.protocol = p;
    c.method = m;
    c.level = l;
    c.provenance = Provenance::Fixture;
    c.source = kTableICitation;
    c.text = {inf, mark, mcc, gm};
    c.metrics.informedness = std::stod(inf);
    c.metrics.markedness = std::stod(mark);
    c.metrics.mcc = std::stod(mcc);
    c.metrics.gm = std::stod(gm);
    return c;
}

}  // namespace

ReportCell computed_cell(Protocol p, Method m, Level l, const ConfusionMatrix& cm, std::string source) {
    ReportCell c;
    c.protocol = p;
    c.method = m;
    c.level = l;
    c.provenance = Provenance::Computed;
    c.source = std::move(source);
    c.metrics = metrics(cm);
    c.text = {short_number(c.metrics.informedness), short_number(c.metrics.markedness), short_number(c.metrics.mcc),
              short_number(c.metrics.gm)};
    c.confusion = cm;
    c.accuracy = c.metrics.accuracy;
    return c;
}

const std::vector<ReportCell>& table_i_fixtures() {
    using enum Method;
    static const std::vector<ReportCell> cells = {
        fixture(Protocol::Goose, HITL, Level::WT, "0.22", "0.233", "0.0247", "0.5865"),
        fixture(Protocol::Goose, HITL, Level::PT, "0.3964", "0.416", "0.2054", "0.6844"),
        fixture(Protocol::Goose, HITL, Level::FT, "0.5709", "0.599", "0.4142", "0.7784"),
        fixture(Protocol::Goose, ToD, Level::WT, "0.825", "0.8296", "0.822", "0.9105"),
        fixture(Protocol::Goose, ToD, Level::PT, "0.8998", "0.8998", "0.8997", "0.9512"),
        fixture(Protocol::Goose, ToD, Level::FT, "0.9492", "0.9492", "0.9491", "0.9746"),
        fixture(Protocol::Sv, HITL, Level::WT, "0", "0", "0", "0.5"),
        fixture(Protocol::Sv, HITL, Level::PT, "0.5", "0.3836", "0.3713", "0.7483"),
        fixture(Protocol::Sv, HITL, Level::FT, "0.8833", "0.7407", "0.8432", "0.9397"),
        fixture(Protocol::Sv, ToD, Level::WT, "0.8296", "0.825", "0.823", "0.9143"),
        fixture(Protocol::Sv, ToD, Level::PT, "0.8968", "0.8968", "0.8966", "0.9484"),
        fixture(Protocol::Sv, ToD, Level::FT, "0.9467", "0.9467", "0.9466", "0.9733"),
    };
    return cells;
}

ComparisonReport build_report(std::vector<ReportCell> cells) {
    if (cells.empty()) throw UsageError("a report needs at least one cell");
    std::stable_sort(cells.begin(), cells.end(), [](const ReportCell& a, const ReportCell& b) {
        return std::tuple(a.protocol, a.method, a.level, a.provenance) <
               std::tuple(b.protocol, b.method, b.level, b.provenance);
    });
    return {std::move(cells)};
}

namespace {

constexpr const char* kMetricNames[] = {"Informedness", "Markedness", "MCC", "Geometric Mean"};
constexpr const char* kMetricKeys[] = {"informedness", "markedness", "mcc", "gm"};

std::string column_title(const ReportCell& c) {
    std::string t = std::string(to_string(c.method)) + " " + std::string(to_string(c.level));
    if (c.provenance == Provenance::Fixture) return t + " [Fixture]";
    return t + " [Computed: " + c.source + "]";
}

std::string md_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

std::string render_markdown(const ComparisonReport& r) {
    std::ostringstream out;
    out << "# Anomaly detection by training level\n\n";
    for (Protocol p : {Protocol::Goose, Protocol::Sv}) {
        std::vector<const ReportCell*> cols;
        for (const auto& c : r.cells)
            if (c.protocol == p) cols.push_back(&c);
        if (cols.empty()) continue;
        out << "## " << (p == Protocol::Goose ? "GOOSE" : "SV") << "\n\n| Metric |";
        for (const auto* c : cols) out << ' ' << md_escape(column_title(*c)) << " |";
        out << "\n|---|";
        for (size_t i = 0; i < cols.size(); ++i) out << "---|";
        out << '\n';
        for (size_t k = 0; k < 4; ++k) {
            out << "| " << kMetricNames[k] << " |";
            for (const auto* c : cols) out << ' ' << c->text[k] << " |";
            out << '\n';
        }
        out << "| Accuracy |";
        for (const auto* c : cols) out << ' ' << (c->accuracy ? short_number(*c->accuracy) : "-") << " |";
        out << "\n\n";
    }
    bool fixtures = false;
    for (const auto& c : r.cells) fixtures = fixtures || c.provenance == Provenance::Fixture;
    if (fixtures)
        out << "[Fixture] cells are published values (" << kTableICitation
            << "), shown verbatim and never recomputed. [Computed] cells come from the named dataset.\n";
    return out.str();
}

std::string render_csv(const ComparisonReport& r) {
    std::ostringstream out;
    out << "protocol,method,level,provenance,source,informedness,markedness,mcc,gm,accuracy,tp,fp,tn,fn\n";
    for (const auto& c : r.cells) {
        out << to_string(c.protocol) << ',' << to_string(c.method) << ',' << to_string(c.level) << ','
            << to_string(c.provenance) << ',' << csv_escape(c.source);
        for (const auto& t : c.text) out << ',' << t;
        out << ',' << (c.accuracy ? long_number(*c.accuracy) : "");
        if (c.confusion)
            out << ',' << c.confusion->tp << ',' << c.confusion->fp << ',' << c.confusion->tn << ',' << c.confusion->fn;
        else
            out << ",,,,";
        out << '\n';
    }
    return out.str();
}

std::string render_json(const ComparisonReport& r) {
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& c : r.cells) {
        nlohmann::ordered_json j;
        j["protocol"] = to_string(c.protocol);
        j["method"] = to_string(c.method);
        j["level"] = to_string(c.level);
        j["provenance"] = to_string(c.provenance);
        j["source"] = c.source;
        nlohmann::ordered_json m;
        for (size_t k = 0; k < 4; ++k) m[kMetricKeys[k]] = c.text[k];
        if (c.accuracy) m["accuracy"] = *c.accuracy;
        j["metrics"] = m;
        if (c.confusion)
            j["confusion"] = {{"tp", c.confusion->tp}, {"fp", c.confusion->fp}, {"tn", c.confusion->tn},
                              {"fn", c.confusion->fn}};
        cells.push_back(j);
    }
    nlohmann::ordered_json doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["cells"] = cells;
    return doc.dump(2) + "\n";
}

std::string render_accuracy_by_level(const ComparisonReport& r) {
    std::ostringstream out;
    out << "protocol,method,source,level,accuracy,delta_from_previous_level\n";
    std::map<std::tuple<Protocol, Method, std::string>, std::map<Level, double>> groups;
    for (const auto& c : r.cells)
        if (c.accuracy) groups[{c.protocol, c.method, c.source}][c.level] = *c.accuracy;
    for (const auto& [key, levels] : groups) {
        std::optional<double> prev;
        for (const auto& [level, acc] : levels) {
            out << to_string(std::get<0>(key)) << ',' << to_string(std::get<1>(key)) << ','
                << csv_escape(std::get<2>(key)) << ',' << to_string(level) << ',' << long_number(acc) << ','
                << (prev ? long_number(acc - *prev) : "") << '\n';
            prev = acc;
        }
    }
    return out.str();
}

ComparisonReport parse_report_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("report json: ") + e.what());
    }
    try {
        if (doc.at("schema_version").get<int>() != kReportSchemaVersion)
            throw SchemaError("report json: unsupported schema_version");
        ComparisonReport r;
        for (const auto& j : doc.at("cells")) {
            ReportCell c;
            c.protocol = parse_protocol(j.at("protocol").get<std::string>());
            c.method = parse_method(j.at("method").get<std::string>());
            c.level = parse_level(j.at("level").get<std::string>());
            const auto prov = j.at("provenance").get<std::string>();
            if (prov != "Computed" && prov != "Fixture") throw SchemaError("report json: bad provenance " + prov);
            c.provenance = prov == "Computed" ? Provenance::Computed : Provenance::Fixture;
            c.source = j.at("source").get<std::string>();
            const auto& m = j.at("metrics");
            for (size_t k = 0; k < 4; ++k) c.text[k] = m.at(kMetricKeys[k]).get<std::string>();
            c.metrics.informedness = std::stod(c.text[0]);
            c.metrics.markedness = std::stod(c.text[1]);
            c.metrics.mcc = std::stod(c.text[2]);
            c.metrics.gm = std::stod(c.text[3]);
            if (m.contains("accuracy")) {
                c.accuracy = m.at("accuracy").get<double>();
                c.metrics.accuracy = *c.accuracy;
            }
            if (j.contains("confusion")) {
                const auto& k = j.at("confusion");
                c.confusion = ConfusionMatrix{k.at("tp").get<uint64_t>(), k.at("fp").get<uint64_t>(),
                                              k.at("tn").get<uint64_t>(), k.at("fn").get<uint64_t>()};
                // recompute so full precision survives the round trip
                c.metrics = metrics(*c.confusion);
            }
            r.cells.push_back(std::move(c));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("report json: ") + e.what());
    } catch (const FormatError& e) {
        throw SchemaError(std::string("report json: ") + e.what());
    } catch (const UsageError& e) {
        throw SchemaError(std::string("report json: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw SchemaError("report json: metric text is not a number");
    }
}

ReportFiles write_report(const ComparisonReport& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    ReportFiles f{dir / "report.md", dir / "report.csv", dir / "report.json", dir / "accuracy_by_level.csv"};
    auto put = [](const std::filesystem::path& path, const std::string& body) {
        std::ofstream out(path, std::ios::binary);
        out << body;
        out.flush();
        if (!out) throw Error("cannot write " + path.string());
    };
    put(f.markdown, render_markdown(r));
    put(f.csv, render_csv(r));
    put(f.json, render_json(r));
    put(f.accuracy, render_accuracy_by_level(r));
    return f;
}

}  // namespace mcguard
