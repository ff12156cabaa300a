#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "mcguard/capture.hpp"
#include "mcguard/error.hpp"

namespace mcguard {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

const char* const kCommonColumns[] = {csv_columns::kTime, csv_columns::kDm, csv_columns::kSm,
                                      csv_columns::kType, csv_columns::kAppid};
const char* const kGooseColumns[] = {csv_columns::kDataset, csv_columns::kGoid,  csv_columns::kStnum,
                                     csv_columns::kSqnum,   csv_columns::kData1, csv_columns::kData2};
const char* const kSvColumns[] = {csv_columns::kSvid, csv_columns::kSmpcnt};
const char* const kAllColumns[] = {
    csv_columns::kTime,  csv_columns::kTimeUs, csv_columns::kDm,    csv_columns::kSm,
    csv_columns::kType,  csv_columns::kAppid,  csv_columns::kDataset, csv_columns::kGoid,
    csv_columns::kStnum, csv_columns::kSqnum,  csv_columns::kData1, csv_columns::kData2,
    csv_columns::kSvid,  csv_columns::kSmpcnt};

uint64_t parse_unsigned(std::string_view text, int radix) {
    auto t = trim(text);
    if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
        t.remove_prefix(2);
        radix = 16;
    }
    uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value, radix);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw FormatError("not an unsigned integer", std::string(text));
    }
    return value;
}

uint8_t parse_bit(std::string_view text) {
    const auto t = to_lower(trim(text));
    if (t == "0" || t == "false") return 0;
    if (t == "1" || t == "true") return 1;
    throw FormatError("not a binary value", std::string(text));
}

}  // namespace

ProtocolHint parse_protocol_hint(std::string_view text) {
    const auto t = to_lower(text);
    if (t == "goose") return ProtocolHint::Goose;
    if (t == "sv") return ProtocolHint::Sv;
    if (t == "auto") return ProtocolHint::Auto;
    throw ConfigError("unknown protocol hint '" + std::string(text) + "'");
}

bool MonotonicityTracker::observe(const Message& m) {
    const auto t = time_of(m).micros_since_midnight;
    auto [it, inserted] = last_.try_emplace(stream_key_of(m), t);
    if (inserted) return false;
    const bool backwards = t < it->second;
    it->second = t;
    return backwards;
}

bool split_csv_line(const std::string& line, std::vector<std::string>& out) {
    out.clear();
    std::string field;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return !quoted;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

CsvReader::CsvReader(const CaptureSource& source, CsvOptions options)
    : hint_(source.protocol_hint), options_(std::move(options)) {
    auto file = std::make_unique<std::ifstream>(source.path);
    if (!*file) throw Error("cannot open CSV file " + source.path.string());
    in_ = std::move(file);
    read_header();
}

CsvReader::CsvReader(std::unique_ptr<std::istream> in, ProtocolHint hint, CsvOptions options)
    : in_(std::move(in)), hint_(hint), options_(std::move(options)) {
    read_header();
}

void CsvReader::read_header() {
    std::string line;
    if (!std::getline(*in_, line)) throw SchemaError("CSV input is empty (header row required)");
    ++line_;
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    std::vector<std::string> names;
    split_csv_line(line, names);

    std::map<std::string, size_t> by_header;
    for (size_t i = 0; i < names.size(); ++i) by_header.emplace(to_lower(trim(names[i])), i);

    for (const char* canonical : kAllColumns) {
        auto mapped = options_.column_names.find(canonical);
        const std::string header = mapped != options_.column_names.end() ? mapped->second : canonical;
        if (auto it = by_header.find(to_lower(header)); it != by_header.end()) {
            index_[to_lower(canonical)] = it->second;
        }
    }

    const auto require = [&](auto const& cols, const char* what) {
        for (const char* c : cols) {
            if (!has_column(c)) {
                throw SchemaError(std::string("missing mandatory ") + what + " column '" + c + "'");
            }
        }
    };
    require(kCommonColumns, "common");
    const auto complete = [&](auto const& cols) {
        return std::all_of(std::begin(cols), std::end(cols), [&](const char* c) { return has_column(c); });
    };
    if (hint_ == ProtocolHint::Goose) require(kGooseColumns, "GOOSE");
    if (hint_ == ProtocolHint::Sv) require(kSvColumns, "SV");
    if (hint_ == ProtocolHint::Auto && !complete(kGooseColumns) && !complete(kSvColumns)) {
        throw SchemaError("header names neither the GOOSE nor the SV column set");
    }
}

bool CsvReader::has_column(const char* name) const { return index_.count(to_lower(name)) != 0; }

const std::string& CsvReader::cell(const std::vector<std::string>& cells, const char* name) const {
    auto it = index_.find(to_lower(name));
    if (it == index_.end()) throw SchemaError(std::string("column '") + name + "' not present");
    if (it->second >= cells.size()) throw FormatError("row too short for column", name);
    return cells[it->second];
}

uint64_t CsvReader::parse_uint(const std::vector<std::string>& cells, const char* name) const {
    int radix = std::string_view(name) == csv_columns::kType ? 16 : 10;
    if (auto it = options_.radix.find(name); it != options_.radix.end()) radix = it->second;
    return parse_unsigned(cell(cells, name), radix);
}

Message CsvReader::parse_row(const std::vector<std::string>& cells, Protocol protocol, uint64_t seq) const {
    Timestamp ts = parse_timestamp(trim(cell(cells, csv_columns::kTime)));
    if (has_column(csv_columns::kTimeUs) && !trim(cell(cells, csv_columns::kTimeUs)).empty()) {
        const auto micros = parse_uint(cells, csv_columns::kTimeUs);
        if (micros >= static_cast<uint64_t>(Timestamp::kMicrosPerDay) ||
            format_timestamp(static_cast<int64_t>(micros), ts.fractional_digits) != ts.raw_text) {
            throw FormatError("time_us disagrees with time", cell(cells, csv_columns::kTimeUs));
        }
        ts.micros_since_midnight = static_cast<int64_t>(micros);
    }
    const auto dm = parse_mac(cell(cells, csv_columns::kDm), MacRole::Destination);
    const auto sm = parse_mac(cell(cells, csv_columns::kSm), MacRole::Source);
    const auto type = parse_uint(cells, csv_columns::kType);
    const auto appid = parse_uint(cells, csv_columns::kAppid);
    if (type > 0xFFFF) throw FormatError("ethertype out of range", cell(cells, csv_columns::kType));
    if (appid > 0xFFFFFFFFULL) throw FormatError("appid out of range", cell(cells, csv_columns::kAppid));

    if (protocol == Protocol::Goose) {
        GooseMessage g;
        g.time = std::move(ts);
        g.dm = dm;
        g.sm = sm;
        g.ethertype = static_cast<uint16_t>(type);
        g.appid = static_cast<uint32_t>(appid);
        g.dataset = cell(cells, csv_columns::kDataset);
        g.goid = cell(cells, csv_columns::kGoid);
        g.stnum = parse_uint(cells, csv_columns::kStnum);
        g.sqnum = parse_uint(cells, csv_columns::kSqnum);
        g.data1 = parse_bit(cell(cells, csv_columns::kData1));
        g.data2 = parse_bit(cell(cells, csv_columns::kData2));
        g.seq_index = seq;
        return g;
    }
    SvMessage s;
    s.time = std::move(ts);
    s.dm = dm;
    s.sm = sm;
    s.ethertype = static_cast<uint16_t>(type);
    s.appid = static_cast<uint32_t>(appid);
    s.svid = cell(cells, csv_columns::kSvid);
    s.smpcnt = parse_uint(cells, csv_columns::kSmpcnt);
    s.seq_index = seq;
    return s;
}

std::optional<Message> CsvReader::next() {
    std::string line;
    std::vector<std::string> cells;
    while (std::getline(*in_, line)) {
        ++line_;
        const auto first_line = line_;
        // Quoted fields may span physical lines.
        while (!split_csv_line(line, cells)) {
            std::string more;
            if (!std::getline(*in_, more)) break;
            ++line_;
            line += '\n';
            line += more;
        }
        if (trim(line).empty()) continue;

        ++stats_.frames_total;
        const uint64_t row = row_++;
        try {
            Protocol protocol;
            if (hint_ == ProtocolHint::Goose) {
                protocol = Protocol::Goose;
            } else if (hint_ == ProtocolHint::Sv) {
                protocol = Protocol::Sv;
            } else {
                const auto type = parse_uint(cells, csv_columns::kType);
                if (type == kGooseEthertype) {
                    protocol = Protocol::Goose;
                } else if (type == kSvEthertype) {
                    protocol = Protocol::Sv;
                } else {
                    ++stats_.frames_skipped;
                    continue;
                }
            }
            Message m = parse_row(cells, protocol, row);
            ++stats_.frames_decoded;
            if (monotonic_.observe(m)) ++stats_.monotonicity_warnings;
            return m;
        } catch (const Error& e) {
            ++stats_.decode_errors;
            errors_.push_back({first_line, e.what()});
        }
    }
    return std::nullopt;
}

std::vector<Message> read_csv(const CaptureSource& source, const CsvOptions& options, FrameDecodeStats* stats,
                              std::vector<RowError>* errors) {
    CsvReader reader(source, options);
    std::vector<Message> out;
    while (auto m = reader.next()) out.push_back(std::move(*m));
    if (stats) *stats = reader.stats();
    if (errors) *errors = reader.errors();
    return out;
}

std::string csv_header(Protocol p) {
    if (p == Protocol::Goose) return "time,time_us,DM,SM,type,appid,dataset,goid,stnum,sqnum,data1,data2";
    return "time,time_us,DM,SM,type,appid,svid,smpcnt";
}

std::string csv_row(const Message& m) {
    std::ostringstream os;
    const auto common = [&os](const auto& x) {
        char type[8];
        std::snprintf(type, sizeof type, "%04x", x.ethertype);
        os << csv_escape(x.time.raw_text) << ',' << x.time.micros_since_midnight << ',' << x.dm.to_string() << ','
           << x.sm.to_string() << ',' << type << ',' << x.appid;
    };
    if (const auto* g = std::get_if<GooseMessage>(&m)) {
        common(*g);
        os << ',' << csv_escape(g->dataset) << ',' << csv_escape(g->goid) << ',' << g->stnum << ',' << g->sqnum
           << ',' << int(g->data1) << ',' << int(g->data2);
    } else {
        const auto& s = std::get<SvMessage>(m);
        common(s);
        os << ',' << csv_escape(s.svid) << ',' << s.smpcnt;
    }
    return os.str();
}

std::vector<Message> read_capture(const CaptureSource& source, const CsvOptions& csv, FrameDecodeStats* stats,
                                  std::vector<RowError>* errors) {
    if (source.kind == CaptureKind::CsvFile) return read_csv(source, csv, stats, errors);
    return read_pcap(source, stats, errors);
}

}  // namespace mcguard
