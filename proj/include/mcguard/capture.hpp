#pragma once

// Ingestion of GOOSE / SV traffic from CSV feature exports and packet
// captures, plus the frame encoder used to write synthetic captures.
//
// Readers are sequential iterators over one file. Independent reader
// instances share nothing and can run on different threads.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcguard/msgmodel.hpp"

namespace mcguard {

enum class CaptureKind : uint8_t { CsvFile, PcapFile };
enum class ProtocolHint : uint8_t { Goose, Sv, Auto };

ProtocolHint parse_protocol_hint(std::string_view text);

struct CaptureSource {
    CaptureKind kind = CaptureKind::CsvFile;
    std::filesystem::path path;
    ProtocolHint protocol_hint = ProtocolHint::Auto;
};

// frames_total == frames_decoded + frames_skipped + decode_errors after every
// call to next(). Monotonicity warnings are counted separately: they flag a
// negative time delta inside one stream and never drop the message.
struct FrameDecodeStats {
    uint64_t frames_total = 0;
    uint64_t frames_decoded = 0;
    uint64_t frames_skipped = 0;
    uint64_t decode_errors = 0;
    uint64_t monotonicity_warnings = 0;

    bool balanced() const {
        return frames_total == frames_decoded + frames_skipped + decode_errors;
    }
};

struct RowError {
    uint64_t line = 0;  // 1-based line (CSV) or record ordinal (pcap)
    std::string message;
};

// Tracks the last timestamp per stream and counts backwards steps.
class MonotonicityTracker {
public:
    // Returns true when `m` is earlier than the previous message of its stream.
    bool observe(const Message& m);

private:
    std::unordered_map<StreamKey, int64_t, StreamKeyHash> last_;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

// Canonical column names. `time_us` is optional: when present it carries the
// exact microsecond value and `time` keeps the textual form as captured.
namespace csv_columns {
inline constexpr const char* kTime = "time";
inline constexpr const char* kTimeUs = "time_us";
inline constexpr const char* kDm = "DM";
inline constexpr const char* kSm = "SM";
inline constexpr const char* kType = "type";
inline constexpr const char* kAppid = "appid";
inline constexpr const char* kDataset = "dataset";
inline constexpr const char* kGoid = "goid";
inline constexpr const char* kStnum = "stnum";
inline constexpr const char* kSqnum = "sqnum";
inline constexpr const char* kData1 = "data1";
inline constexpr const char* kData2 = "data2";
inline constexpr const char* kSvid = "svid";
inline constexpr const char* kSmpcnt = "smpcnt";
}  // namespace csv_columns

struct CsvOptions {
    // canonical column name -> header text in the file (case-insensitive).
    std::map<std::string, std::string> column_names;
    // canonical column name -> 10 or 16. Defaults: type = 16, everything else 10.
    // A "0x" prefix always selects hex.
    std::map<std::string, int> radix;
};

class CsvReader {
public:
    CsvReader(const CaptureSource& source, CsvOptions options = {});
    CsvReader(std::unique_ptr<std::istream> in, ProtocolHint hint, CsvOptions options = {});

    // Next successfully parsed message, in file order. Rows that fail to parse
    // are recorded in errors() and skipped. seq_index is the 0-based data-row
    // ordinal, so it reads 0,1,2,... for a clean file.
    std::optional<Message> next();

    const FrameDecodeStats& stats() const { return stats_; }
    const std::vector<RowError>& errors() const { return errors_; }

private:
    void read_header();
    Message parse_row(const std::vector<std::string>& cells, Protocol protocol, uint64_t seq) const;
    const std::string& cell(const std::vector<std::string>& cells, const char* name) const;
    bool has_column(const char* name) const;
    uint64_t parse_uint(const std::vector<std::string>& cells, const char* name) const;

    std::unique_ptr<std::istream> in_;
    ProtocolHint hint_;
    CsvOptions options_;
    std::map<std::string, size_t> index_;  // lower-cased canonical -> column
    FrameDecodeStats stats_;
    std::vector<RowError> errors_;
    MonotonicityTracker monotonic_;
    uint64_t line_ = 0;
    uint64_t row_ = 0;
};

// Splits one CSV record (RFC 4180 quoting). Returns false on an unterminated quote.
bool split_csv_line(const std::string& line, std::vector<std::string>& out);
std::string csv_escape(const std::string& field);

std::vector<Message> read_csv(const CaptureSource& source, const CsvOptions& options = {},
                              FrameDecodeStats* stats = nullptr, std::vector<RowError>* errors = nullptr);

// Canonical header and row rendering used by exports.
std::string csv_header(Protocol p);
std::string csv_row(const Message& m);

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

struct EncodeOptions {
    std::optional<uint16_t> vlan_tci;  // emits an 802.1Q tag when set
};

// Ethernet frame carrying the IEC 61850 header and a BER-encoded APDU. Throws
// EncodeError when a field exceeds its wire range.
std::vector<uint8_t> encode_frame(const Message& m, const EncodeOptions& options = {});

enum class DecodeStatus : uint8_t { Decoded, Skipped, Error };

struct FrameDecodeResult {
    DecodeStatus status = DecodeStatus::Error;
    std::optional<Message> message;
    std::string error;
};

// Never throws on malformed input; the timestamp is rendered with the
// protocol's native number of fractional digits.
FrameDecodeResult decode_frame(std::span<const uint8_t> frame, int64_t micros_of_day, uint64_t seq_index,
                               ProtocolHint hint = ProtocolHint::Auto);

// ---------------------------------------------------------------------------
// Packet captures (classic pcap and pcapng, Ethernet link type)
// ---------------------------------------------------------------------------

class PcapReader {
public:
    explicit PcapReader(const CaptureSource& source);
    // Throws FormatError when the container header is not recognised.
    PcapReader(std::vector<uint8_t> bytes, ProtocolHint hint);

    std::optional<Message> next();

    const FrameDecodeStats& stats() const { return stats_; }
    const std::vector<RowError>& errors() const { return errors_; }

private:
    struct RawRecord {
        std::span<const uint8_t> data;
        int64_t micros_of_day = 0;
        bool ethernet = true;
    };

    void read_container_header();
    std::optional<RawRecord> next_classic();
    std::optional<RawRecord> next_ng();
    uint16_t u16(size_t at) const;
    uint32_t u32(size_t at) const;

    std::vector<uint8_t> bytes_;
    ProtocolHint hint_;
    bool ng_ = false;
    bool swapped_ = false;
    bool nanos_ = false;
    uint32_t classic_linktype_ = 1;
    struct Interface {
        uint16_t linktype = 1;
        uint64_t ticks_per_second = 1'000'000;
    };
    std::vector<Interface> interfaces_;
    size_t pos_ = 0;
    uint64_t record_ = 0;
    FrameDecodeStats stats_;
    std::vector<RowError> errors_;
    MonotonicityTracker monotonic_;
};

std::vector<Message> read_pcap(const CaptureSource& source, FrameDecodeStats* stats = nullptr,
                               std::vector<RowError>* errors = nullptr);

// Dispatches on source.kind.
std::vector<Message> read_capture(const CaptureSource& source, const CsvOptions& csv = {},
                                  FrameDecodeStats* stats = nullptr, std::vector<RowError>* errors = nullptr);

// Classic microsecond pcap, link type Ethernet. Record timestamps are the
// message time of day on 1970-01-01.
class PcapWriter {
public:
    explicit PcapWriter(const std::filesystem::path& path);

    void write(const Message& m, const EncodeOptions& options = {});
    void write_frame(std::span<const uint8_t> frame, int64_t micros_of_day);

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

}  // namespace mcguard
