#include <algorithm>
#include <cstring>
#include <iterator>

#include "mcguard/capture.hpp"
#include "mcguard/error.hpp"

namespace mcguard {

namespace {

constexpr uint16_t kVlanEthertype = 0x8100;
constexpr size_t kMinFrame = 60;
constexpr uint32_t kMaxGooseCounter = 0xFFFFFFFFu;

// BER tags used by the GOOSE and SV APDUs.
namespace tag {
constexpr uint8_t kGoosePdu = 0x61;
constexpr uint8_t kGocbRef = 0x80;
constexpr uint8_t kTimeAllowedToLive = 0x81;
constexpr uint8_t kDatSet = 0x82;
constexpr uint8_t kGoId = 0x83;
constexpr uint8_t kT = 0x84;
constexpr uint8_t kStNum = 0x85;
constexpr uint8_t kSqNum = 0x86;
constexpr uint8_t kSimulation = 0x87;
constexpr uint8_t kConfRev = 0x88;
constexpr uint8_t kNdsCom = 0x89;
constexpr uint8_t kNumEntries = 0x8A;
constexpr uint8_t kAllData = 0xAB;
constexpr uint8_t kBoolean = 0x83;

constexpr uint8_t kSavPdu = 0x60;
constexpr uint8_t kNoAsdu = 0x80;
constexpr uint8_t kSeqAsdu = 0xA2;
constexpr uint8_t kAsdu = 0x30;
constexpr uint8_t kSvId = 0x80;
constexpr uint8_t kSmpCnt = 0x82;
constexpr uint8_t kSvConfRev = 0x83;
constexpr uint8_t kSmpSynch = 0x85;
constexpr uint8_t kSeqData = 0x87;
}  // namespace tag

// --- BER writing ------------------------------------------------------------

void put_length(std::vector<uint8_t>& out, size_t len) {
    if (len < 0x80) {
        out.push_back(static_cast<uint8_t>(len));
        return;
    }
    uint8_t tmp[sizeof(size_t)];
    int n = 0;
    while (len > 0) {
        tmp[n++] = static_cast<uint8_t>(len & 0xFF);
        len >>= 8;
    }
    out.push_back(static_cast<uint8_t>(0x80 | n));
    while (n > 0) out.push_back(tmp[--n]);
}

void put_tlv(std::vector<uint8_t>& out, uint8_t t, std::span<const uint8_t> value) {
    out.push_back(t);
    put_length(out, value.size());
    out.insert(out.end(), value.begin(), value.end());
}

void put_tlv(std::vector<uint8_t>& out, uint8_t t, const std::string& value) {
    put_tlv(out, t, std::span(reinterpret_cast<const uint8_t*>(value.data()), value.size()));
}

// Minimal two's-complement encoding of a non-negative integer.
std::vector<uint8_t> ber_unsigned(uint64_t v) {
    std::vector<uint8_t> bytes;
    do {
        bytes.push_back(static_cast<uint8_t>(v & 0xFF));
        v >>= 8;
    } while (v > 0);
    if (bytes.back() & 0x80) bytes.push_back(0x00);
    std::reverse(bytes.begin(), bytes.end());
    return bytes;
}

void put_be16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

// --- BER reading ------------------------------------------------------------

struct Tlv {
    uint8_t tag = 0;
    std::span<const uint8_t> value;
};

// Bounds-checked cursor over a byte span. Every read fails softly.
class Cursor {
public:
    explicit Cursor(std::span<const uint8_t> data) : data_(data) {}

    bool empty() const { return pos_ >= data_.size(); }

    bool next(Tlv& out) {
        if (pos_ + 2 > data_.size()) return false;
        out.tag = data_[pos_++];
        if ((out.tag & 0x1F) == 0x1F) return false;  // multi-byte tags are not used here
        size_t len = data_[pos_++];
        if (len & 0x80) {
            const size_t n = len & 0x7F;
            if (n == 0 || n > 4 || pos_ + n > data_.size()) return false;
            len = 0;
            for (size_t i = 0; i < n; ++i) len = (len << 8) | data_[pos_++];
        }
        if (len > data_.size() - pos_) return false;
        out.value = data_.subspan(pos_, len);
        pos_ += len;
        return true;
    }

private:
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

bool read_unsigned(std::span<const uint8_t> v, uint64_t& out) {
    if (v.empty() || v.size() > 9) return false;
    if (v[0] & 0x80) return false;  // negative
    if (v.size() == 9 && v[0] != 0) return false;
    out = 0;
    for (auto b : v) out = (out << 8) | b;
    return true;
}

std::string as_text(std::span<const uint8_t> v) { return std::string(v.begin(), v.end()); }

FrameDecodeResult fail(std::string why) { return {DecodeStatus::Error, std::nullopt, std::move(why)}; }

FrameDecodeResult decode_goose(std::span<const uint8_t> apdu, GooseMessage g) {
    Cursor outer(apdu);
    Tlv pdu;
    if (!outer.next(pdu) || pdu.tag != tag::kGoosePdu) return fail("missing goosePdu");
    Cursor c(pdu.value);
    Tlv t;
    bool have_goid = false, have_gocb = false, have_dataset = false, have_st = false, have_sq = false;
    std::string gocb_ref;
    while (!c.empty()) {
        if (!c.next(t)) return fail("truncated goosePdu element");
        switch (t.tag) {
            case tag::kGocbRef:
                gocb_ref = as_text(t.value);
                have_gocb = true;
                break;
            case tag::kDatSet:
                g.dataset = as_text(t.value);
                have_dataset = true;
                break;
            case tag::kGoId:
                g.goid = as_text(t.value);
                have_goid = true;
                break;
            case tag::kStNum:
                if (!read_unsigned(t.value, g.stnum)) return fail("bad stNum");
                have_st = true;
                break;
            case tag::kSqNum:
                if (!read_unsigned(t.value, g.sqnum)) return fail("bad sqNum");
                have_sq = true;
                break;
            case tag::kAllData: {
                Cursor d(t.value);
                Tlv e;
                int booleans = 0;
                while (!d.empty()) {
                    if (!d.next(e)) return fail("truncated allData");
                    if (e.tag == tag::kBoolean && e.value.size() == 1 && booleans < 2) {
                        (booleans == 0 ? g.data1 : g.data2) = e.value[0] ? 1 : 0;
                        ++booleans;
                    }
                }
                break;
            }
            default:
                break;  // unknown or unmodeled element: skipped by length
        }
    }
    if (!have_goid && have_gocb) {
        g.goid = gocb_ref;
        have_goid = true;
    }
    if (!have_goid || !have_dataset || !have_st || !have_sq) return fail("goosePdu lacks mandatory fields");
    return {DecodeStatus::Decoded, Message{std::move(g)}, {}};
}

FrameDecodeResult decode_sv(std::span<const uint8_t> apdu, SvMessage s) {
    Cursor outer(apdu);
    Tlv pdu;
    if (!outer.next(pdu) || pdu.tag != tag::kSavPdu) return fail("missing savPdu");
    Cursor c(pdu.value);
    Tlv t;
    while (!c.empty()) {
        if (!c.next(t)) return fail("truncated savPdu element");
        if (t.tag != tag::kSeqAsdu) continue;
        Cursor seq(t.value);
        Tlv asdu;
        if (!seq.next(asdu) || asdu.tag != tag::kAsdu) return fail("seqASDU without ASDU");
        Cursor a(asdu.value);
        Tlv f;
        bool have_id = false, have_cnt = false;
        while (!a.empty()) {
            if (!a.next(f)) return fail("truncated ASDU element");
            if (f.tag == tag::kSvId) {
                s.svid = as_text(f.value);
                have_id = true;
            } else if (f.tag == tag::kSmpCnt) {
                if (f.value.empty() || f.value.size() > 4) return fail("bad smpCnt");
                s.smpcnt = 0;
                for (auto b : f.value) s.smpcnt = (s.smpcnt << 8) | b;
                have_cnt = true;
            }
        }
        if (!have_id || !have_cnt) return fail("ASDU lacks svID or smpCnt");
        return {DecodeStatus::Decoded, Message{std::move(s)}, {}};
    }
    return fail("savPdu without seqASDU");
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

std::vector<uint8_t> encode_frame(const Message& m, const EncodeOptions& options) {
    std::vector<uint8_t> apdu;
    std::vector<uint8_t> pdu;
    const auto& common = std::visit(
        [](const auto& x) -> std::tuple<MacAddress, MacAddress, uint16_t, uint32_t> {
            return {x.dm, x.sm, x.ethertype, x.appid};
        },
        m);
    const auto& [dm, sm, ethertype, appid] = common;
    if (appid > 0xFFFF) throw EncodeError("appid " + std::to_string(appid) + " exceeds 16 bits");

    if (const auto* g = std::get_if<GooseMessage>(&m)) {
        if (g->stnum > kMaxGooseCounter) throw EncodeError("stNum exceeds INT32U");
        if (g->sqnum > kMaxGooseCounter) throw EncodeError("sqNum exceeds INT32U");
        if (g->data1 > 1 || g->data2 > 1) throw EncodeError("data1/data2 must be binary");
        put_tlv(pdu, tag::kGocbRef, g->goid + "$GO$gcb");
        put_tlv(pdu, tag::kTimeAllowedToLive, ber_unsigned(2000));
        put_tlv(pdu, tag::kDatSet, g->dataset);
        put_tlv(pdu, tag::kGoId, g->goid);
        // UtcTime: seconds (4), fraction of second (3), quality (1).
        const int64_t micros = g->time.micros_since_midnight;
        const auto secs = static_cast<uint32_t>(micros / 1'000'000);
        const auto frac = static_cast<uint32_t>(((micros % 1'000'000) << 24) / 1'000'000);
        const uint8_t utc[8] = {static_cast<uint8_t>(secs >> 24), static_cast<uint8_t>(secs >> 16),
                                static_cast<uint8_t>(secs >> 8),  static_cast<uint8_t>(secs),
                                static_cast<uint8_t>(frac >> 16), static_cast<uint8_t>(frac >> 8),
                                static_cast<uint8_t>(frac),       0x0A};
        put_tlv(pdu, tag::kT, std::span<const uint8_t>(utc));
        put_tlv(pdu, tag::kStNum, ber_unsigned(g->stnum));
        put_tlv(pdu, tag::kSqNum, ber_unsigned(g->sqnum));
        put_tlv(pdu, tag::kSimulation, ber_unsigned(0));
        put_tlv(pdu, tag::kConfRev, ber_unsigned(1));
        put_tlv(pdu, tag::kNdsCom, ber_unsigned(0));
        put_tlv(pdu, tag::kNumEntries, ber_unsigned(2));
        std::vector<uint8_t> all;
        const uint8_t d1[1] = {g->data1}, d2[1] = {g->data2};
        put_tlv(all, tag::kBoolean, std::span<const uint8_t>(d1));
        put_tlv(all, tag::kBoolean, std::span<const uint8_t>(d2));
        put_tlv(pdu, tag::kAllData, all);
        put_tlv(apdu, tag::kGoosePdu, pdu);
    } else {
        const auto& s = std::get<SvMessage>(m);
        if (s.smpcnt > 0xFFFF) throw EncodeError("smpCnt " + std::to_string(s.smpcnt) + " exceeds INT16U");
        std::vector<uint8_t> asdu;
        put_tlv(asdu, tag::kSvId, s.svid);
        const uint8_t cnt[2] = {static_cast<uint8_t>(s.smpcnt >> 8), static_cast<uint8_t>(s.smpcnt)};
        put_tlv(asdu, tag::kSmpCnt, std::span<const uint8_t>(cnt));
        const uint8_t conf[4] = {0, 0, 0, 1};
        put_tlv(asdu, tag::kSvConfRev, std::span<const uint8_t>(conf));
        const uint8_t synch[1] = {2};
        put_tlv(asdu, tag::kSmpSynch, std::span<const uint8_t>(synch));
        // Eight INT32 samples with quality words; electrical payload is filler.
        const std::vector<uint8_t> samples(64, 0);
        put_tlv(asdu, tag::kSeqData, samples);
        std::vector<uint8_t> seq;
        put_tlv(seq, tag::kAsdu, asdu);
        const uint8_t one[1] = {1};
        put_tlv(pdu, tag::kNoAsdu, std::span<const uint8_t>(one));
        put_tlv(pdu, tag::kSeqAsdu, seq);
        put_tlv(apdu, tag::kSavPdu, pdu);
    }

    const size_t length = 8 + apdu.size();
    if (length > 0xFFFF) throw EncodeError("APDU too large for the 16-bit length field");

    std::vector<uint8_t> frame;
    frame.reserve(26 + apdu.size());
    frame.insert(frame.end(), dm.octets.begin(), dm.octets.end());
    frame.insert(frame.end(), sm.octets.begin(), sm.octets.end());
    if (options.vlan_tci) {
        put_be16(frame, kVlanEthertype);
        put_be16(frame, *options.vlan_tci);
    }
    put_be16(frame, ethertype);
    put_be16(frame, static_cast<uint16_t>(appid));
    put_be16(frame, static_cast<uint16_t>(length));
    put_be16(frame, 0);  // reserved 1
    put_be16(frame, 0);  // reserved 2
    frame.insert(frame.end(), apdu.begin(), apdu.end());
    if (frame.size() < kMinFrame) frame.resize(kMinFrame, 0);
    return frame;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

FrameDecodeResult decode_frame(std::span<const uint8_t> frame, int64_t micros_of_day, uint64_t seq_index,
                               ProtocolHint hint) {
    if (frame.size() < 14) return fail("frame shorter than an Ethernet header");
    MacAddress dm, sm;
    std::copy_n(frame.begin(), 6, dm.octets.begin());
    std::copy_n(frame.begin() + 6, 6, sm.octets.begin());
    size_t pos = 12;
    uint16_t ethertype = static_cast<uint16_t>(frame[pos] << 8 | frame[pos + 1]);
    pos += 2;
    if (ethertype == kVlanEthertype) {
        if (frame.size() < pos + 4) return fail("truncated VLAN tag");
        ethertype = static_cast<uint16_t>(frame[pos + 2] << 8 | frame[pos + 3]);
        pos += 4;
    }
    const bool goose = ethertype == kGooseEthertype;
    const bool sv = ethertype == kSvEthertype;
    if ((!goose && !sv) || (goose && hint == ProtocolHint::Sv) || (sv && hint == ProtocolHint::Goose)) {
        return {DecodeStatus::Skipped, std::nullopt, {}};
    }
    if (frame.size() < pos + 8) return fail("truncated IEC 61850 header");
    const uint16_t appid = static_cast<uint16_t>(frame[pos] << 8 | frame[pos + 1]);
    const uint16_t length = static_cast<uint16_t>(frame[pos + 2] << 8 | frame[pos + 3]);
    if (length < 8) return fail("IEC 61850 length below header size");
    if (frame.size() < pos + length) return fail("frame shorter than IEC 61850 length");
    const auto apdu = frame.subspan(pos + 8, length - 8);

    if (micros_of_day < 0 || micros_of_day >= Timestamp::kMicrosPerDay) return fail("timestamp out of range");
    const int digits = required_time_digits(goose ? Protocol::Goose : Protocol::Sv);
    // Keep the full microsecond value even when the text form is shorter.
    Timestamp ts{micros_of_day, format_timestamp(micros_of_day, digits), digits};

    if (goose) {
        GooseMessage g;
        g.time = std::move(ts);
        g.dm = dm;
        g.sm = sm;
        g.ethertype = ethertype;
        g.appid = appid;
        g.seq_index = seq_index;
        return decode_goose(apdu, std::move(g));
    }
    SvMessage s;
    s.time = std::move(ts);
    s.dm = dm;
    s.sm = sm;
    s.ethertype = ethertype;
    s.appid = appid;
    s.seq_index = seq_index;
    return decode_sv(apdu, std::move(s));
}

// ---------------------------------------------------------------------------
// Capture containers
// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kPcapMagicMicros = 0xA1B2C3D4;
constexpr uint32_t kPcapMagicNanos = 0xA1B23C4D;
constexpr uint32_t kNgSectionHeader = 0x0A0D0D0A;
constexpr uint32_t kNgByteOrder = 0x1A2B3C4D;
constexpr uint32_t kNgInterface = 1;
constexpr uint32_t kNgObsoletePacket = 2;
constexpr uint32_t kNgSimplePacket = 3;
constexpr uint32_t kNgEnhancedPacket = 6;
constexpr uint16_t kLinkEthernet = 1;

uint32_t bswap32(uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xFF00) | ((v << 8) & 0xFF0000) | (v << 24);
}

int64_t time_of_day(uint64_t seconds, uint64_t micros) {
    return static_cast<int64_t>((seconds % 86'400) * 1'000'000 + micros % 1'000'000);
}

std::vector<uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open capture file " + path.string());
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

PcapReader::PcapReader(const CaptureSource& source) : PcapReader(slurp(source.path), source.protocol_hint) {}

PcapReader::PcapReader(std::vector<uint8_t> bytes, ProtocolHint hint) : bytes_(std::move(bytes)), hint_(hint) {
    read_container_header();
}

uint16_t PcapReader::u16(size_t at) const {
    const uint16_t le = static_cast<uint16_t>(bytes_[at] | bytes_[at + 1] << 8);
    return swapped_ ? static_cast<uint16_t>((le >> 8) | (le << 8)) : le;
}

uint32_t PcapReader::u32(size_t at) const {
    const uint32_t le = static_cast<uint32_t>(bytes_[at]) | static_cast<uint32_t>(bytes_[at + 1]) << 8 |
                        static_cast<uint32_t>(bytes_[at + 2]) << 16 | static_cast<uint32_t>(bytes_[at + 3]) << 24;
    return swapped_ ? bswap32(le) : le;
}

void PcapReader::read_container_header() {
    if (bytes_.size() < 4) throw FormatError("capture too short for a container header", std::to_string(bytes_.size()));
    swapped_ = false;
    const uint32_t magic = u32(0);
    if (magic == kNgSectionHeader) {
        ng_ = true;
        if (bytes_.size() < 12) throw FormatError("truncated pcapng section header", "SHB");
        const uint32_t bom = u32(8);
        if (bom == bswap32(kNgByteOrder)) swapped_ = true;
        else if (bom != kNgByteOrder) throw FormatError("bad pcapng byte-order magic", std::to_string(bom));
        pos_ = 0;  // the SHB itself is consumed by next_ng()
        return;
    }
    if (magic == bswap32(kPcapMagicMicros) || magic == bswap32(kPcapMagicNanos)) swapped_ = true;
    const uint32_t m = u32(0);
    if (m != kPcapMagicMicros && m != kPcapMagicNanos) {
        throw FormatError("unrecognised capture magic", std::to_string(magic));
    }
    if (bytes_.size() < 24) throw FormatError("truncated pcap global header", std::to_string(bytes_.size()));
    nanos_ = m == kPcapMagicNanos;
    classic_linktype_ = u32(20) & 0x0FFFFFFF;
    pos_ = 24;
}

std::optional<PcapReader::RawRecord> PcapReader::next_classic() {
    if (pos_ >= bytes_.size()) return std::nullopt;
    ++stats_.frames_total;
    ++record_;
    if (pos_ + 16 > bytes_.size()) {
        ++stats_.decode_errors;
        errors_.push_back({record_, "truncated record header"});
        pos_ = bytes_.size();
        return std::nullopt;
    }
    const uint32_t sec = u32(pos_);
    const uint32_t frac = u32(pos_ + 4);
    const uint32_t incl = u32(pos_ + 8);
    pos_ += 16;
    if (incl > bytes_.size() - pos_) {
        ++stats_.decode_errors;
        errors_.push_back({record_, "record data runs past end of file"});
        pos_ = bytes_.size();
        return std::nullopt;
    }
    RawRecord r;
    r.data = std::span<const uint8_t>(bytes_).subspan(pos_, incl);
    r.micros_of_day = time_of_day(sec, nanos_ ? frac / 1000 : frac);
    r.ethernet = classic_linktype_ == kLinkEthernet;
    pos_ += incl;
    return r;
}

std::optional<PcapReader::RawRecord> PcapReader::next_ng() {
    while (pos_ + 12 <= bytes_.size()) {
        uint32_t type = u32(pos_);
        if (type == kNgSectionHeader) {
            // A new section may switch byte order.
            const uint32_t bom_le = static_cast<uint32_t>(bytes_[pos_ + 8]) |
                                    static_cast<uint32_t>(bytes_[pos_ + 9]) << 8 |
                                    static_cast<uint32_t>(bytes_[pos_ + 10]) << 16 |
                                    static_cast<uint32_t>(bytes_[pos_ + 11]) << 24;
            swapped_ = bom_le != kNgByteOrder;
            interfaces_.clear();
        }
        const uint32_t len = u32(pos_ + 4);
        if (len < 12 || len % 4 != 0 || len > bytes_.size() - pos_) {
            ++stats_.frames_total;
            ++stats_.decode_errors;
            errors_.push_back({record_ + 1, "malformed pcapng block length"});
            pos_ = bytes_.size();
            return std::nullopt;
        }
        const size_t body = pos_ + 8;
        const size_t body_len = len - 12;
        const size_t block_end = pos_ + len;
        pos_ = block_end;

        if (type == kNgInterface) {
            Interface itf;
            if (body_len >= 8) {
                itf.linktype = u16(body);
                size_t opt = body + 8;
                while (opt + 4 <= body + body_len) {
                    const uint16_t code = u16(opt);
                    const uint16_t olen = u16(opt + 2);
                    if (code == 0 || opt + 4 + olen > body + body_len) break;
                    if (code == 9 && olen >= 1) {  // if_tsresol
                        const uint8_t v = bytes_[opt + 4];
                        const uint32_t exp = v & 0x7F;
                        uint64_t ticks = 1;
                        for (uint32_t i = 0; i < exp && ticks < (1ULL << 60) / 10; ++i) ticks *= (v & 0x80) ? 2 : 10;
                        itf.ticks_per_second = ticks;
                    }
                    opt += 4 + ((olen + 3u) & ~3u);
                }
            }
            interfaces_.push_back(itf);
            continue;
        }
        if (type != kNgEnhancedPacket && type != kNgSimplePacket && type != kNgObsoletePacket) continue;

        ++stats_.frames_total;
        ++record_;
        RawRecord r;
        uint32_t iface = 0;
        uint64_t ts = 0;
        size_t data_at = 0;
        uint32_t cap = 0;
        if (type == kNgSimplePacket) {
            if (body_len < 4) {
                ++stats_.decode_errors;
                errors_.push_back({record_, "truncated simple packet block"});
                continue;
            }
            cap = static_cast<uint32_t>(body_len - 4);
            cap = std::min(cap, u32(body));
            data_at = body + 4;
        } else {
            if (body_len < 20) {
                ++stats_.decode_errors;
                errors_.push_back({record_, "truncated packet block"});
                continue;
            }
            iface = type == kNgObsoletePacket ? u16(body) : u32(body);
            ts = static_cast<uint64_t>(u32(body + 4)) << 32 | u32(body + 8);
            cap = u32(body + 12);
            data_at = body + 20;
            if (cap > body_len - 20) {
                ++stats_.decode_errors;
                errors_.push_back({record_, "captured length exceeds block"});
                continue;
            }
        }
        if (iface >= interfaces_.size()) {
            ++stats_.decode_errors;
            errors_.push_back({record_, "packet references unknown interface"});
            continue;
        }
        const auto& itf = interfaces_[iface];
        const uint64_t secs = ts / itf.ticks_per_second;
        const uint64_t rem = ts % itf.ticks_per_second;
        const uint64_t micros = itf.ticks_per_second >= 1'000'000 ? rem / (itf.ticks_per_second / 1'000'000)
                                                                   : rem * (1'000'000 / itf.ticks_per_second);
        r.data = std::span<const uint8_t>(bytes_).subspan(data_at, cap);
        r.micros_of_day = time_of_day(secs, micros);
        r.ethernet = itf.linktype == kLinkEthernet;
        return r;
    }
    return std::nullopt;
}

std::optional<Message> PcapReader::next() {
    for (;;) {
        auto rec = ng_ ? next_ng() : next_classic();
        if (!rec) return std::nullopt;
        if (!rec->ethernet) {
            ++stats_.frames_skipped;
            continue;
        }
        auto result = decode_frame(rec->data, rec->micros_of_day, record_ - 1, hint_);
        switch (result.status) {
            case DecodeStatus::Decoded:
                ++stats_.frames_decoded;
                if (monotonic_.observe(*result.message)) ++stats_.monotonicity_warnings;
                return std::move(result.message);
            case DecodeStatus::Skipped:
                ++stats_.frames_skipped;
                break;
            case DecodeStatus::Error:
                ++stats_.decode_errors;
                errors_.push_back({record_, result.error});
                break;
        }
    }
}

std::vector<Message> read_pcap(const CaptureSource& source, FrameDecodeStats* stats, std::vector<RowError>* errors) {
    PcapReader reader(source);
    std::vector<Message> out;
    while (auto m = reader.next()) out.push_back(std::move(*m));
    if (stats) *stats = reader.stats();
    if (errors) *errors = reader.errors();
    return out;
}

PcapWriter::PcapWriter(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw Error("cannot create capture file " + path.string());
    const auto put32 = [this](uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); };
    const auto put16 = [this](uint16_t v) { out_.write(reinterpret_cast<const char*>(&v), 2); };
    put32(kPcapMagicMicros);
    put16(2);
    put16(4);
    put32(0);
    put32(0);
    put32(65535);
    put32(kLinkEthernet);
}

void PcapWriter::write(const Message& m, const EncodeOptions& options) {
    write_frame(encode_frame(m, options), time_of(m).micros_since_midnight);
}

void PcapWriter::write_frame(std::span<const uint8_t> frame, int64_t micros_of_day) {
    const uint32_t header[4] = {static_cast<uint32_t>(micros_of_day / 1'000'000),
                                static_cast<uint32_t>(micros_of_day % 1'000'000),
                                static_cast<uint32_t>(frame.size()), static_cast<uint32_t>(frame.size())};
    out_.write(reinterpret_cast<const char*>(header), sizeof header);
    out_.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
    if (!out_) throw Error("write failed for " + path_.string());
}

}  // namespace mcguard
