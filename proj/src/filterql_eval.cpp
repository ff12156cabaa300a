#include <algorithm>
#include <unordered_map>

#include "mcguard/error.hpp"
#include "mcguard/filterql.hpp"

namespace mcguard::filterql {

namespace {

enum class Col : uint8_t {
    Time, Dm, Sm, Type, Appid, Dataset, Goid, Stnum, Sqnum, Data1, Data2, Svid, Smpcnt,
    SeqIndex, IsFirst, IdentityConflict, TimeDigits, HistMaxStnum,
};

Col resolve(const std::string& name) {
    static const std::unordered_map<std::string, Col> names{
        {"time", Col::Time},       {"dm", Col::Dm},
        {"sm", Col::Sm},           {"type", Col::Type},
        {"appid", Col::Appid},     {"dataset", Col::Dataset},
        {"goid", Col::Goid},       {"stnum", Col::Stnum},
        {"sqnum", Col::Sqnum},     {"data1", Col::Data1},
        {"data2", Col::Data2},     {"svid", Col::Svid},
        {"smpcnt", Col::Smpcnt},   {"seq_index", Col::SeqIndex},
        {"is_first", Col::IsFirst}, {"identity_conflict", Col::IdentityConflict},
        {"time_digits", Col::TimeDigits}, {"hist_max_stnum", Col::HistMaxStnum},
    };
    auto it = names.find(name);
    if (it == names.end()) throw QueryTypeError("unknown column", name);
    return it->second;
}

// Expression with column names resolved once.
struct Node {
    ExprKind kind;
    int64_t number;
    std::string_view text;
    CmpOp op;
    Col col;
    std::vector<Node> args;
};

Node lower_expr(const Expr& e) {
    Node n{e.kind, e.number, e.text, e.op, Col::Time, {}};
    if (e.kind == ExprKind::Field || e.kind == ExprKind::Delta || e.kind == ExprKind::Prev ||
        e.kind == ExprKind::Lag)
        n.col = resolve(e.text);
    for (const auto& a : e.args) n.args.push_back(lower_expr(a));
    return n;
}

bool mentions_mac(const Node& n) {
    if ((n.kind == ExprKind::Field || n.kind == ExprKind::Delta || n.kind == ExprKind::Prev ||
         n.kind == ExprKind::Lag) &&
        (n.col == Col::Dm || n.col == Col::Sm))
        return true;
    return std::any_of(n.args.begin(), n.args.end(), mentions_mac);
}

struct Value {
    enum Kind : uint8_t { Null, Int, Bool, Text } kind = Null;
    int64_t i = 0;
    std::string_view s;

    static Value null() { return {}; }
    static Value integer(int64_t v) { return {Int, v, {}}; }
    static Value boolean(bool b) { return {Bool, b ? 1 : 0, {}}; }
    static Value text(std::string_view v) { return {Text, 0, v}; }
};

class Table {
public:
    Table(std::span<const Message> all, Source source, bool need_mac_text) {
        const size_t want = source == Source::GooseTable ? 0 : 1;
        std::unordered_map<StreamKey, size_t, StreamKeyHash> part_ids;
        std::unordered_map<std::string_view, std::vector<StreamKey>> identities;
        for (const auto& m : all) {
            if (m.index() != want) continue;
            const size_t r = rows_.size();
            rows_.push_back(&m);
            const StreamKey key = stream_key_of(m);
            auto [it, inserted] = part_ids.try_emplace(key, partitions_.size());
            if (inserted) partitions_.emplace_back();
            auto& part = partitions_[it->second];
            pos_.push_back(part.size());
            part_.push_back(it->second);

            std::optional<int64_t> hist;
            if (want == 0 && !part.empty()) {
                const size_t p = part.back();
                const int64_t prior = hist_max_[p] ? *hist_max_[p] : INT64_MIN;
                hist = std::max(prior, static_cast<int64_t>(std::get<GooseMessage>(*rows_[p]).stnum));
            }
            hist_max_.push_back(hist);

            std::string_view id = want == 0 ? std::string_view(std::get<GooseMessage>(m).goid)
                                            : std::string_view(std::get<SvMessage>(m).svid);
            auto& users = identities[id];
            conflict_.push_back(std::any_of(users.begin(), users.end(),
                                            [&](const StreamKey& k) { return !(k == key); }));
            if (std::find(users.begin(), users.end(), key) == users.end()) users.push_back(key);

            part.push_back(r);
            if (need_mac_text) {
                dm_text_.push_back(key.dm.to_string());
                sm_text_.push_back(key.sm.to_string());
            }
        }
    }

    size_t size() const { return rows_.size(); }
    const Message& msg(size_t r) const { return *rows_[r]; }
    size_t pos(size_t r) const { return pos_[r]; }
    // Row `back` positions earlier in r's partition (back <= pos(r)).
    size_t earlier(size_t r, size_t back) const { return partitions_[part_[r]][pos_[r] - back]; }

    Value column(Col c, size_t r) const {
        const Message& m = *rows_[r];
        if (const auto* g = std::get_if<GooseMessage>(&m)) {
            switch (c) {
                case Col::Time: return Value::integer(g->time.micros_since_midnight);
                case Col::Type: return Value::integer(g->ethertype);
                case Col::Appid: return Value::integer(g->appid);
                case Col::Dataset: return Value::text(g->dataset);
                case Col::Goid: return Value::text(g->goid);
                case Col::Stnum: return Value::integer(static_cast<int64_t>(g->stnum));
                case Col::Sqnum: return Value::integer(static_cast<int64_t>(g->sqnum));
                case Col::Data1: return Value::integer(g->data1);
                case Col::Data2: return Value::integer(g->data2);
                case Col::SeqIndex: return Value::integer(static_cast<int64_t>(g->seq_index));
                case Col::TimeDigits: return Value::integer(g->time.fractional_digits);
                case Col::HistMaxStnum: return hist_max_[r] ? Value::integer(*hist_max_[r]) : Value::null();
                default: break;
            }
        } else {
            const auto& s = std::get<SvMessage>(m);
            switch (c) {
                case Col::Time: return Value::integer(s.time.micros_since_midnight);
                case Col::Type: return Value::integer(s.ethertype);
                case Col::Appid: return Value::integer(s.appid);
                case Col::Svid: return Value::text(s.svid);
                case Col::Smpcnt: return Value::integer(static_cast<int64_t>(s.smpcnt));
                case Col::SeqIndex: return Value::integer(static_cast<int64_t>(s.seq_index));
                case Col::TimeDigits: return Value::integer(s.time.fractional_digits);
                default: break;
            }
        }
        switch (c) {
            case Col::Dm: return Value::text(dm_text_[r]);
            case Col::Sm: return Value::text(sm_text_[r]);
            case Col::IsFirst: return Value::integer(pos_[r] == 0 ? 1 : 0);
            case Col::IdentityConflict: return Value::integer(conflict_[r] ? 1 : 0);
            default: return Value::null();
        }
    }

private:
    std::vector<const Message*> rows_;
    std::vector<size_t> pos_;
    std::vector<size_t> part_;
    std::vector<std::vector<size_t>> partitions_;
    std::vector<std::optional<int64_t>> hist_max_;
    std::vector<bool> conflict_;
    std::vector<std::string> dm_text_;
    std::vector<std::string> sm_text_;
};

bool is_true(const Value& v) { return v.kind == Value::Bool && v.i != 0; }

Value eval(const Node& n, const Table& t, size_t r) {
    switch (n.kind) {
        case ExprKind::IntLit:
        case ExprKind::DurLit: return Value::integer(n.number);
        case ExprKind::StrLit: return Value::text(n.text);
        case ExprKind::Field: return t.column(n.col, r);
        case ExprKind::Delta: {
            if (t.pos(r) == 0) return Value::null();
            const Value a = t.column(n.col, r);
            const Value b = t.column(n.col, t.earlier(r, 1));
            if (a.kind != Value::Int || b.kind != Value::Int) return Value::null();
            return Value::integer(a.i - b.i);
        }
        case ExprKind::Prev:
            if (t.pos(r) == 0) return Value::null();
            return t.column(n.col, t.earlier(r, 1));
        case ExprKind::Lag:
            if (t.pos(r) < static_cast<size_t>(n.number)) return Value::null();
            return t.column(n.col, t.earlier(r, static_cast<size_t>(n.number)));
        case ExprKind::WindowCount: {
            const size_t w = static_cast<size_t>(n.number);
            if (t.pos(r) + 1 < w) return Value::null();
            int64_t count = 0;
            for (size_t back = 0; back < w; ++back)
                if (is_true(eval(n.args[0], t, t.earlier(r, back)))) ++count;
            return Value::integer(count);
        }
        case ExprKind::Not: {
            const Value a = eval(n.args[0], t, r);
            if (a.kind == Value::Null) return a;
            return Value::boolean(a.i == 0);
        }
        case ExprKind::And:
        case ExprKind::Or: {
            // Kleene: the dominant value (FALSE for AND, TRUE for OR) wins over NULL.
            const bool dominant = n.kind == ExprKind::Or;
            const Value a = eval(n.args[0], t, r);
            if (a.kind == Value::Bool && (a.i != 0) == dominant) return a;
            const Value b = eval(n.args[1], t, r);
            if (b.kind == Value::Bool && (b.i != 0) == dominant) return b;
            if (a.kind == Value::Null || b.kind == Value::Null) return Value::null();
            return Value::boolean(!dominant);
        }
        case ExprKind::Cmp: {
            const Value a = eval(n.args[0], t, r);
            if (a.kind == Value::Null) return a;
            const Value b = eval(n.args[1], t, r);
            if (b.kind == Value::Null) return b;
            int c;
            if (a.kind == Value::Text) {
                c = a.s < b.s ? -1 : (a.s == b.s ? 0 : 1);
            } else {
                c = a.i < b.i ? -1 : (a.i == b.i ? 0 : 1);
            }
            switch (n.op) {
                case CmpOp::Eq: return Value::boolean(c == 0);
                case CmpOp::Ne: return Value::boolean(c != 0);
                case CmpOp::Lt: return Value::boolean(c < 0);
                case CmpOp::Le: return Value::boolean(c <= 0);
                case CmpOp::Gt: return Value::boolean(c > 0);
                case CmpOp::Ge: return Value::boolean(c >= 0);
            }
            return Value::null();
        }
        case ExprKind::Add:
        case ExprKind::Sub: {
            const Value a = eval(n.args[0], t, r);
            if (a.kind == Value::Null) return a;
            const Value b = eval(n.args[1], t, r);
            if (b.kind == Value::Null) return b;
            return Value::integer(n.kind == ExprKind::Add ? a.i + b.i : a.i - b.i);
        }
    }
    return Value::null();
}

}  // namespace

QueryResult run_query(const Query& q, std::span<const Message> table) {
    check_query(q);
    const Node root = lower_expr(q.predicate);
    const Table t(table, q.source, mentions_mac(root));

    QueryResult out;
    out.projection = q.projection;
    for (size_t r = 0; r < t.size(); ++r) {
        if (!is_true(eval(root, t, r))) continue;
        ++out.count;
        if (q.projection == Projection::Rows) out.rows.push_back(seq_index_of(t.msg(r)));
    }
    std::sort(out.rows.begin(), out.rows.end());
    return out;
}

Query compile_rule(RuleId id, SystemFrequency freq) {
    const std::string max = std::to_string(freq.smpcnt_max());
    const std::string sv_wrap = "(smpcnt = 0 AND prev(smpcnt) = " + max + ")";
    std::string where;
    switch (id) {
        case RuleId::GR1: where = "delta(sqnum) != 1 AND delta(data1) = 0 AND delta(data2) = 0"; break;
        case RuleId::GR2:
            where = "(delta(data1) != 0 OR delta(data2) != 0) AND NOT (delta(stnum) = 1 AND sqnum = 0)";
            break;
        case RuleId::GR3: where = "stnum < hist_max_stnum"; break;
        case RuleId::GR4:
            where = "is_first = 1 AND identity_conflict = 1 OR prev(dm) != dm OR prev(sm) != sm OR "
                    "prev(type) != type OR prev(appid) != appid OR prev(dataset) != dataset OR prev(goid) != goid";
            break;
        case RuleId::GR5: where = "time_digits != 6"; break;
        case RuleId::GR6: where = "window_count(9, delta(time) <= 10us) >= 9"; break;
        case RuleId::GR7: where = "delta(time) > 10s"; break;
        case RuleId::GR8:
            where = "(delta(data1) != 0 OR delta(data2) != 0) AND delta(stnum) = 0 AND delta(sqnum) > 0";
            break;
        case RuleId::SR1: where = "smpcnt > " + max; break;
        case RuleId::SR2:
            where = "is_first = 0 AND NOT (delta(smpcnt) > 0 AND smpcnt <= " + max + " OR " + sv_wrap + ")";
            break;
        case RuleId::SR3: where = "is_first = 0 AND NOT (delta(smpcnt) >= 0 OR " + sv_wrap + ")"; break;
        case RuleId::SR4:
            where = "is_first = 1 AND identity_conflict = 1 OR prev(dm) != dm OR prev(sm) != sm OR "
                    "prev(type) != type OR prev(appid) != appid OR prev(svid) != svid";
            break;
        case RuleId::SR5: where = "time_digits != 3"; break;
        case RuleId::SR6: where = "NOT (delta(time) >= 200us AND delta(time) <= 215us)"; break;
        case RuleId::SR7: where = "time - lag(time, 11) <= 2083us"; break;
        case RuleId::SR8:
            where = "is_first = 0 AND NOT (prev(smpcnt) < " + max + " AND delta(smpcnt) = 1 OR " + sv_wrap + ")";
            break;
    }
    const char* table = rule_protocol(id) == Protocol::Goose ? "goose" : "sv";
    return parse_query(std::string("SELECT ROWS FROM ") + table + " WHERE " + where);
}

}  // namespace mcguard::filterql
