#include <algorithm>
#include <cctype>
#include <optional>

#include "mcguard/error.hpp"
#include "mcguard/filterql.hpp"

namespace mcguard::filterql {

std::string_view to_string(ValueType t) {
    switch (t) {
        case ValueType::Int: return "Int";
        case ValueType::Text: return "Text";
        case ValueType::Timestamp: return "Timestamp";
        case ValueType::Duration: return "Duration";
        case ValueType::Bool: return "Bool";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace {
Expr node(ExprKind k) {
    Expr e;
    e.kind = k;
    return e;
}
Expr binary(ExprKind k, Expr a, Expr b) {
    Expr e = node(k);
    e.args.push_back(std::move(a));
    e.args.push_back(std::move(b));
    return e;
}
}  // namespace

Expr Expr::integer(int64_t v) {
    Expr e = node(ExprKind::IntLit);
    e.number = v;
    return e;
}
Expr Expr::string(std::string v) {
    Expr e = node(ExprKind::StrLit);
    e.text = std::move(v);
    return e;
}
Expr Expr::duration(int64_t micros) {
    Expr e = node(ExprKind::DurLit);
    e.number = micros;
    return e;
}
Expr Expr::field(std::string name) {
    Expr e = node(ExprKind::Field);
    e.text = std::move(name);
    return e;
}
Expr Expr::delta(std::string column) {
    Expr e = node(ExprKind::Delta);
    e.text = std::move(column);
    return e;
}
Expr Expr::prev(std::string column) {
    Expr e = node(ExprKind::Prev);
    e.text = std::move(column);
    return e;
}
Expr Expr::lag(std::string column, int64_t n) {
    Expr e = node(ExprKind::Lag);
    e.text = std::move(column);
    e.number = n;
    return e;
}
Expr Expr::window_count(int64_t n, Expr predicate) {
    Expr e = node(ExprKind::WindowCount);
    e.number = n;
    e.args.push_back(std::move(predicate));
    return e;
}
Expr Expr::negate(Expr inner) {
    Expr e = node(ExprKind::Not);
    e.args.push_back(std::move(inner));
    return e;
}
Expr Expr::conj(Expr a, Expr b) { return binary(ExprKind::And, std::move(a), std::move(b)); }
Expr Expr::disj(Expr a, Expr b) { return binary(ExprKind::Or, std::move(a), std::move(b)); }
Expr Expr::compare(CmpOp op, Expr a, Expr b) {
    Expr e = binary(ExprKind::Cmp, std::move(a), std::move(b));
    e.op = op;
    return e;
}
Expr Expr::plus(Expr a, Expr b) { return binary(ExprKind::Add, std::move(a), std::move(b)); }
Expr Expr::minus(Expr a, Expr b) { return binary(ExprKind::Sub, std::move(a), std::move(b)); }

// ---------------------------------------------------------------------------
// Columns
// ---------------------------------------------------------------------------

namespace {

struct ColumnDef {
    std::string_view name;
    ValueType type;
    bool goose;
    bool sv;
};

constexpr ColumnDef kColumns[] = {
    {"time", ValueType::Timestamp, true, true},
    {"dm", ValueType::Text, true, true},
    {"sm", ValueType::Text, true, true},
    {"type", ValueType::Int, true, true},
    {"appid", ValueType::Int, true, true},
    {"dataset", ValueType::Text, true, false},
    {"goid", ValueType::Text, true, false},
    {"stnum", ValueType::Int, true, false},
    {"sqnum", ValueType::Int, true, false},
    {"data1", ValueType::Int, true, false},
    {"data2", ValueType::Int, true, false},
    {"svid", ValueType::Text, false, true},
    {"smpcnt", ValueType::Int, false, true},
    {"seq_index", ValueType::Int, true, true},
    {"is_first", ValueType::Int, true, true},
    {"identity_conflict", ValueType::Int, true, true},
    {"time_digits", ValueType::Int, true, true},
    {"hist_max_stnum", ValueType::Int, true, false},
};

std::optional<ValueType> column_type(std::string_view name, Source s) {
    for (const auto& c : kColumns)
        if (c.name == name && (s == Source::GooseTable ? c.goose : c.sv)) return c.type;
    return std::nullopt;
}

}  // namespace

std::vector<std::string_view> column_names(Source s) {
    std::vector<std::string_view> out;
    for (const auto& c : kColumns)
        if (s == Source::GooseTable ? c.goose : c.sv) out.push_back(c.name);
    return out;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

int precedence(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Or: return 1;
        case ExprKind::And: return 2;
        case ExprKind::Not: return 3;
        case ExprKind::Cmp: return 4;
        case ExprKind::Add:
        case ExprKind::Sub: return 5;
        default: return 6;
    }
}

std::string_view op_text(CmpOp op) {
    switch (op) {
        case CmpOp::Eq: return "=";
        case CmpOp::Ne: return "!=";
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
    }
    return "?";
}

std::string duration_text(int64_t us) {
    if (us != 0 && us % 1'000'000 == 0) return std::to_string(us / 1'000'000) + "s";
    if (us != 0 && us % 1'000 == 0) return std::to_string(us / 1'000) + "ms";
    return std::to_string(us) + "us";
}

void render_into(const Expr& e, std::string& out);

void render_child(const Expr& child, int min_prec, std::string& out) {
    const bool paren = precedence(child) < min_prec;
    if (paren) out += '(';
    render_into(child, out);
    if (paren) out += ')';
}

void render_into(const Expr& e, std::string& out) {
    switch (e.kind) {
        case ExprKind::IntLit: out += std::to_string(e.number); break;
        case ExprKind::DurLit: out += duration_text(e.number); break;
        case ExprKind::StrLit:
            out += '\'';
            for (char c : e.text) {
                if (c == '\'') out += '\'';
                out += c;
            }
            out += '\'';
            break;
        case ExprKind::Field: out += e.text; break;
        case ExprKind::Delta: out += "delta(" + e.text + ")"; break;
        case ExprKind::Prev: out += "prev(" + e.text + ")"; break;
        case ExprKind::Lag: out += "lag(" + e.text + ", " + std::to_string(e.number) + ")"; break;
        case ExprKind::WindowCount:
            out += "window_count(" + std::to_string(e.number) + ", ";
            render_into(e.args.at(0), out);
            out += ")";
            break;
        case ExprKind::Not:
            out += "NOT ";
            render_child(e.args.at(0), 3, out);
            break;
        case ExprKind::And:
        case ExprKind::Or: {
            const int p = precedence(e);
            render_child(e.args.at(0), p, out);
            out += e.kind == ExprKind::And ? " AND " : " OR ";
            render_child(e.args.at(1), p + 1, out);
            break;
        }
        case ExprKind::Cmp:
            render_child(e.args.at(0), 5, out);
            out += ' ';
            out += op_text(e.op);
            out += ' ';
            render_child(e.args.at(1), 5, out);
            break;
        case ExprKind::Add:
        case ExprKind::Sub:
            render_child(e.args.at(0), 5, out);
            out += e.kind == ExprKind::Add ? " + " : " - ";
            render_child(e.args.at(1), 6, out);
            break;
    }
}

}  // namespace

std::string render(const Expr& e) {
    std::string out;
    render_into(e, out);
    return out;
}

std::string render(const Query& q) {
    std::string out = "SELECT ";
    out += q.projection == Projection::Rows ? "ROWS" : "COUNT";
    out += " FROM ";
    out += q.source == Source::GooseTable ? "goose" : "sv";
    out += " WHERE ";
    render_into(q.predicate, out);
    return out;
}

// ---------------------------------------------------------------------------
// Type checking
// ---------------------------------------------------------------------------

ValueType check_types(const Expr& e, Source s) {
    auto fail = [&](const std::string& why) -> ValueType { throw QueryTypeError(why, render(e)); };
    auto column = [&](const std::string& name) {
        auto t = column_type(name, s);
        if (!t)
            throw QueryTypeError(std::string("unknown column for table ") +
                                     (s == Source::GooseTable ? "goose" : "sv"),
                                 name);
        return *t;
    };

    switch (e.kind) {
        case ExprKind::IntLit: return ValueType::Int;
        case ExprKind::StrLit: return ValueType::Text;
        case ExprKind::DurLit: return ValueType::Duration;
        case ExprKind::Field: return column(e.text);
        case ExprKind::Delta: {
            const ValueType t = column(e.text);
            if (t == ValueType::Int) return ValueType::Int;
            if (t == ValueType::Timestamp) return ValueType::Duration;
            return fail("delta() needs a numeric or time column");
        }
        case ExprKind::Prev: return column(e.text);
        case ExprKind::Lag:
            if (e.number < 1) return fail("lag() distance must be at least 1");
            return column(e.text);
        case ExprKind::WindowCount:
            if (e.number < 1) return fail("window_count() size must be at least 1");
            if (check_types(e.args.at(0), s) != ValueType::Bool)
                return fail("window_count() needs a boolean predicate");
            return ValueType::Int;
        case ExprKind::Not:
            if (check_types(e.args.at(0), s) != ValueType::Bool) return fail("NOT needs a boolean operand");
            return ValueType::Bool;
        case ExprKind::And:
        case ExprKind::Or:
            if (check_types(e.args.at(0), s) != ValueType::Bool || check_types(e.args.at(1), s) != ValueType::Bool)
                return fail("AND / OR need boolean operands");
            return ValueType::Bool;
        case ExprKind::Cmp: {
            const ValueType a = check_types(e.args.at(0), s);
            const ValueType b = check_types(e.args.at(1), s);
            if (a != b)
                return fail("cannot compare " + std::string(to_string(a)) + " with " + std::string(to_string(b)));
            if (a == ValueType::Bool) return fail("cannot compare boolean values");
            if (a == ValueType::Text && e.op != CmpOp::Eq && e.op != CmpOp::Ne)
                return fail("text supports only = and !=");
            return ValueType::Bool;
        }
        case ExprKind::Add:
        case ExprKind::Sub: {
            const ValueType a = check_types(e.args.at(0), s);
            const ValueType b = check_types(e.args.at(1), s);
            const bool add = e.kind == ExprKind::Add;
            if (a == ValueType::Int && b == ValueType::Int) return ValueType::Int;
            if (a == ValueType::Duration && b == ValueType::Duration) return ValueType::Duration;
            if (a == ValueType::Timestamp && b == ValueType::Duration) return ValueType::Timestamp;
            if (add && a == ValueType::Duration && b == ValueType::Timestamp) return ValueType::Timestamp;
            if (!add && a == ValueType::Timestamp && b == ValueType::Timestamp) return ValueType::Duration;
            return fail(std::string("cannot ") + (add ? "add " : "subtract ") + std::string(to_string(b)) +
                        (add ? " to " : " from ") + std::string(to_string(a)));
        }
    }
    return fail("unknown expression");
}

void check_query(const Query& q) {
    if (check_types(q.predicate, q.source) != ValueType::Bool)
        throw QueryTypeError("WHERE clause must be a boolean condition", render(q.predicate));
}

// ---------------------------------------------------------------------------
// Lexer / parser
// ---------------------------------------------------------------------------

namespace {

enum class Tok { Ident, Int, Dur, Str, LParen, RParen, Comma, Op, Plus, Minus, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;  // identifiers lower-cased; operator spelling
    int64_t number = 0;
    size_t pos = 0;
};

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

class Lexer {
public:
    explicit Lexer(std::string_view text) : s_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
            Token t;
            t.pos = i_;
            if (i_ >= s_.size()) {
                out.push_back(t);
                return out;
            }
            const char c = s_[i_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                size_t j = i_;
                while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
                t.kind = Tok::Ident;
                t.text = lower(s_.substr(i_, j - i_));
                i_ = j;
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                number(t);
            } else if (c == '\'') {
                string(t);
            } else {
                ++i_;
                switch (c) {
                    case '(': t.kind = Tok::LParen; break;
                    case ')': t.kind = Tok::RParen; break;
                    case ',': t.kind = Tok::Comma; break;
                    case '+': t.kind = Tok::Plus; break;
                    case '-': t.kind = Tok::Minus; break;
                    case '=': t.kind = Tok::Op; t.text = "="; break;
                    case '!':
                        if (i_ < s_.size() && s_[i_] == '=') {
                            ++i_;
                            t.kind = Tok::Op;
                            t.text = "!=";
                            break;
                        }
                        throw QuerySyntaxError("unexpected '!'", t.pos);
                    case '<':
                        t.kind = Tok::Op;
                        if (i_ < s_.size() && s_[i_] == '=') {
                            ++i_;
                            t.text = "<=";
                        } else if (i_ < s_.size() && s_[i_] == '>') {
                            ++i_;
                            t.text = "!=";
                        } else {
                            t.text = "<";
                        }
                        break;
                    case '>':
                        t.kind = Tok::Op;
                        if (i_ < s_.size() && s_[i_] == '=') {
                            ++i_;
                            t.text = ">=";
                        } else {
                            t.text = ">";
                        }
                        break;
                    default:
                        throw QuerySyntaxError(std::string("unexpected character '") + c + "'", t.pos);
                }
            }
            out.push_back(std::move(t));
        }
    }

private:
    void number(Token& t) {
        const size_t start = i_;
        if (s_[i_] == '0' && i_ + 1 < s_.size() && (s_[i_ + 1] == 'x' || s_[i_ + 1] == 'X')) {
            i_ += 2;
            const size_t digits = i_;
            uint64_t v = 0;
            while (i_ < s_.size() && std::isxdigit(static_cast<unsigned char>(s_[i_]))) {
                if (v >> 59) throw QuerySyntaxError("integer literal too large", start);
                v = v * 16 + static_cast<uint64_t>(std::isdigit(static_cast<unsigned char>(s_[i_]))
                                                       ? s_[i_] - '0'
                                                       : std::tolower(static_cast<unsigned char>(s_[i_])) - 'a' + 10);
                ++i_;
            }
            if (i_ == digits) throw QuerySyntaxError("hex literal needs digits", start);
            if (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
                throw QuerySyntaxError("malformed number", start);
            t.kind = Tok::Int;
            t.number = static_cast<int64_t>(v);
            return;
        }
        // integer part, optional fraction, optional unit
        uint64_t whole = 0;
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
            if (whole > 100'000'000'000'000'000ULL) throw QuerySyntaxError("integer literal too large", start);
            whole = whole * 10 + static_cast<uint64_t>(s_[i_] - '0');
            ++i_;
        }
        std::string frac;
        if (i_ < s_.size() && s_[i_] == '.') {
            ++i_;
            while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) frac += s_[i_++];
            if (frac.empty()) throw QuerySyntaxError("digits expected after '.'", i_);
        }
        size_t j = i_;
        while (j < s_.size() && std::isalpha(static_cast<unsigned char>(s_[j]))) ++j;
        const std::string unit = lower(s_.substr(i_, j - i_));
        i_ = j;
        if (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
            throw QuerySyntaxError("malformed number", start);
        if (unit.empty()) {
            if (!frac.empty()) throw QuerySyntaxError("fractional numbers need a duration unit (us, ms, s)", start);
            t.kind = Tok::Int;
            t.number = static_cast<int64_t>(whole);
            return;
        }
        int scale_digits;
        if (unit == "us") {
            scale_digits = 0;
        } else if (unit == "ms") {
            scale_digits = 3;
        } else if (unit == "s") {
            scale_digits = 6;
        } else {
            throw QuerySyntaxError("unknown duration unit '" + unit + "'", start);
        }
        if (static_cast<int>(frac.size()) > scale_digits)
            throw QuerySyntaxError("duration is finer than one microsecond", start);
        int64_t micros = static_cast<int64_t>(whole);
        for (int k = 0; k < scale_digits; ++k) {
            micros *= 10;
            if (k < static_cast<int>(frac.size())) micros += frac[static_cast<size_t>(k)] - '0';
        }
        t.kind = Tok::Dur;
        t.number = micros;
    }

    void string(Token& t) {
        const size_t start = i_++;
        std::string v;
        for (;;) {
            if (i_ >= s_.size()) throw QuerySyntaxError("unterminated string literal", start);
            if (s_[i_] == '\'') {
                if (i_ + 1 < s_.size() && s_[i_ + 1] == '\'') {
                    v += '\'';
                    i_ += 2;
                    continue;
                }
                ++i_;
                break;
            }
            v += s_[i_++];
        }
        t.kind = Tok::Str;
        t.text = std::move(v);
    }

    std::string_view s_;
    size_t i_ = 0;
};

bool is_keyword(const std::string& w) {
    return w == "select" || w == "from" || w == "where" || w == "and" || w == "or" || w == "not" ||
           w == "rows" || w == "count";
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    Query query() {
        Query q;
        keyword("select");
        if (accept_keyword("rows")) {
            q.projection = Projection::Rows;
        } else if (accept_keyword("count")) {
            q.projection = Projection::Count;
        } else {
            error("expected ROWS or COUNT");
        }
        keyword("from");
        if (accept_keyword("goose")) {
            q.source = Source::GooseTable;
        } else if (accept_keyword("sv")) {
            q.source = Source::SvTable;
        } else {
            error("expected table goose or sv");
        }
        keyword("where");
        q.predicate = or_expr();
        if (peek().kind != Tok::End) error("unexpected trailing input");
        return q;
    }

private:
    const Token& peek() const { return t_[k_]; }
    const Token& take() { return t_[k_ < t_.size() - 1 ? k_++ : k_]; }

    [[noreturn]] void error(const std::string& what) const {
        const Token& t = peek();
        throw QuerySyntaxError(t.kind == Tok::End ? what + " (found end of input)" : what, t.pos);
    }

    bool accept_keyword(const char* w) {
        if (peek().kind == Tok::Ident && peek().text == w) {
            ++k_;
            return true;
        }
        return false;
    }
    void keyword(const char* w) {
        if (!accept_keyword(w)) {
            std::string upper(w);
            for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            error("expected " + upper);
        }
    }
    void expect(Tok k, const char* what) {
        if (peek().kind != k) error(std::string("expected ") + what);
        ++k_;
    }

    Expr or_expr() {
        Expr e = and_expr();
        while (accept_keyword("or")) e = Expr::disj(std::move(e), and_expr());
        return e;
    }
    Expr and_expr() {
        Expr e = not_expr();
        while (accept_keyword("and")) e = Expr::conj(std::move(e), not_expr());
        return e;
    }
    Expr not_expr() {
        if (accept_keyword("not")) return Expr::negate(not_expr());
        return cmp_expr();
    }
    Expr cmp_expr() {
        Expr a = add_expr();
        if (peek().kind != Tok::Op) return a;
        const std::string op = take().text;
        CmpOp c = CmpOp::Eq;
        if (op == "=") c = CmpOp::Eq;
        else if (op == "!=") c = CmpOp::Ne;
        else if (op == "<") c = CmpOp::Lt;
        else if (op == "<=") c = CmpOp::Le;
        else if (op == ">") c = CmpOp::Gt;
        else if (op == ">=") c = CmpOp::Ge;
        Expr b = add_expr();
        if (peek().kind == Tok::Op) error("comparisons cannot be chained");
        return Expr::compare(c, std::move(a), std::move(b));
    }
    Expr add_expr() {
        Expr e = unary();
        for (;;) {
            if (peek().kind == Tok::Plus) {
                ++k_;
                e = Expr::plus(std::move(e), unary());
            } else if (peek().kind == Tok::Minus) {
                ++k_;
                e = Expr::minus(std::move(e), unary());
            } else {
                return e;
            }
        }
    }
    Expr unary() {
        if (peek().kind == Tok::Minus) {
            ++k_;
            const Token& t = peek();
            if (t.kind == Tok::Int) return Expr::integer(-take().number);
            if (t.kind == Tok::Dur) return Expr::duration(-take().number);
            error("'-' must be followed by a number");
        }
        return primary();
    }
    Expr primary() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::Int: return Expr::integer(take().number);
            case Tok::Dur: return Expr::duration(take().number);
            case Tok::Str: return Expr::string(take().text);
            case Tok::LParen: {
                ++k_;
                Expr e = or_expr();
                expect(Tok::RParen, "')'");
                return e;
            }
            case Tok::Ident: break;
            default: error("expected an expression");
        }
        if (is_keyword(t.text)) error("expected an expression, found keyword " + t.text);
        const size_t name_at = k_;
        const std::string name = take().text;
        if (peek().kind != Tok::LParen) return Expr::field(name);
        ++k_;
        if (name == "delta" || name == "prev") {
            const std::string col = column_name();
            expect(Tok::RParen, "')'");
            return name == "delta" ? Expr::delta(col) : Expr::prev(col);
        }
        if (name == "lag") {
            const std::string col = column_name();
            expect(Tok::Comma, "','");
            const int64_t n = integer();
            expect(Tok::RParen, "')'");
            return Expr::lag(col, n);
        }
        if (name == "window_count") {
            const int64_t n = integer();
            expect(Tok::Comma, "','");
            Expr inner = or_expr();
            expect(Tok::RParen, "')'");
            return Expr::window_count(n, std::move(inner));
        }
        k_ = name_at;
        error("unknown function '" + name + "'");
    }
    std::string column_name() {
        if (peek().kind != Tok::Ident || is_keyword(peek().text)) error("expected a column name");
        return take().text;
    }
    int64_t integer() {
        if (peek().kind != Tok::Int) error("expected an integer");
        return take().number;
    }

    std::vector<Token> t_;
    size_t k_ = 0;
};

}  // namespace

Query parse_query(std::string_view text) {
    Parser p(Lexer(text).run());
    Query q = p.query();
    check_query(q);
    return q;
}

}  // namespace mcguard::filterql
