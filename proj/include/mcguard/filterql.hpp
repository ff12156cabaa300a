#pragma once

// filterql: a small filter language over GOOSE / SV message tables.
//
//   SELECT (ROWS | COUNT) FROM (goose | sv) WHERE <expr>
//
// Expressions use three-valued logic: anything touching a missing value
// (delta() on a stream's first row, prev() with no history, an unfilled
// window) is NULL, and only rows whose predicate is TRUE are selected.
// delta(), prev(), lag() and window_count() look back within the row's own
// stream (destination MAC, source MAC, APPID). See docs/filterql.md.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcguard/msgmodel.hpp"
#include "mcguard/rulekit.hpp"

namespace mcguard::filterql {

enum class Source : uint8_t { GooseTable, SvTable };
enum class Projection : uint8_t { Rows, Count };
enum class ValueType : uint8_t { Int, Text, Timestamp, Duration, Bool };

std::string_view to_string(ValueType t);

enum class ExprKind : uint8_t {
    IntLit,       // number
    StrLit,       // text
    DurLit,       // number = microseconds
    Field,        // text = column name (lower case)
    Delta,        // text = column
    Prev,         // text = column
    Lag,          // text = column, number = n
    WindowCount,  // number = n, args[0] = predicate
    Not,          // args[0]
    And,          // args[0], args[1]
    Or,           // args[0], args[1]
    Cmp,          // op, args[0], args[1]
    Add,          // args[0], args[1]
    Sub,          // args[0], args[1]
};

enum class CmpOp : uint8_t { Eq, Ne, Lt, Le, Gt, Ge };

struct Expr {
    ExprKind kind = ExprKind::IntLit;
    int64_t number = 0;
    std::string text;
    CmpOp op = CmpOp::Eq;
    std::vector<Expr> args;

    bool operator==(const Expr&) const = default;

    static Expr integer(int64_t v);
    static Expr string(std::string v);
    static Expr duration(int64_t micros);
    static Expr field(std::string name);
    static Expr delta(std::string column);
    static Expr prev(std::string column);
    static Expr lag(std::string column, int64_t n);
    static Expr window_count(int64_t n, Expr predicate);
    static Expr negate(Expr e);
    static Expr conj(Expr a, Expr b);
    static Expr disj(Expr a, Expr b);
    static Expr compare(CmpOp op, Expr a, Expr b);
    static Expr plus(Expr a, Expr b);
    static Expr minus(Expr a, Expr b);
};

struct Query {
    Source source = Source::GooseTable;
    Projection projection = Projection::Rows;
    Expr predicate;

    bool operator==(const Query&) const = default;
};

struct QueryResult {
    Projection projection = Projection::Rows;
    std::vector<uint64_t> rows;  // seq_index ascending (Rows only)
    uint64_t count = 0;          // number of matching rows (both projections)

    bool operator==(const QueryResult&) const = default;
};

// Columns available per table, including derived ones:
//   is_first           1 on the first row of a stream, else 0
//   identity_conflict  1 when an earlier row of another stream used this
//                      row's goid / svid, else 0
//   time_digits        fractional digits in the raw time text
//   hist_max_stnum     max stnum over earlier rows of the stream (goose only)
std::vector<std::string_view> column_names(Source s);

// Throws QuerySyntaxError (with character position) or QueryTypeError.
Query parse_query(std::string_view text);

// Throws QueryTypeError naming the offending subexpression.
ValueType check_types(const Expr& e, Source s);
void check_query(const Query& q);

// Canonical text; parse_query(render(q)) == q.
std::string render(const Query& q);
std::string render(const Expr& e);

// Rows of `table` from other protocols are ignored. Table order is
// evaluation order.
QueryResult run_query(const Query& q, std::span<const Message> table);

// Query selecting exactly the packets `id` marks Anomalous.
Query compile_rule(RuleId id, SystemFrequency freq = {});

}  // namespace mcguard::filterql
