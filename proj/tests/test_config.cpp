#include <doctest.h>

#include "mcguard/config.hpp"
#include "mcguard/error.hpp"

using namespace mcguard;

TEST_CASE("config values and tables") {
    const auto t = parse_config(R"(
# top level
name = "run"   # trailing comment
count = 1_000
hex = 0x88B8
ratio = 0.25
neg = -3
on = true
tags = ["a", 'b\c',
        "c"]

[goose]
heartbeat_us = 1000000

[a.b]
x = 1

[[injection]]
attack = "Flood"

[[injection]]
attack = "SqnumSkip"
)");
    CHECK(t.get_string("name") == "run");
    CHECK(t.get_int("count") == 1000);
    CHECK(t.get_int("hex") == 0x88B8);
    CHECK(t.get_double("ratio") == 0.25);
    CHECK(t.get_double("count") == 1000.0);
    CHECK(t.get_int("neg") == -3);
    CHECK(t.get_bool("on") == true);
    CHECK(t.get_string_list("tags") == std::vector<std::string>{"a", "b\\c", "c"});
    CHECK(!t.get_int("missing"));
    REQUIRE(t.table("goose"));
    CHECK(t.table("goose")->get_int("heartbeat_us") == 1'000'000);
    REQUIRE(t.table("a"));
    CHECK(t.table("a")->table("b")->get_int("x") == 1);
    REQUIRE(t.array("injection").size() == 2);
    CHECK(t.array("injection")[1].get_string("attack") == "SqnumSkip");
    CHECK(t.array("nothing").empty());
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("a = "), ConfigError);
    CHECK_THROWS_AS(parse_config("a = 1\na = 2"), ConfigError);
    CHECK_THROWS_AS(parse_config("a = \"open"), ConfigError);
    CHECK_THROWS_AS(parse_config("a = 1 2"), ConfigError);
    CHECK_THROWS_AS(parse_config("[t]\n[t]"), ConfigError);
    CHECK_THROWS_AS(parse_config("a = [1, 2"), ConfigError);
    CHECK_THROWS_AS(parse_config("a = 12x"), ConfigError);
    try {
        parse_config("a = 1\n\nb = @");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    const auto t = parse_config("a = 1\nb = \"x\"");
    CHECK_THROWS_AS(t.get_string("a"), ConfigError);
    CHECK_THROWS_AS(t.get_int("b"), ConfigError);
    CHECK_THROWS_AS(t.check_keys({"a"}), ConfigError);
    CHECK_NOTHROW(t.check_keys({"a", "b"}));
}
