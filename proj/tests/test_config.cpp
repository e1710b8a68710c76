#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "npx/config.hpp"

using npx::Config;

TEST_CASE("key-value parsing with comments and blanks") {
    Config cfg = Config::from_string(
        "# leading comment\n"
        "device.vdd = 0.8\n"
        "\n"
        "name = hello world  # trailing comment\n"
        "list = 1, 2.5, -3\n");
    CHECK(cfg.get_double("device.vdd") == doctest::Approx(0.8));
    CHECK(cfg.get_string("name") == "hello world");
    auto list = cfg.get_double_list("list");
    REQUIRE(list.size() == 3);
    CHECK(list[1] == doctest::Approx(2.5));
    CHECK(list[2] == doctest::Approx(-3));
}

TEST_CASE("last occurrence wins for scalars, get_all keeps order") {
    Config cfg = Config::from_string("a = 1\nlayer = one\na = 2\nlayer = two\n");
    CHECK(cfg.get_int("a") == 2);
    auto all = cfg.get_all("layer");
    REQUIRE(all.size() == 2);
    CHECK(all[0] == "one");
    CHECK(all[1] == "two");
}

TEST_CASE("missing and malformed keys") {
    Config cfg = Config::from_string("x = abc\n");
    CHECK_THROWS_AS(cfg.get_string("missing"), npx::ConfigError);
    CHECK_THROWS_AS(cfg.get_double("x"), npx::ConfigError);
    CHECK(cfg.get_double("missing", 7.0) == doctest::Approx(7.0));
    CHECK_THROWS_AS(Config::from_string("just a line without equals\n"), npx::ConfigError);
}

TEST_CASE("include resolves relative to the including file and overrides compose") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "npx_config_test";
    fs::create_directories(dir / "sub");
    {
        std::ofstream base((dir / "sub" / "base.cfg").string());
        base << "v = 1\nonly_base = yes\n";
    }
    {
        std::ofstream top((dir / "top.cfg").string());
        top << "include sub/base.cfg\nv = 2\n";
    }
    Config cfg = Config::load((dir / "top.cfg").string());
    CHECK(cfg.get_int("v") == 2);
    CHECK(cfg.get_string("only_base") == "yes");
    fs::remove_all(dir);
}
