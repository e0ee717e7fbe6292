#include "lawsde/config.hpp"

#include <doctest.h>

#include <sstream>

using namespace lawsde;

namespace {

Config parse(const std::string& text) {
  std::istringstream is(text);
  return Config::parse(is, "test");
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parsing") {
  const Config c = parse("# comment\n\n  N = 100  # trailing\ndt=0.01\nname = ou-attraction\nlist = 1, 2.5 ,-3\nflag = true\n");
  CHECK(c.unsigned_integer("N") == 100);
  CHECK(c.number("dt") == 0.01);
  CHECK(c.string("name") == "ou-attraction");
  CHECK(c.numbers("list") == std::vector<double>{1.0, 2.5, -3.0});
  CHECK(c.boolean("flag", false));
  CHECK(c.number("missing", 4.0) == 4.0);
  CHECK(c.string("missing", "x") == "x");
  CHECK(c.numbers("missing", {1.0}) == std::vector<double>{1.0});
  CHECK(c.serialize() == "N = 100\ndt = 0.01\nflag = true\nlist = 1, 2.5 ,-3\nname = ou-attraction\n");
}

TEST_CASE("errors name the key") {
  CHECK(error_of([] { parse("a = 1\na = 2\n"); }).find("'a'") != std::string::npos);
  CHECK(error_of([] { parse("just words\n"); }).find("=") != std::string::npos);
  CHECK(error_of([] { parse("N = 1\n").number("dt"); }).find("'dt'") != std::string::npos);
  CHECK(error_of([] { parse("N = ten\n").unsigned_integer("N"); }).find("'N'") != std::string::npos);
  CHECK(error_of([] { parse("N = -3\n").unsigned_integer("N"); }).find("'N'") != std::string::npos);
  CHECK(error_of([] { parse("x = 1.5e\n").number("x"); }).find("'x'") != std::string::npos);
  CHECK(error_of([] { parse("b = maybe\n").boolean("b", true); }).find("'b'") != std::string::npos);
  CHECK(error_of([] { parse("l = 1,,2\n").numbers("l"); }).find("'l'") != std::string::npos);
  CHECK(error_of([] { parse("N = 1\nbogus = 2\n").reject_unknown({"N"}); }).find("'bogus'") != std::string::npos);
  CHECK_NOTHROW(parse("N = 1\n").reject_unknown({"N", "dt"}));
  CHECK_THROWS_AS(Config::load("/nonexistent/config.cfg"), ConfigError);
}
