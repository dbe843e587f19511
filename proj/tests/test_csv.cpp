#include <doctest.h>

#include <sstream>

#include "droidsynth/csv.hpp"
#include "droidsynth/error.hpp"

using namespace droidsynth;

TEST_CASE("plain and quoted fields") {
  const auto rows = csv::parse("a,b,c\n1,\"x,y\",\"he said \"\"hi\"\"\"\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1] == csv::Record{"1", "x,y", "he said \"hi\""});
}

TEST_CASE("CRLF, embedded newlines and empty fields") {
  const auto rows = csv::parse("a,b\r\n\"line1\nline2\",\r\n,\r\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == csv::Record{"line1\nline2", ""});
  CHECK(rows[2] == csv::Record{"", ""});
}

TEST_CASE("missing final newline and trailing blank line") {
  CHECK(csv::parse("a,b\n1,2").size() == 2);
  CHECK(csv::parse("a,b\n1,2\n").size() == 2);
  CHECK(csv::parse("").empty());
}

TEST_CASE("unterminated quote names the starting record") {
  try {
    csv::parse("a\nb\n\"open\n");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("escape and write round trip") {
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("q\"") == "\"q\"\"\"");
  const csv::Record rec = {"x", "a,b", "multi\nline", "\"", ""};
  std::ostringstream out;
  csv::write_record(out, rec);
  const auto back = csv::parse(out.str());
  REQUIRE(back.size() == 1);
  CHECK(back[0] == rec);
}

TEST_CASE("number formatting is shortest round-trip") {
  CHECK(csv::format_number(3.0) == "3");
  CHECK(csv::format_number(0.25) == "0.25");
  CHECK(csv::format_number(1e-7) == "1e-07");
  CHECK(csv::format_number(-0.5) == "-0.5");
  for (double v : {0.1, 1.0 / 3.0, 123456789.123, 6.02214076e23}) {
    CHECK(std::stod(csv::format_number(v)) == v);
  }
}
