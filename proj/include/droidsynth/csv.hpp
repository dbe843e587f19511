#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace droidsynth::csv {

using Record = std::vector<std::string>;

// RFC-4180 parsing: quoted fields, doubled quotes, CRLF or LF line ends.
// A trailing empty line is not a record. Throws DataError on an unterminated
// quote, naming the 1-based record where it started.
std::vector<Record> parse(std::string_view text);

std::vector<Record> read_file(const std::string& path);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const Record& record);

// Shortest round-trip decimal form of a double ("3", "0.25", "1e-07").
std::string format_number(double value);

}  // namespace droidsynth::csv
