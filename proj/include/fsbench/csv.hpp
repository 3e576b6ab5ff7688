#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace fsbench::csv {

struct Record {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF or LF.
// A leading UTF-8 BOM is skipped and blank lines are ignored.
// Throws Error(parse) on an unterminated quoted field.
std::vector<Record> parse(std::string_view text);

// Quote a field only when it needs it.
std::string escape(std::string_view field);

}  // namespace fsbench::csv
