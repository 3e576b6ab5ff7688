#include "fsbench/csv.hpp"

#include "fsbench/error.hpp"

namespace fsbench::csv {

std::vector<Record> parse(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<Record> out;
  Record cur;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool record_has_content = false;
  std::size_t line = 1;
  cur.line = 1;

  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (record_has_content) {
      end_field();
      out.push_back(std::move(cur));
    }
    cur = Record{};
    field.clear();
    field_started = false;
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started) {
          in_quotes = true;
          field_started = true;
          record_has_content = true;
        } else {
          field.push_back(c);  // stray quote inside an unquoted field, kept verbatim
        }
        break;
      case ',':
        if (!record_has_content) cur.line = line;
        record_has_content = true;
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        cur.line = line;
        break;
      default:
        if (!record_has_content) cur.line = line;
        field.push_back(c);
        field_started = true;
        record_has_content = true;
    }
  }
  if (in_quotes) throw Error(Errc::parse, "unterminated quoted field starting on line " + std::to_string(cur.line));
  end_record();
  return out;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace fsbench::csv
