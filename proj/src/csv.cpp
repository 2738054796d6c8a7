#include "tabsyn/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tabsyn {

namespace {

struct CsvReader {
  std::istream& in;
  std::size_t line = 1;

  // reads one record; returns false at clean EOF
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    int ch = in.get();
    if (ch == EOF) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    while (true) {
      if (ch == EOF) {
        fields.push_back(std::move(field));
        return true;
      }
      any = true;
      const char c = static_cast<char>(ch);
      if (quoted) {
        if (c == '"') {
          const int peek = in.peek();
          if (peek == '"') {
            in.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
      } else if (c == '"' && field.empty()) {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        ++line;
        fields.push_back(std::move(field));
        return true;
      } else if (c != '\r') {
        field.push_back(c);
      }
      ch = in.get();
    }
    (void)any;
  }
};

double parse_double(const std::string& s, std::size_t line, const std::string& col) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v))
    throw parse_error("csv line " + std::to_string(line) + ", column '" + col +
                      "': cannot parse '" + s + "' as a number");
  return v;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

Table load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open csv file: " + path);

  CsvReader reader{in};
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw parse_error("csv '" + path + "': empty file");
  if (fields.size() != schema.columns.size())
    throw parse_error("csv '" + path + "': header has " + std::to_string(fields.size()) +
                      " columns, schema expects " + std::to_string(schema.columns.size()));
  for (std::size_t c = 0; c < fields.size(); ++c)
    if (fields[c] != schema.columns[c].name)
      throw parse_error("csv '" + path + "': header column " + std::to_string(c + 1) + " is '" +
                        fields[c] + "', schema expects '" + schema.columns[c].name + "'");

  Table table(schema);
  Schema& live = table.schema();
  const bool fixed_categories = [&] {
    for (const Column& c : schema.columns)
      if (c.kind == ColKind::discrete && !c.categories.empty()) return true;
    return false;
  }();

  while (true) {
    const std::size_t line = reader.line;
    if (!reader.next(fields)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing newline
    if (fields.size() != schema.columns.size())
      throw parse_error("csv line " + std::to_string(line) + ": expected " +
                        std::to_string(schema.columns.size()) + " fields, got " +
                        std::to_string(fields.size()));
    const std::size_t r = table.rows();
    table.add_rows(1);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      Column& col = live.columns[c];
      if (col.kind == ColKind::continuous) {
        if (fields[c].empty())
          throw parse_error("csv line " + std::to_string(line) + ", column '" + col.name +
                            "': missing value");
        table.set_num(r, c, parse_double(fields[c], line, col.name));
      } else {
        int idx = col.category_index(fields[c]);
        if (idx < 0) {
          if (fixed_categories && !col.categories.empty())
            throw parse_error("csv line " + std::to_string(line) + ", column '" + col.name +
                              "': unknown category '" + fields[c] + "'");
          idx = static_cast<int>(col.categories.size());
          col.categories.push_back(fields[c]);
        }
        table.set_cat(r, c, idx);
      }
    }
  }
  return table;
}

void save_csv(const Table& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write csv file: " + path);
  const Schema& s = table.schema();
  for (std::size_t c = 0; c < s.columns.size(); ++c) {
    if (c) out << ',';
    out << quote_if_needed(s.columns[c].name);
  }
  out << '\n';
  std::ostringstream row;
  row.precision(17);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    row.str("");
    for (std::size_t c = 0; c < s.columns.size(); ++c) {
      if (c) row << ',';
      if (s.columns[c].kind == ColKind::continuous)
        row << table.num(r, c);
      else
        row << quote_if_needed(s.columns[c].categories[table.cat(r, c)]);
    }
    out << row.str() << '\n';
  }
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace tabsyn
