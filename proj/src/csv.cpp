#include "detangle/core_data.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace detangle {

namespace {

// Splits RFC-4180 text into rows of fields. Quoted fields may contain
// separators, doubled quotes and line breaks.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    rows.push_back(std::move(row));
    row.clear();
    field_started = false;
  };
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw ParseError("stray quote inside unquoted CSV field");
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Dataset parse_csv(std::string_view text, const Schema& schema) {
  auto rows = split_csv(text);
  if (rows.empty()) throw ParseError("CSV has no header row");
  const auto names = schema.names();
  if (rows.front() != names) {
    std::string got;
    for (const auto& h : rows.front()) got += (got.empty() ? "" : ",") + h;
    throw ParseError("CSV header \"" + got + "\" does not match schema attribute order");
  }
  const std::size_t m = schema.size();
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(m));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "row " + std::to_string(r);
    if (row.size() != m)
      throw ParseError(where + ": expected " + std::to_string(m) + " fields, found " + std::to_string(row.size()));
    for (std::size_t j = 0; j < m; ++j) {
      const auto& cell = row[j];
      const auto& a = schema[j];
      const std::string at = where + ", column \"" + a.name + "\"";
      if (cell.empty()) throw ParseError(at + ": missing value");
      double value;
      if (a.categorical()) {
        auto k = a.category_index(cell);
        if (!k) throw ParseError(at + ": \"" + cell + "\" is not in the declared domain");
        value = *k;
      } else {
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
          throw ParseError(at + ": cannot parse \"" + cell + "\" as a number");
      }
      try {
        schema.check_value(j, value);
      } catch (const SchemaError& e) {
        throw ParseError(at + ": " + e.what());
      }
      cells(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) = value;
    }
  }
  return Dataset(schema, std::move(cells));
}

Dataset load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open data file \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema);
}

std::string format_csv(const Dataset& data) {
  std::string out;
  const auto& schema = data.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (j) out.push_back(',');
    out += quote_if_needed(schema[j].name);
  }
  out.push_back('\n');
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (j) out.push_back(',');
      out += quote_if_needed(schema.format_value(j, data.at(i, j)));
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write \"" + path + "\"");
  out << format_csv(data);
}

}  // namespace detangle
