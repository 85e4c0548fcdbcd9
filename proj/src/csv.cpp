#include "globalqr/csv.hpp"

#include "globalqr/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace gqr {

std::size_t CsvTable::index(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorKind::InvalidData, "no column named '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

namespace {

// Splits one record, which may span several physical lines inside quotes.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  std::string field;
  bool quoted = false, any = false, was_quoted = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      if (!field.empty() || was_quoted)
        throw Error(ErrorKind::InvalidData, "line " + std::to_string(line) + ": stray quote");
      quoted = was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (ch == '\n') {
      ++line;
      break;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (quoted) throw Error(ErrorKind::InvalidData, "unterminated quote at end of file");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

bool needs_quotes(const std::string& s) { return s.find_first_of(",\"\r\n") != std::string::npos; }

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::size_t line = 1;
  std::vector<std::string> fields;
  if (!read_record(in, t.header, line) || (t.header.size() == 1 && t.header[0].empty()))
    throw Error(ErrorKind::InvalidData, "empty CSV: a header row is required");
  if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
  std::set<std::string> seen;
  for (const auto& h : t.header)
    if (!seen.insert(h).second) throw Error(ErrorKind::InvalidData, "duplicate column name '" + h + "'");
  while (true) {
    const std::size_t start = line;
    if (!read_record(in, fields, line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != t.header.size())
      throw Error(ErrorKind::InvalidData, "line " + std::to_string(start) + ": expected " +
                                              std::to_string(t.header.size()) + " fields, found " +
                                              std::to_string(fields.size()));
    t.rows.push_back(fields);
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidData, "cannot open '" + path + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      if (needs_quotes(row[j])) {
        out << '"';
        for (char c : row[j]) {
          if (c == '"') out << '"';
          out << c;
        }
        out << '"';
      } else {
        out << row[j];
      }
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, std::string_view what) {
  auto trimmed = text;
  while (!trimmed.empty() && trimmed.front() == ' ') trimmed.remove_prefix(1);
  while (!trimmed.empty() && trimmed.back() == ' ') trimmed.remove_suffix(1);
  if (!trimmed.empty() && trimmed.front() == '+') trimmed.remove_prefix(1);
  double v = 0;
  auto res = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
  if (trimmed.empty() || res.ec != std::errc() || res.ptr != trimmed.data() + trimmed.size())
    throw Error(ErrorKind::InvalidData, std::string(what) + ": '" + std::string(text) + "' is not a number");
  return v;
}

Dataset dataset_from_csv(const CsvTable& table, const std::string& response, const std::vector<std::string>& interesting,
                         const std::vector<std::string>& nuisance, const std::vector<std::string>& categorical) {
  for (const auto& name : categorical) {
    if (name == response) throw Error(ErrorKind::InvalidData, "the response cannot be categorical");
    table.index(name);
  }
  auto is_categorical = [&](const std::string& name) {
    return std::find(categorical.begin(), categorical.end(), name) != categorical.end();
  };
  auto where = [](std::size_t r, const std::string& name) {
    return "row " + std::to_string(r + 1) + ", column '" + name + "'";
  };

  const std::size_t yi = table.index(response);
  std::vector<double> y;
  y.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) y.push_back(parse_number(table.rows[r][yi], where(r, response)));

  std::vector<Column> columns;
  std::vector<std::string> names = interesting;
  names.insert(names.end(), nuisance.begin(), nuisance.end());
  for (const auto& name : names) {
    if (name == response) throw Error(ErrorKind::InvalidData, "column '" + name + "' is the response");
    if (std::any_of(columns.begin(), columns.end(), [&](const Column& c) { return c.name == name; })) continue;
    const std::size_t ci = table.index(name);
    if (is_categorical(name)) {
      std::vector<std::string> labels;
      for (const auto& row : table.rows) labels.push_back(row[ci]);
      columns.push_back(Column::categorical(name, std::move(labels)));
    } else {
      std::vector<double> values;
      for (std::size_t r = 0; r < table.rows.size(); ++r) values.push_back(parse_number(table.rows[r][ci], where(r, name)));
      columns.push_back(Column::continuous(name, std::move(values)));
    }
  }
  return Dataset(response, std::move(y), std::move(columns), interesting, nuisance);
}

CsvTable dataset_to_csv(const Dataset& dataset) {
  CsvTable t;
  t.header.push_back(dataset.response_name());
  for (const auto& c : dataset.columns()) t.header.push_back(c.name);
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    std::vector<std::string> row{format_number(dataset.y()[i])};
    for (const auto& c : dataset.columns())
      row.push_back(c.type == ColumnType::Continuous ? format_number(c.numeric[i]) : c.labels[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Eigen::MatrixXd matrix_from_csv(const CsvTable& table) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t c = 0; c < table.header.size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_number(table.rows[r][c], "row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1));
  return m;
}

CsvTable matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
  if (header.size() != static_cast<std::size_t>(m.cols()))
    throw Error(ErrorKind::DimensionMismatch, "header length does not match the matrix");
  CsvTable t;
  t.header = header;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format_number(m(i, j)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace gqr
