#include "mrd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <vector>

#include "mrd/errors.hpp"

namespace mrd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, const std::string& source, std::size_t line) {
  const std::string t = trim(cell);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ValidationError(source + ": line " + std::to_string(line) + ": '" + t +
                          "' is not a finite number");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

DataFile parse_data_csv(std::istream& in, const std::string& source) {
  DataFile out;
  std::vector<double> values;
  std::string raw;
  std::size_t line = 0;
  bool header_allowed = true;
  while (std::getline(in, raw)) {
    ++line;
    const std::string t = trim(raw);
    if (t.empty()) continue;
    if (header_allowed && t.find('=') != std::string::npos) {
      VarianceEstimate v{0.0, 0.0};
      bool has_s2 = false, has_nu = false;
      for (const auto& field : split(t, ',')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) {
          throw ValidationError(source + ": line " + std::to_string(line) +
                                ": header field '" + trim(field) + "' is not key=value");
        }
        const std::string key = trim(field.substr(0, eq));
        const double value = parse_number(field.substr(eq + 1), source, line);
        if (key == "s2") {
          v.s2 = value;
          has_s2 = true;
        } else if (key == "nu") {
          v.nu = value;
          has_nu = true;
        } else {
          throw ValidationError(source + ": line " + std::to_string(line) +
                                ": unknown header key '" + key + "'");
        }
      }
      if (!has_s2 || !has_nu) {
        throw ValidationError(source + ": line " + std::to_string(line) +
                              ": header needs both s2 and nu");
      }
      if (!(v.s2 > 0.0) || !(v.nu >= 1.0)) {
        throw ValidationError(source + ": line " + std::to_string(line) +
                              ": need s2 > 0 and nu >= 1");
      }
      out.variance = v;
      header_allowed = false;
      continue;
    }
    header_allowed = false;
    values.push_back(parse_number(t, source, line));
  }
  if (values.empty()) throw ValidationError(source + ": no observations");
  out.x = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
  return out;
}

DataFile read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open data file");
  return parse_data_csv(in, path);
}

Eigen::MatrixXd parse_matrix_csv(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string t = trim(raw);
    if (t.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(t, ',')) row.push_back(parse_number(cell, source, line));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError(source + ": line " + std::to_string(line) + ": expected " +
                            std::to_string(rows.front().size()) + " columns, found " +
                            std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(source + ": empty matrix");
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open matrix file");
  return parse_matrix_csv(in, path);
}

void write_matrix_csv(std::ostream& out, const Eigen::Ref<const Eigen::MatrixXd>& m) {
  out << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j > 0 ? "," : "") << m(i, j);
    out << '\n';
  }
}

void write_decision_csv(std::ostream& out, const DecisionVector& d) {
  std::vector<Index> rank(static_cast<std::size_t>(d.size()), 0);
  for (std::size_t k = 0; k < d.order.size(); ++k) {
    rank[static_cast<std::size_t>(d.order[k])] = static_cast<Index>(k + 1);
  }
  out << std::setprecision(17) << "index,statistic,threshold,rejected,rank\n";
  for (Index j = 0; j < d.size(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    out << j + 1 << ',' << d.statistic(j) << ',' << d.threshold(j) << ','
        << (d.reject[uj] ? "true" : "false") << ',';
    if (rank[uj] > 0) out << rank[uj];
    out << '\n';
  }
}

}  // namespace mrd
