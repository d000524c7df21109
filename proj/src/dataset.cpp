#include "cpop/dataset.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cpop/error.hpp"

namespace cpop {

int Dataset::nodes() const {
  if (obs.cols() > 0) return static_cast<int>(obs.cols());
  return ints.empty() ? 0 : static_cast<int>(ints.front().data.cols());
}

void Dataset::validate() const {
  const int D = nodes();
  if (D < 1) throw InvalidInput("dataset has no columns");
  if (obs.rows() > 0 && obs.cols() != D) throw InvalidInput("observational column count mismatch");
  std::set<int> seen;
  for (const auto& b : ints) {
    if (b.data.cols() != D) throw InvalidInput("interventional block column count mismatch");
    if (b.target < 0 || b.target >= D) throw InvalidInput("intervention target out of range");
    if (!seen.insert(b.target).second) throw InvalidInput("duplicate intervention target");
  }
}

Dataset Dataset::observational_only() const {
  Dataset out;
  out.obs = obs;
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const int D = ds.nodes();
  for (int j = 0; j < D; ++j) out << 'X' << (j + 1) << ',';
  out << "target\n";
  auto emit = [&](const Eigen::MatrixXd& m, int tag) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (int j = 0; j < D; ++j) out << format_double(m(r, j)) << ',';
      out << tag << '\n';
    }
  };
  emit(ds.obs, 0);
  for (const auto& b : ds.ints) emit(b.data, b.target + 1);
  if (!out) throw IoError("write failed for " + path);
}

namespace {

double parse_double(const std::string& s, const std::string& path, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw IoError(path + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      header.push_back(cell);
    }
  }
  if (header.size() < 2 || header.back() != "target") {
    throw IoError(path + ": last column must be 'target'");
  }
  const int D = static_cast<int>(header.size()) - 1;
  // Keep regimes in first-appearance order of rows.
  std::map<int, std::vector<std::vector<double>>> rows;
  std::size_t lineno = 1;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    cells.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != D + 1) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(D + 1) +
                    " fields");
    }
    std::vector<double> row(D);
    for (int j = 0; j < D; ++j) row[j] = parse_double(cells[j], path, lineno);
    const double t = parse_double(cells[D], path, lineno);
    const int tag = static_cast<int>(t);
    if (tag != t || tag < 0 || tag > D) {
      throw IoError(path + ":" + std::to_string(lineno) + ": target must be in 0..D");
    }
    rows[tag].push_back(std::move(row));
  }
  auto to_matrix = [D](const std::vector<std::vector<double>>& r) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), D);
    for (std::size_t i = 0; i < r.size(); ++i)
      for (int j = 0; j < D; ++j) m(static_cast<Eigen::Index>(i), j) = r[i][j];
    return m;
  };
  Dataset ds;
  ds.obs = Eigen::MatrixXd(0, D);
  for (const auto& [tag, r] : rows) {
    if (tag == 0) {
      ds.obs = to_matrix(r);
    } else {
      ds.ints.push_back({tag - 1, to_matrix(r)});
    }
  }
  ds.validate();
  return ds;
}

}  // namespace cpop
