#include "fairpse/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fairpse/errors.hpp"

namespace fairpse {

const std::vector<double>& Dataset::column(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error(ErrorCode::unknown_column, "unknown column: " + name);
  }
  return cols_[it->second];
}

void Dataset::add_column(const std::string& name, std::vector<double> values) {
  if (index_.count(name)) {
    throw Error(ErrorCode::data, "duplicate column: " + name);
  }
  if (!names_.empty() && values.size() != n_) {
    throw Error(ErrorCode::data, "column " + name + " has " +
                                     std::to_string(values.size()) +
                                     " rows, expected " + std::to_string(n_));
  }
  if (names_.empty()) n_ = values.size();
  index_[name] = names_.size();
  names_.push_back(name);
  cols_.push_back(std::move(values));
}

void Dataset::require_binary(const std::string& name) const {
  const auto& c = column(name);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] != 0.0 && c[i] != 1.0) {
      throw Error(ErrorCode::data, "column " + name + " not binary at row " +
                                       std::to_string(i + 1) + " (value " +
                                       std::to_string(c[i]) + ")");
    }
  }
}

void Dataset::require_finite() const {
  for (std::size_t j = 0; j < cols_.size(); ++j) {
    for (std::size_t i = 0; i < cols_[j].size(); ++i) {
      if (!std::isfinite(cols_[j][i])) {
        throw Error(ErrorCode::non_finite,
                    "non-finite value in column " + names_[j] + " at row " +
                        std::to_string(i + 1));
      }
    }
  }
}

std::vector<std::string> Dataset::x_columns() const {
  std::vector<std::string> out;
  if (has_column("x")) out.push_back("x");
  for (std::size_t p = 1;; ++p) {
    std::string name = "x" + std::to_string(p);
    if (!has_column(name)) break;
    out.push_back(name);
  }
  return out;
}

Dataset Dataset::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::data, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::data, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  if (names.empty()) throw Error(ErrorCode::data, path + ": no header columns");

  std::vector<std::vector<double>> cols(names.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    const char* p = line.c_str();
    for (std::size_t j = 0; j < names.size(); ++j) {
      char* end = nullptr;
      double v = std::strtod(p, &end);
      if (end == p) {
        throw Error(ErrorCode::data, path + ": bad numeric field at line " +
                                         std::to_string(row) + ", column " +
                                         names[j]);
      }
      cols[j].push_back(v);
      p = end;
      if (*p == ',') ++p;
      else if (*p != '\0' && j + 1 < names.size()) {
        throw Error(ErrorCode::data, path + ": malformed line " + std::to_string(row));
      }
    }
  }

  Dataset d;
  for (std::size_t j = 0; j < names.size(); ++j) {
    d.add_column(names[j], std::move(cols[j]));
  }
  d.require_finite();
  return d;
}

void Dataset::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::data, "cannot write " + path);
  for (std::size_t j = 0; j < names_.size(); ++j) {
    out << (j ? "," : "") << names_[j];
  }
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", cols_[j][i]);
      if (j) out << ',';
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace fairpse
