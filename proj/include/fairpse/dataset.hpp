#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace fairpse {

// Columnar dataset. All columns are stored as doubles; binary columns
// (s, m, l) hold exactly 0 or 1. Immutable after assembly apart from
// add_column, which appends a full column of matching length.
class Dataset {
 public:
  Dataset() = default;

  static Dataset read_csv(const std::string& path);
  // 17 significant digits so that write/read round-trips bit-exactly
  void write_csv(const std::string& path) const;

  std::size_t n_rows() const { return n_; }
  std::size_t n_cols() const { return names_.size(); }
  const std::vector<std::string>& column_names() const { return names_; }

  bool has_column(const std::string& name) const {
    return index_.find(name) != index_.end();
  }
  const std::vector<double>& column(const std::string& name) const;
  void add_column(const std::string& name, std::vector<double> values);

  // throws DataError listing the first offending row
  void require_binary(const std::string& name) const;
  void require_finite() const;

  // columns named x1..xp (or a single "x"); used by simulation and CLI wiring
  std::vector<std::string> x_columns() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> cols_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace fairpse
