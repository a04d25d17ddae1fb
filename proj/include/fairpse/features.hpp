#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "fairpse/dataset.hpp"

namespace fairpse {

// Model formula as a list of terms: "1" (intercept), "col" (raw column),
// or "a:b" (pairwise interaction). Example: ["1","s","x1","x2","x1:x2"].
struct FeatureSpec {
  std::vector<std::string> terms;

  static FeatureSpec from_terms(std::vector<std::string> t) {
    return FeatureSpec{std::move(t)};
  }
  std::size_t size() const { return terms.size(); }
  bool is_intercept_term(std::size_t j) const { return terms[j] == "1"; }

  // column names the spec reads from, without "1"
  std::vector<std::string> referenced_columns() const;
  // every referenced column exists in the dataset, else throws
  void validate_against(const Dataset& data) const;
};

Eigen::MatrixXd design_matrix(const Dataset& data, const FeatureSpec& spec);

using Overrides = std::vector<std::pair<std::string, double>>;

// A linear predictor spec*coef compiled against one dataset, with an optional
// set of columns frozen at constant values (counterfactual evaluation).
// Fixed columns are folded at construction so per-row evaluation touches only
// the live columns.
class CompiledLinear {
 public:
  CompiledLinear(const FeatureSpec& spec, const Eigen::VectorXd& coef,
                 const Dataset& data, const Overrides& fixed = {});

  double operator()(std::size_t row) const {
    double v = const_part_;
    for (const auto& t : lin_) v += t.w * t.col[row];
    for (const auto& t : quad_) v += t.w * t.a[row] * t.b[row];
    return v;
  }

 private:
  struct Lin {
    const double* col;
    double w;
  };
  struct Quad {
    const double* a;
    const double* b;
    double w;
  };
  double const_part_ = 0.0;
  std::vector<Lin> lin_;
  std::vector<Quad> quad_;
};

}  // namespace fairpse
