#include "fairpse/features.hpp"

#include <algorithm>

#include "fairpse/errors.hpp"

namespace fairpse {

namespace {

// splits "a:b" into its factors; raw terms yield one factor
std::vector<std::string> term_factors(const std::string& term) {
  auto pos = term.find(':');
  if (pos == std::string::npos) return {term};
  return {term.substr(0, pos), term.substr(pos + 1)};
}

}  // namespace

std::vector<std::string> FeatureSpec::referenced_columns() const {
  std::vector<std::string> out;
  for (const auto& t : terms) {
    if (t == "1") continue;
    for (auto& f : term_factors(t)) {
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
  }
  return out;
}

void FeatureSpec::validate_against(const Dataset& data) const {
  for (const auto& t : terms) {
    if (t == "1") continue;
    for (auto& f : term_factors(t)) {
      if (!data.has_column(f)) {
        throw Error(ErrorCode::unknown_column,
                    "feature term '" + t + "' references unknown column " + f);
      }
    }
  }
}

Eigen::MatrixXd design_matrix(const Dataset& data, const FeatureSpec& spec) {
  spec.validate_against(data);
  const auto n = static_cast<Eigen::Index>(data.n_rows());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(spec.size()));
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const auto& t = spec.terms[j];
    if (t == "1") {
      X.col(static_cast<Eigen::Index>(j)).setOnes();
      continue;
    }
    auto fs = term_factors(t);
    const auto& a = data.column(fs[0]);
    if (fs.size() == 1) {
      for (Eigen::Index i = 0; i < n; ++i) X(i, static_cast<Eigen::Index>(j)) = a[static_cast<std::size_t>(i)];
    } else {
      const auto& b = data.column(fs[1]);
      for (Eigen::Index i = 0; i < n; ++i) {
        X(i, static_cast<Eigen::Index>(j)) =
            a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
      }
    }
  }
  return X;
}

CompiledLinear::CompiledLinear(const FeatureSpec& spec, const Eigen::VectorXd& coef,
                               const Dataset& data, const Overrides& fixed) {
  if (static_cast<std::size_t>(coef.size()) != spec.size()) {
    throw Error(ErrorCode::bad_spec, "coefficient length does not match feature spec");
  }
  auto fixed_value = [&fixed](const std::string& name) -> const double* {
    for (const auto& [k, v] : fixed) {
      if (k == name) return &v;
    }
    return nullptr;
  };

  for (std::size_t j = 0; j < spec.size(); ++j) {
    const double w = coef(static_cast<Eigen::Index>(j));
    const auto& t = spec.terms[j];
    if (t == "1") {
      const_part_ += w;
      continue;
    }
    auto fs = term_factors(t);
    if (fs.size() == 1) {
      if (const double* v = fixed_value(fs[0])) {
        const_part_ += w * (*v);
      } else {
        lin_.push_back({data.column(fs[0]).data(), w});
      }
      continue;
    }
    const double* va = fixed_value(fs[0]);
    const double* vb = fixed_value(fs[1]);
    if (va && vb) {
      const_part_ += w * (*va) * (*vb);
    } else if (va) {
      lin_.push_back({data.column(fs[1]).data(), w * (*va)});
    } else if (vb) {
      lin_.push_back({data.column(fs[0]).data(), w * (*vb)});
    } else {
      quad_.push_back({data.column(fs[0]).data(), data.column(fs[1]).data(), w});
    }
  }
}

}  // namespace fairpse
