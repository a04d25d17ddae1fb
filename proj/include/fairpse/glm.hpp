#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fairpse/dataset.hpp"
#include "fairpse/features.hpp"

namespace fairpse {

enum class Family { gaussian, binomial };

inline constexpr double kDefaultClipEps = 1e-6;

struct FitDiagnostics {
  int iterations = 0;
  bool converged = true;
  double deviance = 0.0;
  // penalized objective (or deviance for IRLS) after each step; tests assert
  // this sequence is non-increasing
  std::vector<double> objective_path;
};

struct GlmModel {
  Family family = Family::gaussian;
  FeatureSpec spec;
  Eigen::VectorXd coef;
  double l1_penalty = 0.0;
  FitDiagnostics diag;
};

// Ordinary least squares. Throws rank_deficient when the design has
// linearly dependent columns and non_finite on bad inputs.
GlmModel fit_gaussian(const Dataset& data, const std::string& target,
                      const FeatureSpec& spec);

// l1_penalty = 0: IRLS maximum likelihood with step halving (deviance is
// non-increasing by construction), tol on the max coefficient change.
// l1_penalty > 0: coordinate-descent penalized likelihood, glmnet-style
// mean-scale objective (1/n)*nll + lambda*||slopes||_1, intercept unpenalized.
// Divergence (separation) is reported through diag.converged = false; the
// last iterate is kept so callers may proceed with a warning.
GlmModel fit_binomial(const Dataset& data, const std::string& target,
                      const FeatureSpec& spec, double l1_penalty = 0.0,
                      int max_iter = 100, double tol = 1e-8);

// L1-penalized least squares by coordinate descent, same objective scaling
// as the binomial path: (1/(2n))*rss + lambda*||slopes||_1.
GlmModel fit_gaussian_lasso(const Dataset& data, const std::string& target,
                            const FeatureSpec& spec, double l1_penalty,
                            int max_iter = 1000, double tol = 1e-7);

// K-fold cross-validation over the penalty grid; returns the grid value with
// the smallest mean held-out deviance (ties go to the larger penalty). Fold
// assignment is a deterministic function of (n, folds, seed). A fold that
// fails to fit excludes that (fold, lambda) cell with a warning on stderr.
double select_penalty_cv(const Dataset& data, const std::string& target,
                         const FeatureSpec& spec, int folds,
                         const std::vector<double>& grid, std::uint64_t seed,
                         Family family = Family::binomial);

// Linear predictor through the link; `overrides` pins columns at constant
// values, which is how counterfactual evaluations like psi(1, W) and
// f(M | S=0, X) are expressed. Binomial output is clipped to
// [clip_eps, 1 - clip_eps].
std::vector<double> predict(const GlmModel& model, const Dataset& data,
                            const Overrides& overrides = {},
                            double clip_eps = kDefaultClipEps);

double binomial_deviance(const std::vector<double>& y, const std::vector<double>& p);

}  // namespace fairpse
