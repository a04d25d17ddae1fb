#pragma once

#include <cstddef>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "fairpse/dataset.hpp"
#include "fairpse/nuisance.hpp"
#include "fairpse/pse.hpp"

namespace fairpse {

enum class RiskMode { mse_mean_diff, xent_mean_diff, xent_log_odds };

const char* risk_mode_name(RiskMode m);
RiskMode risk_mode_from_string(const std::string& s);

// regularity guard on the gradient variance
inline constexpr double kSigma2Floor = 1e-8;

struct LambdaSearchConfig {
  int grid_size = 2001;
  // bracket; ignored when auto_bracket is true (then sized from the
  // constraint scale, and [eps_lo, eps_hi] in the log-odds mode)
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  bool auto_bracket = true;
  int refine_passes = 2;
  double tolerance = 1e-6;  // on |Theta_n(psi_{n,lambda})| at the optimum
};

// psi*_n: the base predictor plus everything needed to reproduce the
// correction on new rows (the gradient recipe is scenario + nuisances).
struct FairPredictor {
  RiskMode mode = RiskMode::mse_mean_diff;
  Scenario scenario;
  NuisanceSet nuisances;
  ThetaMethod theta_method = ThetaMethod::plugin;
  double theta_n = 0.0;
  double sigma2_n = 0.0;
  double lambda_n = 0.0;
  double bound = 0.0;
  double achieved_constraint = 0.0;  // |Theta| at the selected lambda
  bool no_sign_change = false;       // search could not meet cfg.tolerance
  double epsilon_lo = 0.0;           // log-odds feasible interval
  double epsilon_hi = 0.0;
};

struct FairPredictions {
  std::vector<double> values;
  std::size_t clamped = 0;  // xent modes only; mse outputs are never clamped
};

// Equality constraint (bound = 0): psi*(z) = psi(z) - theta_n D(z)/sigma2_n.
// Inequality: no-op when |theta_n| <= bound, else theta shrunk to the
// boundary. Throws degenerate_variance when sigma2 <= 1e-8.
FairPredictor adjust_mse(const NuisanceSet& nuis, const Scenario& scenario,
                         const ConstraintEstimate& est, const GradientField& field,
                         double bound = 0.0);

// theta_n^2 / sigma2_n, the predicted mean squared difference E[(psi*-psi)^2]
double mse_gap(const ConstraintEstimate& est, const GradientField& field);

// The lambda-solved form of the mse adjustment: lambda_n nulls the chosen
// estimator's constraint estimate along the mse path psi - (lambda/2) D,
// which is closed form because that path is linear. Equivalent to adjust_mse
// with sigma2 replaced by the method's own estimate of E[D^2] (the estimator
// applied to D itself); for the plug-in this marginalizes the mediators
// analytically and is far better behaved under weak overlap than the raw
// sample mean of D^2, and the estimated constraint of the result is exactly
// zero (or exactly on the boundary when bound > 0).
FairPredictor solve_mse(const Dataset& data, const NuisanceSet& nuis,
                        const Scenario& scenario, ThetaMethod theta_method,
                        double bound = 0.0);

// Unit-interval root of the constraint-specific-path quadratic
// (lambda d) psi_l^2 - (1 + lambda d) psi_l + psi = 0, evaluated in the
// rationalized form 2 psi / (1 + lambda d + sqrt((1+lambda d)^2 - 4 lambda d psi)),
// with the first-order expansion psi - lambda d psi (1-psi) below 1e-8.
// The result satisfies (psi_l - psi)/(psi_l (1-psi_l)) + lambda d = 0 and
// lies in [0,1]. Throws negative_discriminant if the discriminant is negative
// beyond rounding (provably impossible, so it signals a bug upstream).
double xent_path_point(double psi_value, double d_value, double lambda, int s);

// Grid search for lambda_n = argmin |Theta_n(psi_{n,lambda})| under the
// chosen constraint estimator (plug-in and ipw-alt re-evaluate the candidate;
// ipw/aipw substitute it for Y). The auto bracket is +-4|theta|/sigma2 and is
// doubled when the optimum lands on an endpoint, then refined around the best
// cell. A bound t > 0 targets the boundary sign(theta) * t instead of zero.
FairPredictor solve_lambda_xent(const Dataset& data, const NuisanceSet& nuis,
                                const Scenario& scenario, ThetaMethod theta_method,
                                const LambdaSearchConfig& cfg, double bound = 0.0);

// Log-odds-scale constraint: psi*(z) = psi(z) - lambda_n D(z) with lambda_n
// searched over the feasible interval [eps_lo, eps_hi] computed from the
// per-row unit-interval conditions over observed rows. Throws
// empty_feasible_interval when the intersection is empty.
FairPredictor adjust_log_odds(const Dataset& data, const NuisanceSet& nuis,
                              const Scenario& scenario, const LambdaSearchConfig& cfg);

FairPredictions predict_fair(const FairPredictor& fp, const Dataset& data);

// one row of the mode formula from precomputed base prediction and gradient;
// increments *clamped when a unit-interval clamp fires (xent modes)
double fair_value(const FairPredictor& fp, double psi, double d, int s,
                  std::size_t* clamped);

nlohmann::json fair_predictor_to_json(const FairPredictor& fp);
FairPredictor fair_predictor_from_json(const nlohmann::json& j);

}  // namespace fairpse
