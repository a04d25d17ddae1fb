#pragma once

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "fairpse/adjust.hpp"
#include "fairpse/dataset.hpp"
#include "fairpse/nuisance.hpp"
#include "fairpse/pse.hpp"

namespace fairpse {

enum class DgpTag { misspec_6_1, highdim_6_2, ate_sec4, nde_sec4, custom_discrete };

const char* dgp_name(DgpTag t);
DgpTag dgp_from_string(const std::string& s);

struct DgpSpec {
  DgpTag tag = DgpTag::misspec_6_1;
  std::uint64_t seed = 1;
  int p = 100;              // highdim covariate dimension (>= 5)
  double x_lo = -2.0;       // ate/nde covariate support
  double x_hi = 2.0;

  static DgpSpec from_json(const nlohmann::json& j);
};

Dataset generate(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);

// true functionals, used to score fitted predictors on an oracle test set
std::vector<double> true_psi0(const DgpSpec& dgp, const Dataset& data);
std::vector<double> true_gradient(const DgpSpec& dgp, const Dataset& data);
double noise_variance(const DgpSpec& dgp);

// True constraint of an arbitrary rule evaluated at counterfactual
// configurations (bit 0 = m, bit 1 = l), with the mediator sums taken
// exactly under the true DGP conditionals; only the covariate draws in
// `data` are Monte Carlo. This keeps oracle scoring free of the noise a raw
// weighted average over sampled (s, m, l) would add.
double true_constraint_of(const DgpSpec& dgp, const Dataset& data, const PredRule& g);

struct OracleReport {
  double theta = 0.0;          // Theta_rho(psi_0)
  double sigma2_d = 0.0;       // sigma^2(D_0)
  double risk_psi0 = 0.0;      // R(psi_0)
  double risk_psistar = 0.0;   // R(psi*_0) = R(psi_0) + theta^2/sigma^2
  double noise_var = 0.0;
};

// Monte Carlo approximations over test_n draws of the covariate law, using
// the closed-form DGP functionals (conditional sums over s, m, l are exact,
// so only the covariate integral is sampled).
OracleReport oracle_truths(const DgpSpec& dgp, std::size_t test_n, std::uint64_t seed);

// deterministic quadrature counterparts for the worked examples
double ate_sigma2_quadrature(double x_lo, double x_hi);
double ate_naive_gap_quadrature(double x_lo, double x_hi);
double theta61_quadrature();
double sigma2_61_quadrature();
double theta62_quadrature();

// which nuisances keep their correct specification (dropping the x1*x2
// cross-product is the misspecification used by the 6.1 design)
struct MisspecPattern {
  bool psi = true;
  bool pi = true;
  bool f_m = true;
  bool f_l = true;
};

NuisanceConfig nuisance_config_for(const DgpSpec& dgp, const MisspecPattern& pattern,
                                   const std::vector<double>& cv_grid,
                                   std::uint64_t cv_seed);

struct SimPlan {
  DgpSpec dgp;
  std::vector<std::size_t> sizes{200, 1600};
  int replications = 200;
  MisspecPattern pattern;
  std::vector<ThetaMethod> methods{ThetaMethod::plugin, ThetaMethod::ipw,
                                   ThetaMethod::ipw_alt, ThetaMethod::aipw};
  // bound grid default is a tool choice, not a reference value
  std::vector<double> bounds{0.0};
  std::size_t test_n = 100000;
  RiskMode risk = RiskMode::mse_mean_diff;
  std::uint64_t base_seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  int lambda_grid = 2001;
  std::vector<double> cv_grid;  // nonempty: select penalties by cv

  static SimPlan from_json(const nlohmann::json& j);
  void validate() const;
};

struct SimCell {
  int rep = 0;
  std::size_t n = 0;
  ThetaMethod method = ThetaMethod::plugin;
  double bound = 0.0;
  double risk = 0.0;
  double constraint = 0.0;  // true constraint of psi*_n on the oracle test set
  double theta_n = 0.0;
  double lambda_n = 0.0;
  double seconds = 0.0;
  bool ok = false;
  std::string error;
};

struct SimResult {
  OracleReport oracle;
  std::vector<SimCell> cells;
};

SimResult run_plan(const SimPlan& plan);

struct SummaryRow {
  std::size_t n = 0;
  ThetaMethod method = ThetaMethod::plugin;
  double bound = 0.0;
  int n_ok = 0;
  double risk_q1 = 0, risk_med = 0, risk_q3 = 0;
  double cons_q1 = 0, cons_med = 0, cons_q3 = 0;
  double abs_cons_med = 0;
};

std::vector<SummaryRow> summarize(const SimResult& result);

// The seconds column is written as 0 unless include_timing is set: measured
// wall time is not a function of the seed and would break byte-for-byte
// reproducibility of the result file. SimCell keeps the measured value.
void write_result_csv(const SimResult& result, const std::string& path,
                      bool include_timing = false);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);

}  // namespace fairpse
