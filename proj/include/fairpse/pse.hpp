#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fairpse/dag.hpp"
#include "fairpse/dataset.hpp"
#include "fairpse/nuisance.hpp"

namespace fairpse {

enum class ThetaMethod { plugin, ipw, ipw_alt, aipw };

const char* method_name(ThetaMethod m);
ThetaMethod method_from_string(const std::string& s);

// rho1 = {s->y, s->l->y} and rho2 = {s->y, s->m->y, s->m->l->y} on the
// (x, s, m, l, y) graph; generic covers any identified rho whose partition
// mediators map onto the binary m / l columns.
struct Scenario {
  enum class Tag { rho1, rho2, generic };
  Tag tag = Tag::rho1;
  CausalPartition part;

  static Scenario rho1();
  static Scenario rho2();
  static Scenario generic(CausalPartition p);
  // picks the rho1/rho2 fast path when the partition matches one of them
  static Scenario from_partition(const CausalPartition& p);
};

const char* scenario_name(Scenario::Tag t);

struct ConstraintEstimate {
  double value = 0.0;
  ThetaMethod method = ThetaMethod::plugin;
  std::vector<double> contributions;  // value == mean(contributions)
};

// sd(contributions)/sqrt(n): the Monte Carlo standard error of the estimate
double standard_error(const ConstraintEstimate& est);

struct GradientField {
  std::vector<double> d;
  double sigma2 = 0.0;  // mean of squared values, sequential summation
  Scenario::Tag scenario = Scenario::Tag::rho1;
};

// Prediction rule evaluated at (s, mediator configuration, row). The
// configuration is a bitmask over the engine's enumerated mediator columns
// (bit 0 = m, bit 1 = l when present).
using PredRule = std::function<double(int s, unsigned cfg, std::size_t i)>;

// Evaluation engine for one (dataset, nuisances, scenario) triple: caches the
// clipped nuisance predictions at every counterfactual configuration once,
// then serves the estimators, the gradient, and constraint re-evaluations of
// arbitrary prediction rules (used by the lambda searches).
class PseEngine {
 public:
  PseEngine(const Dataset& data, const NuisanceSet& nuis, const Scenario& scenario);

  std::size_t n_rows() const { return n_; }
  int n_vars() const { return static_cast<int>(vars_.size()); }
  unsigned n_configs() const { return 1u << vars_.size(); }
  const Scenario& scenario() const { return scenario_; }

  ConstraintEstimate theta(ThetaMethod method) const;
  GradientField gradient() const;

  // cached psi_n and gradient values at counterfactual configurations
  double psi_at(int s, unsigned cfg, std::size_t i) const { return psi_[idx(s, cfg)][i]; }
  double psi_observed(int s, std::size_t i) const { return psi_obs_[s][i]; }
  double d_at(int s, unsigned cfg, std::size_t i) const;
  double d_observed(std::size_t i) const;

  // mean-difference plug-in constraint of an arbitrary rule (the edge
  // g-formula sum with the empirical X distribution)
  double plugin_constraint_of(const PredRule& g) const;
  // log-odds-scale plug-in constraint; rule values are clamped inside (0,1)
  // by clip_eps before the logit
  double plugin_logodds_constraint_of(const PredRule& g) const;
  // the four estimators with Y and psi_n replaced by an arbitrary rule
  // (plug-in / ipw-alt re-evaluate the rule; ipw / aipw substitute the rule
  // for Y, since the constraint is a functional of the candidate predictor)
  double theta_of_rule(ThetaMethod method, const PredRule& g) const;

 private:
  unsigned idx(int s, unsigned cfg) const { return (static_cast<unsigned>(s) << vars_.size()) | cfg; }
  double fvar(std::size_t v, int value, int s_assign, unsigned cfg, std::size_t i) const;
  double fvar_observed(std::size_t v, int s_assign, std::size_t i) const;
  unsigned observed_cfg(std::size_t i) const;
  void require_rho12(const char* what) const;

  ConstraintEstimate theta_plugin_impl() const;
  ConstraintEstimate theta_ipw_impl() const;
  ConstraintEstimate theta_ipw_alt_impl() const;
  ConstraintEstimate theta_aipw_impl() const;

  std::size_t n_ = 0;
  Scenario scenario_;
  double clip_eps_ = kDefaultClipEps;

  std::vector<std::string> vars_;  // enumerated mediator columns, m before l
  std::vector<char> in_m_rho_;     // per var: member of M_rho?
  std::vector<char> is_m_col_;     // per var: the m column (else l)
  int m_var_idx_ = -1;
  int s_y_ = 1;

  const std::vector<double>* s_col_ = nullptr;
  const std::vector<double>* y_col_ = nullptr;
  std::vector<const std::vector<double>*> var_cols_;

  std::vector<double> pi1_;             // P(S=1 | X_i)
  std::vector<double> fm1_[2];          // P(M=1 | S=s, X_i)
  std::vector<double> fl1_[2][2];       // P(L=1 | S=s, M=m, X_i)
  std::vector<std::vector<double>> psi_;  // by idx(s, cfg)
  std::vector<double> psi_obs_[2];      // psi(s, observed mediators, X_i)
};

ConstraintEstimate theta_plugin(const Dataset& data, const NuisanceSet& nuis,
                                const Scenario& scenario);
ConstraintEstimate theta_ipw(const Dataset& data, const NuisanceSet& nuis,
                             const Scenario& scenario);
ConstraintEstimate theta_ipw_alt(const Dataset& data, const NuisanceSet& nuis,
                                 const Scenario& scenario);
ConstraintEstimate theta_aipw(const Dataset& data, const NuisanceSet& nuis,
                              const Scenario& scenario);
ConstraintEstimate estimate_theta(const Dataset& data, const NuisanceSet& nuis,
                                  const Scenario& scenario, ThetaMethod method);

GradientField gradient_field(const Dataset& data, const NuisanceSet& nuis,
                             const Scenario& scenario);

// sample mean of D_n; zero in population under oracle nuisances
double gradient_mean_check(const GradientField& field, const Dataset& data);

}  // namespace fairpse
