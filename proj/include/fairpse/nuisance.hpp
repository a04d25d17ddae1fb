#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpse/dataset.hpp"
#include "fairpse/glm.hpp"

namespace fairpse {

// How each nuisance model is specified and fitted. Misspecification studies
// are expressed purely through the FeatureSpecs (e.g. omitting x1:x2).
struct NuisanceConfig {
  FeatureSpec psi_spec;
  FeatureSpec pi_spec;
  std::optional<FeatureSpec> fm_spec;
  std::optional<FeatureSpec> fl_spec;
  Family psi_family = Family::gaussian;

  // fixed L1 penalties (0 = maximum likelihood); when cv_grid is nonempty the
  // penalty of every model is selected by k-fold cross-validation instead
  double l1_psi = 0.0, l1_pi = 0.0, l1_fm = 0.0, l1_fl = 0.0;
  std::vector<double> cv_grid;
  int cv_folds = 10;
  std::uint64_t cv_seed = 1;

  int max_iter = 100;
  double tol = 1e-8;
  double clip_eps = kDefaultClipEps;
};

// Fitted psi_n, pi_n, f_{n,M}, f_{n,L}. f_m / f_l are absent for graphs
// without the corresponding mediator column.
struct NuisanceSet {
  GlmModel psi;
  GlmModel pi;
  std::optional<GlmModel> f_m;
  std::optional<GlmModel> f_l;
  double clip_eps = kDefaultClipEps;

  bool all_converged() const {
    return psi.diag.converged && pi.diag.converged &&
           (!f_m || f_m->diag.converged) && (!f_l || f_l->diag.converged);
  }
};

// Rejects feature specs that read outside each nuisance's legal conditioning
// set (pi may read only covariates; f_m adds s; f_l adds m; psi adds l).
void validate_conditioning_sets(const NuisanceConfig& cfg, const Dataset& data);

NuisanceSet fit_nuisances(const Dataset& data, const NuisanceConfig& cfg);

}  // namespace fairpse
