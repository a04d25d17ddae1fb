#include "fairpse/nuisance.hpp"

#include <algorithm>

#include "fairpse/errors.hpp"

namespace fairpse {

namespace {

void check_allowed(const FeatureSpec& spec, const Dataset& data,
                   const std::vector<std::string>& forbidden, const std::string& which) {
  spec.validate_against(data);
  for (const auto& col : spec.referenced_columns()) {
    if (std::find(forbidden.begin(), forbidden.end(), col) != forbidden.end()) {
      throw Error(ErrorCode::bad_spec,
                  which + " feature spec may not condition on column " + col);
    }
  }
}

}  // namespace

void validate_conditioning_sets(const NuisanceConfig& cfg, const Dataset& data) {
  check_allowed(cfg.psi_spec, data, {"y"}, "psi");
  check_allowed(cfg.pi_spec, data, {"s", "m", "l", "y"}, "pi");
  if (cfg.fm_spec) check_allowed(*cfg.fm_spec, data, {"m", "l", "y"}, "f_m");
  if (cfg.fl_spec) check_allowed(*cfg.fl_spec, data, {"l", "y"}, "f_l");
}

NuisanceSet fit_nuisances(const Dataset& data, const NuisanceConfig& cfg) {
  validate_conditioning_sets(cfg, data);
  const bool use_cv = !cfg.cv_grid.empty();

  auto fit_binom = [&](const std::string& target, const FeatureSpec& spec, double l1) {
    double lambda = l1;
    if (use_cv) {
      lambda = select_penalty_cv(data, target, spec, cfg.cv_folds, cfg.cv_grid,
                                 cfg.cv_seed, Family::binomial);
    }
    return fit_binomial(data, target, spec, lambda, cfg.max_iter, cfg.tol);
  };

  NuisanceSet out;
  out.clip_eps = cfg.clip_eps;

  if (cfg.psi_family == Family::gaussian) {
    double lambda = cfg.l1_psi;
    if (use_cv) {
      lambda = select_penalty_cv(data, "y", cfg.psi_spec, cfg.cv_folds, cfg.cv_grid,
                                 cfg.cv_seed, Family::gaussian);
    }
    out.psi = lambda > 0.0 ? fit_gaussian_lasso(data, "y", cfg.psi_spec, lambda)
                           : fit_gaussian(data, "y", cfg.psi_spec);
  } else {
    out.psi = fit_binom("y", cfg.psi_spec, cfg.l1_psi);
  }

  out.pi = fit_binom("s", cfg.pi_spec, cfg.l1_pi);
  if (cfg.fm_spec) {
    if (!data.has_column("m")) {
      throw Error(ErrorCode::bad_spec, "f_m spec given but dataset has no m column");
    }
    out.f_m = fit_binom("m", *cfg.fm_spec, cfg.l1_fm);
  }
  if (cfg.fl_spec) {
    if (!data.has_column("l")) {
      throw Error(ErrorCode::bad_spec, "f_l spec given but dataset has no l column");
    }
    out.f_l = fit_binom("l", *cfg.fl_spec, cfg.l1_fl);
  }
  return out;
}

}  // namespace fairpse
