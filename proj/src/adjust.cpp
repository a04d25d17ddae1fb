#include "fairpse/adjust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "fairpse/errors.hpp"
#include "fairpse/rng.hpp"

namespace fairpse {

const char* risk_mode_name(RiskMode m) {
  switch (m) {
    case RiskMode::mse_mean_diff: return "mse";
    case RiskMode::xent_mean_diff: return "xent";
    case RiskMode::xent_log_odds: return "xent-odds";
  }
  return "?";
}

RiskMode risk_mode_from_string(const std::string& s) {
  if (s == "mse") return RiskMode::mse_mean_diff;
  if (s == "xent") return RiskMode::xent_mean_diff;
  if (s == "xent-odds" || s == "xent_odds") return RiskMode::xent_log_odds;
  throw Error(ErrorCode::parse, "unknown risk mode: " + s);
}

namespace {

double shrink_to_bound(double theta, double bound) {
  if (std::abs(theta) <= bound) return 0.0;
  return theta - (theta > 0 ? bound : -bound);
}

void require_sigma2(double sigma2) {
  if (!(sigma2 > kSigma2Floor)) {
    throw Error(ErrorCode::degenerate_variance,
                "gradient variance " + std::to_string(sigma2) + " below floor");
  }
}

struct GridResult {
  double lambda = 0.0;
  double objective = std::numeric_limits<double>::infinity();
  int best_index = 0;
};

// deterministic argmin over an inclusive grid; ties go to the smaller lambda
// regardless of evaluation order
template <typename F>
GridResult grid_argmin(F&& objective, double lo, double hi, int size) {
  GridResult res;
  if (size < 3) size = 3;
  for (int k = 0; k < size; ++k) {
    double lambda = lo + (hi - lo) * k / double(size - 1);
    double obj = objective(lambda);
    if (obj < res.objective || (obj == res.objective && lambda < res.lambda)) {
      res.objective = obj;
      res.lambda = lambda;
      res.best_index = k;
    }
  }
  return res;
}

// grid search with endpoint extension followed by refinement around the best
// cell; `hard_interval` pins the bracket (log-odds feasibility)
template <typename F>
GridResult searched_lambda(F&& objective, double lo, double hi,
                           const LambdaSearchConfig& cfg, bool hard_interval) {
  GridResult best = grid_argmin(objective, lo, hi, cfg.grid_size);
  if (!hard_interval) {
    for (int tries = 0; tries < 8; ++tries) {
      if (best.best_index != 0 && best.best_index != cfg.grid_size - 1) break;
      double width = hi - lo;
      lo -= width;
      hi += width;
      best = grid_argmin(objective, lo, hi, cfg.grid_size);
    }
  }
  double step = (hi - lo) / double(std::max(2, cfg.grid_size - 1));
  for (int pass = 0; pass < cfg.refine_passes; ++pass) {
    double rlo = std::max(lo, best.lambda - step);
    double rhi = std::min(hi, best.lambda + step);
    GridResult refined = grid_argmin(objective, rlo, rhi, cfg.grid_size);
    if (refined.objective <= best.objective) best = refined;
    step = (rhi - rlo) / double(std::max(2, cfg.grid_size - 1));
  }
  return best;
}

}  // namespace

FairPredictor adjust_mse(const NuisanceSet& nuis, const Scenario& scenario,
                         const ConstraintEstimate& est, const GradientField& field,
                         double bound) {
  if (bound < 0.0) throw Error(ErrorCode::bad_spec, "bound must be >= 0");
  require_sigma2(field.sigma2);
  FairPredictor fp;
  fp.mode = RiskMode::mse_mean_diff;
  fp.scenario = scenario;
  fp.nuisances = nuis;
  fp.theta_method = est.method;
  fp.theta_n = est.value;
  fp.sigma2_n = field.sigma2;
  fp.bound = bound;
  fp.lambda_n = 2.0 * shrink_to_bound(est.value, bound) / field.sigma2;
  return fp;
}

double mse_gap(const ConstraintEstimate& est, const GradientField& field) {
  require_sigma2(field.sigma2);
  return est.value * est.value / field.sigma2;
}

FairPredictor solve_mse(const Dataset& data, const NuisanceSet& nuis,
                        const Scenario& scenario, ThetaMethod theta_method,
                        double bound) {
  if (bound < 0.0) throw Error(ErrorCode::bad_spec, "bound must be >= 0");
  PseEngine engine(data, nuis, scenario);
  // the constraint is a functional of the candidate predictor, so the chosen
  // estimator is applied to psi_n and to the gradient itself (Y never enters
  // the solve); the mse path is linear in lambda, making the root closed form
  PredRule psi_rule = [&](int s, unsigned cfg, std::size_t i) {
    return engine.psi_at(s, cfg, i);
  };
  PredRule d_rule = [&](int s, unsigned cfg, std::size_t i) {
    return engine.d_at(s, cfg, i);
  };
  double theta0 = engine.theta_of_rule(theta_method, psi_rule);
  double ip = engine.theta_of_rule(theta_method, d_rule);
  if (!(ip > kSigma2Floor)) {
    throw Error(ErrorCode::degenerate_variance,
                "estimated gradient second moment " + std::to_string(ip) + " below floor");
  }
  FairPredictor fp;
  fp.mode = RiskMode::mse_mean_diff;
  fp.scenario = scenario;
  fp.nuisances = nuis;
  fp.theta_method = theta_method;
  fp.theta_n = theta0;
  fp.sigma2_n = ip;
  fp.bound = bound;
  fp.lambda_n = 2.0 * shrink_to_bound(theta0, bound) / ip;
  fp.achieved_constraint = std::abs(theta0) <= bound ? std::abs(theta0) : bound;
  return fp;
}

double xent_path_point(double psi_value, double d_value, double lambda, int s) {
  (void)s;  // the unit-interval root does not depend on the group label
  if (psi_value <= 0.0) return 0.0;
  if (psi_value >= 1.0) return 1.0;
  const double u = lambda * d_value;
  double root;
  if (std::abs(u) < 1e-8) {
    root = psi_value - u * psi_value * (1.0 - psi_value);
  } else {
    const double b = 1.0 + u;
    double disc = b * b - 4.0 * u * psi_value;
    if (disc < 0.0) {
      if (disc < -1e-12 * std::max(1.0, b * b)) {
        throw Error(ErrorCode::negative_discriminant,
                    "path quadratic discriminant negative: " + std::to_string(disc));
      }
      disc = 0.0;
    }
    root = 2.0 * psi_value / (b + std::sqrt(disc));
    // Newton polish of the path condition (r - psi)/(r (1-r)) + u = 0; the
    // rationalized root is within a few ulp already, but large |u| amplifies
    // rounding when the residual is divided by r (1-r)
    for (int it = 0; it < 2; ++it) {
      double v = root * (1.0 - root);
      if (!(v > 0.0)) break;
      double g = (root - psi_value) / v + u;
      double dg = (v - (root - psi_value) * (1.0 - 2.0 * root)) / (v * v);
      if (!(std::abs(dg) > 0.0)) break;
      double next = root - g / dg;
      if (next <= 0.0 || next >= 1.0) break;
      root = next;
    }
  }
  return std::min(1.0, std::max(0.0, root));
}

FairPredictor solve_lambda_xent(const Dataset& data, const NuisanceSet& nuis,
                                const Scenario& scenario, ThetaMethod theta_method,
                                const LambdaSearchConfig& cfg, double bound) {
  if (nuis.psi.family != Family::binomial) {
    throw Error(ErrorCode::bad_spec, "cross-entropy adjustment needs a binomial psi");
  }
  if (bound < 0.0) throw Error(ErrorCode::bad_spec, "bound must be >= 0");

  PseEngine engine(data, nuis, scenario);
  GradientField field = engine.gradient();
  require_sigma2(field.sigma2);
  // constraint of the base predictor under the chosen estimator, with the
  // candidate rule in place of Y
  PredRule base_rule = [&](int s, unsigned cfg, std::size_t i) {
    return engine.psi_at(s, cfg, i);
  };
  double theta0 = engine.theta_of_rule(theta_method, base_rule);

  FairPredictor fp;
  fp.mode = RiskMode::xent_mean_diff;
  fp.scenario = scenario;
  fp.nuisances = nuis;
  fp.theta_method = theta_method;
  fp.theta_n = theta0;
  fp.sigma2_n = field.sigma2;
  fp.bound = bound;

  if (std::abs(theta0) <= bound) {
    fp.lambda_n = 0.0;
    fp.achieved_constraint = std::abs(theta0);
    return fp;
  }
  const double target = bound == 0.0 ? 0.0 : (theta0 > 0 ? bound : -bound);

  auto objective = [&](double lambda) {
    PredRule rule = [&](int s, unsigned cfgm, std::size_t i) {
      return xent_path_point(engine.psi_at(s, cfgm, i), engine.d_at(s, cfgm, i), lambda, s);
    };
    return std::abs(engine.theta_of_rule(theta_method, rule) - target);
  };

  double lo = std::min(cfg.lambda_lo, cfg.lambda_hi);
  double hi = std::max(cfg.lambda_lo, cfg.lambda_hi);
  if (cfg.auto_bracket || !(hi > lo)) {
    double scale = 4.0 * std::abs(theta0) / field.sigma2;
    if (!(scale > 0.0)) scale = 1.0;
    lo = -scale;
    hi = scale;
  }
  GridResult best = searched_lambda(objective, lo, hi, cfg, false);
  fp.lambda_n = best.lambda;
  fp.achieved_constraint = best.objective;
  fp.no_sign_change = best.objective > cfg.tolerance;
  return fp;
}

FairPredictor adjust_log_odds(const Dataset& data, const NuisanceSet& nuis,
                              const Scenario& scenario, const LambdaSearchConfig& cfg) {
  if (nuis.psi.family != Family::binomial) {
    throw Error(ErrorCode::bad_spec, "log-odds adjustment needs a binomial psi");
  }
  if (scenario.part.s_y != 1) {
    throw Error(ErrorCode::unsupported_scenario,
                "log-odds adjustment is defined for s_y = 1 path sets");
  }

  PseEngine engine(data, nuis, scenario);
  GradientField field = engine.gradient();
  require_sigma2(field.sigma2);

  const auto& s_col = data.column("s");
  const std::size_t n = data.n_rows();
  double eps_lo = -std::numeric_limits<double>::infinity();
  double eps_hi = std::numeric_limits<double>::infinity();
  std::size_t lo_row = 0, hi_row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int s = static_cast<int>(s_col[i]);
    double psi = engine.psi_observed(s, i);
    double d = field.d[i];
    double lo_i, hi_i;
    if (s == 1) {  // d > 0: 0 <= psi - lambda d <= 1
      lo_i = -(1.0 - psi) / d;
      hi_i = psi / d;
    } else {  // d < 0
      lo_i = psi / d;
      hi_i = (psi - 1.0) / d;
    }
    if (lo_i > eps_lo) {
      eps_lo = lo_i;
      lo_row = i;
    }
    if (hi_i < eps_hi) {
      eps_hi = hi_i;
      hi_row = i;
    }
  }
  if (eps_lo > eps_hi) {
    throw Error(ErrorCode::empty_feasible_interval,
                "lambda bounds cross: eps_lo " + std::to_string(eps_lo) + " (row " +
                    std::to_string(lo_row + 1) + ") > eps_hi " + std::to_string(eps_hi) +
                    " (row " + std::to_string(hi_row + 1) + ")");
  }

  ConstraintEstimate base = engine.theta(ThetaMethod::plugin);

  auto objective = [&](double lambda) {
    PredRule rule = [&](int s, unsigned cfgm, std::size_t i) {
      return engine.psi_at(s, cfgm, i) - lambda * engine.d_at(s, cfgm, i);
    };
    return std::abs(engine.plugin_logodds_constraint_of(rule));
  };

  double lo = eps_lo, hi = eps_hi;
  if (!cfg.auto_bracket && cfg.lambda_hi > cfg.lambda_lo) {
    lo = std::max(lo, cfg.lambda_lo);
    hi = std::min(hi, cfg.lambda_hi);
  }
  GridResult best = searched_lambda(objective, lo, hi, cfg, true);

  FairPredictor fp;
  fp.mode = RiskMode::xent_log_odds;
  fp.scenario = scenario;
  fp.nuisances = nuis;
  fp.theta_method = ThetaMethod::plugin;
  fp.theta_n = base.value;
  fp.sigma2_n = field.sigma2;
  fp.lambda_n = best.lambda;
  fp.achieved_constraint = best.objective;
  fp.no_sign_change = best.objective > cfg.tolerance;
  fp.epsilon_lo = eps_lo;
  fp.epsilon_hi = eps_hi;
  return fp;
}

double fair_value(const FairPredictor& fp, double psi, double d, int s,
                  std::size_t* clamped) {
  switch (fp.mode) {
    case RiskMode::mse_mean_diff:
      return psi - shrink_to_bound(fp.theta_n, fp.bound) / fp.sigma2_n * d;
    case RiskMode::xent_mean_diff:
      return xent_path_point(psi, d, fp.lambda_n, s);
    case RiskMode::xent_log_odds: {
      double v = psi - fp.lambda_n * d;
      if (v < 0.0 || v > 1.0) {
        if (clamped) ++*clamped;
        v = std::min(1.0, std::max(0.0, v));
      }
      return v;
    }
  }
  return psi;
}

FairPredictions predict_fair(const FairPredictor& fp, const Dataset& data) {
  if (fp.mode == RiskMode::mse_mean_diff) require_sigma2(fp.sigma2_n);
  PseEngine engine(data, fp.nuisances, fp.scenario);
  const auto& s_col = data.column("s");
  const std::size_t n = data.n_rows();
  FairPredictions out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int s = static_cast<int>(s_col[i]);
    out.values[i] =
        fair_value(fp, engine.psi_observed(s, i), engine.d_observed(i), s, &out.clamped);
  }
  return out;
}

namespace {

nlohmann::json glm_to_json(const GlmModel& m) {
  nlohmann::json j;
  j["family"] = m.family == Family::gaussian ? "gaussian" : "binomial";
  j["terms"] = m.spec.terms;
  std::vector<double> coef(m.coef.data(), m.coef.data() + m.coef.size());
  j["coef"] = coef;
  j["l1_penalty"] = m.l1_penalty;
  j["converged"] = m.diag.converged;
  j["iterations"] = m.diag.iterations;
  j["deviance"] = m.diag.deviance;
  return j;
}

GlmModel glm_from_json(const nlohmann::json& j) {
  GlmModel m;
  m.family = j.at("family").get<std::string>() == "gaussian" ? Family::gaussian
                                                             : Family::binomial;
  m.spec.terms = j.at("terms").get<std::vector<std::string>>();
  auto coef = j.at("coef").get<std::vector<double>>();
  m.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  m.l1_penalty = j.value("l1_penalty", 0.0);
  m.diag.converged = j.value("converged", true);
  m.diag.iterations = j.value("iterations", 0);
  m.diag.deviance = j.value("deviance", 0.0);
  return m;
}

nlohmann::json partition_to_json(const CausalPartition& p) {
  return nlohmann::json{{"x_vars", p.x_vars}, {"sensitive", p.sensitive},
                        {"outcome", p.outcome}, {"s_y", p.s_y},
                        {"m_rho", p.m_rho},     {"l_rho", p.l_rho}};
}

CausalPartition partition_from_json(const nlohmann::json& j) {
  CausalPartition p;
  p.x_vars = j.at("x_vars").get<std::vector<std::string>>();
  p.sensitive = j.at("sensitive").get<std::string>();
  p.outcome = j.at("outcome").get<std::string>();
  p.s_y = j.at("s_y").get<int>();
  p.m_rho = j.at("m_rho").get<std::vector<std::string>>();
  p.l_rho = j.at("l_rho").get<std::vector<std::string>>();
  return p;
}

}  // namespace

nlohmann::json fair_predictor_to_json(const FairPredictor& fp) {
  nlohmann::json j;
  j["mode"] = risk_mode_name(fp.mode);
  j["scenario"] = scenario_name(fp.scenario.tag);
  j["partition"] = partition_to_json(fp.scenario.part);
  j["theta_method"] = method_name(fp.theta_method);
  j["theta_n"] = fp.theta_n;
  j["sigma2_n"] = fp.sigma2_n;
  j["lambda_n"] = fp.lambda_n;
  j["bound"] = fp.bound;
  j["achieved_constraint"] = fp.achieved_constraint;
  j["no_sign_change"] = fp.no_sign_change;
  j["epsilon_lo"] = fp.epsilon_lo;
  j["epsilon_hi"] = fp.epsilon_hi;
  j["clip_eps"] = fp.nuisances.clip_eps;
  j["psi"] = glm_to_json(fp.nuisances.psi);
  j["pi"] = glm_to_json(fp.nuisances.pi);
  if (fp.nuisances.f_m) j["f_m"] = glm_to_json(*fp.nuisances.f_m);
  if (fp.nuisances.f_l) j["f_l"] = glm_to_json(*fp.nuisances.f_l);
  return j;
}

FairPredictor fair_predictor_from_json(const nlohmann::json& j) {
  FairPredictor fp;
  fp.mode = risk_mode_from_string(j.at("mode").get<std::string>());
  CausalPartition part = partition_from_json(j.at("partition"));
  std::string tag = j.at("scenario").get<std::string>();
  if (tag == "rho1") {
    fp.scenario = Scenario::rho1();
    fp.scenario.part = part;
  } else if (tag == "rho2") {
    fp.scenario = Scenario::rho2();
    fp.scenario.part = part;
  } else {
    fp.scenario = Scenario::generic(part);
  }
  fp.theta_method = method_from_string(j.at("theta_method").get<std::string>());
  fp.theta_n = j.at("theta_n").get<double>();
  fp.sigma2_n = j.at("sigma2_n").get<double>();
  fp.lambda_n = j.at("lambda_n").get<double>();
  fp.bound = j.at("bound").get<double>();
  fp.achieved_constraint = j.value("achieved_constraint", 0.0);
  fp.no_sign_change = j.value("no_sign_change", false);
  fp.epsilon_lo = j.value("epsilon_lo", 0.0);
  fp.epsilon_hi = j.value("epsilon_hi", 0.0);
  fp.nuisances.clip_eps = j.value("clip_eps", kDefaultClipEps);
  fp.nuisances.psi = glm_from_json(j.at("psi"));
  fp.nuisances.pi = glm_from_json(j.at("pi"));
  if (j.contains("f_m")) fp.nuisances.f_m = glm_from_json(j.at("f_m"));
  if (j.contains("f_l")) fp.nuisances.f_l = glm_from_json(j.at("f_l"));
  return fp;
}

}  // namespace fairpse
