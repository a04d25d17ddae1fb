#include "fairpse/glm.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "fairpse/errors.hpp"
#include "fairpse/rng.hpp"

namespace fairpse {

namespace {

constexpr double kWeightFloor = 1e-10;
constexpr double kLogFloor = 1e-12;
constexpr double kDivergenceNorm = 1e10;

void check_finite(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (!X.allFinite() || !y.allFinite()) {
    throw Error(ErrorCode::non_finite, "non-finite values in design or target");
  }
}

double deviance_binomial(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double p = expit(eta(i));
    p = std::min(1.0 - kLogFloor, std::max(kLogFloor, p));
    dev -= 2.0 * (y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p));
  }
  return dev;
}

double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

// penalized mean-scale objectives used for monotonicity tracking
double penalized_objective_binomial(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                                    const Eigen::VectorXd& beta, const FeatureSpec& spec,
                                    double lambda) {
  double obj = deviance_binomial(y, eta) / (2.0 * static_cast<double>(y.size()));
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (!spec.is_intercept_term(static_cast<std::size_t>(j))) obj += lambda * std::abs(beta(j));
  }
  return obj;
}

double penalized_objective_gaussian(const Eigen::VectorXd& r, const Eigen::VectorXd& beta,
                                    const FeatureSpec& spec, double lambda) {
  double obj = r.squaredNorm() / (2.0 * static_cast<double>(r.size()));
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (!spec.is_intercept_term(static_cast<std::size_t>(j))) obj += lambda * std::abs(beta(j));
  }
  return obj;
}

// one coordinate-descent pass on the weighted least squares problem
// (1/(2n)) sum w (z - X beta)^2 + lambda ||slopes||_1; r holds z - X beta
// and is kept in sync. Returns the max absolute coefficient change.
double cd_sweep(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                Eigen::VectorXd& r, Eigen::VectorXd& beta,
                const Eigen::VectorXd& wxsq, const FeatureSpec& spec,
                double lambda, const std::vector<int>& active) {
  const double n = static_cast<double>(X.rows());
  double max_delta = 0.0;
  for (int j : active) {
    if (wxsq(j) <= 0.0) continue;
    double num = 0.0;
    const double* xj = X.col(j).data();
    for (Eigen::Index i = 0; i < X.rows(); ++i) num += w(i) * xj[i] * r(i);
    num = num / n + wxsq(j) * beta(j);
    double bj_new = spec.is_intercept_term(static_cast<std::size_t>(j))
                        ? num / wxsq(j)
                        : soft_threshold(num, lambda) / wxsq(j);
    double delta = bj_new - beta(j);
    if (delta != 0.0) {
      r -= delta * X.col(j);
      beta(j) = bj_new;
      max_delta = std::max(max_delta, std::abs(delta));
    }
  }
  return max_delta;
}

// active-set coordinate descent to convergence on a fixed weighted problem
void cd_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
              Eigen::VectorXd& r, Eigen::VectorXd& beta, const FeatureSpec& spec,
              double lambda, double tol, int max_sweeps,
              std::vector<double>* objective_path, const Eigen::VectorXd* y_for_obj) {
  const int p = static_cast<int>(X.cols());
  Eigen::VectorXd wxsq(p);
  const double n = static_cast<double>(X.rows());
  for (int j = 0; j < p; ++j) {
    double s = 0.0;
    const double* xj = X.col(j).data();
    for (Eigen::Index i = 0; i < X.rows(); ++i) s += w(i) * xj[i] * xj[i];
    wxsq(j) = s / n;
  }
  std::vector<int> all(p);
  std::iota(all.begin(), all.end(), 0);

  int sweeps = 0;
  while (sweeps < max_sweeps) {
    double delta = cd_sweep(X, w, r, beta, wxsq, spec, lambda, all);
    ++sweeps;
    if (objective_path && y_for_obj) {
      objective_path->push_back(penalized_objective_gaussian(r, beta, spec, lambda));
    }
    if (delta < tol) break;
    // naive updates over the active set until stable, then rescan everything
    std::vector<int> active;
    for (int j = 0; j < p; ++j) {
      if (beta(j) != 0.0 || spec.is_intercept_term(static_cast<std::size_t>(j))) active.push_back(j);
    }
    while (sweeps < max_sweeps) {
      double d = cd_sweep(X, w, r, beta, wxsq, spec, lambda, active);
      ++sweeps;
      if (objective_path && y_for_obj) {
        objective_path->push_back(penalized_objective_gaussian(r, beta, spec, lambda));
      }
      if (d < tol) break;
    }
  }
}

}  // namespace

GlmModel fit_gaussian(const Dataset& data, const std::string& target,
                      const FeatureSpec& spec) {
  Eigen::MatrixXd X = design_matrix(data, spec);
  const auto& yv = data.column(target);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
  check_finite(X, y);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) {
    throw Error(ErrorCode::rank_deficient,
                "design matrix rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(X.cols()) + " columns for target " + target);
  }
  GlmModel m;
  m.family = Family::gaussian;
  m.spec = spec;
  m.coef = qr.solve(y);
  m.diag.iterations = 1;
  m.diag.converged = true;
  m.diag.deviance = (y - X * m.coef).squaredNorm();
  return m;
}

GlmModel fit_binomial(const Dataset& data, const std::string& target,
                      const FeatureSpec& spec, double l1_penalty, int max_iter,
                      double tol) {
  if (l1_penalty < 0.0) throw Error(ErrorCode::bad_spec, "l1_penalty must be >= 0");
  data.require_binary(target);

  Eigen::MatrixXd X = design_matrix(data, spec);
  const auto& yv = data.column(target);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
  check_finite(X, y);

  GlmModel m;
  m.family = Family::binomial;
  m.spec = spec;
  m.l1_penalty = l1_penalty;
  const int p = static_cast<int>(X.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);

  if (l1_penalty == 0.0) {
    // IRLS with step halving; rank-deficient designs are rejected up front
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols()) {
      throw Error(ErrorCode::rank_deficient,
                  "design matrix rank-deficient for target " + target);
    }
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(X.rows());
    double dev = deviance_binomial(y, eta);
    m.diag.objective_path.push_back(dev);
    bool converged = false;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
      Eigen::VectorXd wv(X.rows()), z(X.rows());
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double pi = expit(eta(i));
        double w = std::max(kWeightFloor, pi * (1.0 - pi));
        wv(i) = w;
        z(i) = eta(i) + (y(i) - pi) / w;
      }
      Eigen::MatrixXd XtWX = X.transpose() * wv.asDiagonal() * X;
      Eigen::VectorXd XtWz = X.transpose() * (wv.array() * z.array()).matrix();
      Eigen::VectorXd beta_new = XtWX.ldlt().solve(XtWz);
      if (!beta_new.allFinite()) {
        m.diag.converged = false;
        break;
      }
      Eigen::VectorXd step = beta_new - beta;
      double t = 1.0;
      Eigen::VectorXd eta_try = X * beta_new;
      double dev_try = deviance_binomial(y, eta_try);
      int halvings = 0;
      while (dev_try > dev + 1e-12 && halvings < 30) {
        t *= 0.5;
        eta_try = X * (beta + t * step);
        dev_try = deviance_binomial(y, eta_try);
        ++halvings;
      }
      beta += t * step;
      eta = eta_try;
      dev = dev_try;
      m.diag.objective_path.push_back(dev);
      if (beta.lpNorm<Eigen::Infinity>() > kDivergenceNorm) {
        m.diag.converged = false;  // separation: coefficients diverging
        break;
      }
      if ((t * step).lpNorm<Eigen::Infinity>() < tol) {
        converged = true;
        ++iter;
        break;
      }
    }
    if (iter >= max_iter && !converged) m.diag.converged = false;
    m.diag.iterations = iter;
    m.coef = beta;
    m.diag.deviance = dev;
    return m;
  }

  // coordinate descent on successive weighted quadratic approximations,
  // with step halving on the true penalized objective
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(X.rows());
  double obj = penalized_objective_binomial(y, eta, beta, spec, l1_penalty);
  m.diag.objective_path.push_back(obj);
  bool converged = false;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    Eigen::VectorXd wv(X.rows()), z(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double pi = expit(eta(i));
      pi = std::min(1.0 - 1e-5, std::max(1e-5, pi));
      double w = pi * (1.0 - pi);
      wv(i) = w;
      z(i) = eta(i) + (y(i) - pi) / w;
    }
    Eigen::VectorXd beta_q = beta;
    Eigen::VectorXd r = z - eta;
    cd_solve(X, wv, r, beta_q, spec, l1_penalty, 1e-7, 10 * p + 50, nullptr, nullptr);

    Eigen::VectorXd step = beta_q - beta;
    double t = 1.0;
    Eigen::VectorXd beta_try = beta_q;
    Eigen::VectorXd eta_try = X * beta_try;
    double obj_try = penalized_objective_binomial(y, eta_try, beta_try, spec, l1_penalty);
    int halvings = 0;
    while (obj_try > obj + 1e-12 && halvings < 30) {
      t *= 0.5;
      beta_try = beta + t * step;
      eta_try = X * beta_try;
      obj_try = penalized_objective_binomial(y, eta_try, beta_try, spec, l1_penalty);
      ++halvings;
    }
    double max_change = (beta_try - beta).lpNorm<Eigen::Infinity>();
    beta = beta_try;
    eta = eta_try;
    obj = obj_try;
    m.diag.objective_path.push_back(obj);
    if (!beta.allFinite() || beta.lpNorm<Eigen::Infinity>() > kDivergenceNorm) {
      m.diag.converged = false;
      break;
    }
    if (max_change < tol) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (iter >= max_iter && !converged) m.diag.converged = false;
  m.diag.iterations = iter;
  m.coef = beta;
  m.diag.deviance = deviance_binomial(y, eta);
  return m;
}

GlmModel fit_gaussian_lasso(const Dataset& data, const std::string& target,
                            const FeatureSpec& spec, double l1_penalty,
                            int max_iter, double tol) {
  if (l1_penalty < 0.0) throw Error(ErrorCode::bad_spec, "l1_penalty must be >= 0");
  if (l1_penalty == 0.0) return fit_gaussian(data, target, spec);

  Eigen::MatrixXd X = design_matrix(data, spec);
  const auto& yv = data.column(target);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
  check_finite(X, y);

  GlmModel m;
  m.family = Family::gaussian;
  m.spec = spec;
  m.l1_penalty = l1_penalty;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  Eigen::VectorXd w = Eigen::VectorXd::Ones(X.rows());
  Eigen::VectorXd r = y;
  cd_solve(X, w, r, beta, spec, l1_penalty, tol, max_iter, &m.diag.objective_path, &y);
  m.coef = beta;
  m.diag.iterations = static_cast<int>(m.diag.objective_path.size());
  m.diag.converged = true;
  m.diag.deviance = r.squaredNorm();
  return m;
}

double select_penalty_cv(const Dataset& data, const std::string& target,
                         const FeatureSpec& spec, int folds,
                         const std::vector<double>& grid, std::uint64_t seed,
                         Family family) {
  if (folds < 2) throw Error(ErrorCode::bad_spec, "folds must be >= 2");
  if (grid.empty()) throw Error(ErrorCode::bad_spec, "penalty grid is empty");

  const std::size_t n = data.n_rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng(seed, 0xCFu);
  rng.shuffle(perm);
  std::vector<int> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));

  auto subset = [&](int fold, bool held_out) {
    Dataset out;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if ((fold_of[i] == fold) == held_out) rows.push_back(i);
    }
    for (const auto& name : data.column_names()) {
      const auto& src = data.column(name);
      std::vector<double> col(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) col[k] = src[rows[k]];
      out.add_column(name, std::move(col));
    }
    return out;
  };

  double best_lambda = grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double score_sum = 0.0;
    int valid = 0;
    for (int f = 0; f < folds; ++f) {
      try {
        Dataset train = subset(f, false);
        Dataset test = subset(f, true);
        GlmModel model = family == Family::binomial
                             ? fit_binomial(train, target, spec, lambda)
                             : fit_gaussian_lasso(train, target, spec, lambda);
        auto pred = predict(model, test, {}, kDefaultClipEps);
        const auto& yt = test.column(target);
        double dev = 0.0;
        if (family == Family::binomial) {
          dev = binomial_deviance(yt, pred);
        } else {
          for (std::size_t i = 0; i < yt.size(); ++i) {
            dev += (yt[i] - pred[i]) * (yt[i] - pred[i]);
          }
        }
        score_sum += dev / static_cast<double>(yt.size());
        ++valid;
      } catch (const Error& e) {
        std::cerr << "warning: cv fold " << f << " at lambda " << lambda
                  << " failed: " << e.what() << "\n";
      }
    }
    if (valid == 0) continue;
    double score = score_sum / valid;
    if (score < best_score - 1e-14 ||
        (std::abs(score - best_score) <= 1e-14 && lambda > best_lambda)) {
      best_score = score;
      best_lambda = lambda;
    }
  }
  if (!std::isfinite(best_score)) {
    throw Error(ErrorCode::not_converged, "all cv cells failed");
  }
  return best_lambda;
}

std::vector<double> predict(const GlmModel& model, const Dataset& data,
                            const Overrides& overrides, double clip_eps) {
  model.spec.validate_against(data);
  for (const auto& [name, value] : overrides) {
    (void)value;
    if (!data.has_column(name)) {
      throw Error(ErrorCode::unknown_column, "override column not in data: " + name);
    }
  }
  CompiledLinear lp(model.spec, model.coef, data, overrides);
  std::vector<double> out(data.n_rows());
  if (model.family == Family::gaussian) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lp(i);
  } else {
    const double lo = clip_eps, hi = 1.0 - clip_eps;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = std::min(hi, std::max(lo, expit(lp(i))));
    }
  }
  return out;
}

double binomial_deviance(const std::vector<double>& y, const std::vector<double>& p) {
  double dev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double pi = std::min(1.0 - kLogFloor, std::max(kLogFloor, p[i]));
    dev -= 2.0 * (y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi));
  }
  return dev;
}

}  // namespace fairpse
