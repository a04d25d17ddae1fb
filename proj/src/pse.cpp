#include "fairpse/pse.hpp"

#include <algorithm>
#include <cmath>

#include "fairpse/errors.hpp"

namespace fairpse {

const char* method_name(ThetaMethod m) {
  switch (m) {
    case ThetaMethod::plugin: return "plugin";
    case ThetaMethod::ipw: return "ipw";
    case ThetaMethod::ipw_alt: return "ipw-alt";
    case ThetaMethod::aipw: return "aipw";
  }
  return "?";
}

ThetaMethod method_from_string(const std::string& s) {
  if (s == "plugin") return ThetaMethod::plugin;
  if (s == "ipw") return ThetaMethod::ipw;
  if (s == "ipw-alt" || s == "ipw_alt") return ThetaMethod::ipw_alt;
  if (s == "aipw") return ThetaMethod::aipw;
  throw Error(ErrorCode::parse, "unknown theta method: " + s);
}

const char* scenario_name(Scenario::Tag t) {
  switch (t) {
    case Scenario::Tag::rho1: return "rho1";
    case Scenario::Tag::rho2: return "rho2";
    case Scenario::Tag::generic: return "generic";
  }
  return "?";
}

Scenario Scenario::rho1() {
  Scenario sc;
  sc.tag = Tag::rho1;
  sc.part = CausalPartition{{}, "s", "y", 1, {"m"}, {"l", "y"}};
  return sc;
}

Scenario Scenario::rho2() {
  Scenario sc;
  sc.tag = Tag::rho2;
  sc.part = CausalPartition{{}, "s", "y", 1, {"l"}, {"m", "y"}};
  return sc;
}

Scenario Scenario::generic(CausalPartition p) {
  Scenario sc;
  sc.tag = Tag::generic;
  sc.part = std::move(p);
  return sc;
}

Scenario Scenario::from_partition(const CausalPartition& p) {
  if (p.s_y == 1 && p.m_rho == std::vector<std::string>{"m"} &&
      p.l_rho == std::vector<std::string>{"l", p.outcome}) {
    Scenario sc = rho1();
    sc.part = p;
    return sc;
  }
  if (p.s_y == 1 && p.m_rho == std::vector<std::string>{"l"} &&
      p.l_rho == std::vector<std::string>{"m", p.outcome}) {
    Scenario sc = rho2();
    sc.part = p;
    return sc;
  }
  return generic(p);
}

double standard_error(const ConstraintEstimate& est) {
  const std::size_t n = est.contributions.size();
  if (n < 2) return 0.0;
  double ss = 0.0;
  for (double c : est.contributions) {
    double d = c - est.value;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
}

PseEngine::PseEngine(const Dataset& data, const NuisanceSet& nuis, const Scenario& scenario)
    : n_(data.n_rows()), scenario_(scenario), clip_eps_(nuis.clip_eps) {
  s_y_ = scenario.part.s_y;
  s_col_ = &data.column("s");
  y_col_ = data.has_column("y") ? &data.column("y") : nullptr;

  // enumerated mediator columns in fixed order (m = bit 0, l = bit 1)
  auto on_path = [&](const std::string& name) {
    const auto& m = scenario.part.m_rho;
    const auto& l = scenario.part.l_rho;
    bool in_m = std::find(m.begin(), m.end(), name) != m.end();
    bool in_l = std::find(l.begin(), l.end(), name) != l.end();
    return std::pair<bool, bool>{in_m || in_l, in_m};
  };
  for (const std::string& name : {std::string("m"), std::string("l")}) {
    auto [present, in_m] = on_path(name);
    if (!present) continue;
    if (!data.has_column(name)) {
      throw Error(ErrorCode::unsupported_scenario,
                  "partition mediator '" + name + "' has no dataset column");
    }
    data.require_binary(name);
    if (name == "m") m_var_idx_ = static_cast<int>(vars_.size());
    is_m_col_.push_back(name == "m" ? 1 : 0);
    vars_.push_back(name);
    in_m_rho_.push_back(in_m ? 1 : 0);
    var_cols_.push_back(&data.column(name));
  }
  // anything else in the partition cannot be estimated with this layout
  for (const auto& group : {scenario.part.m_rho, scenario.part.l_rho}) {
    for (const auto& name : group) {
      if (name == scenario.part.outcome) continue;
      if (name != "m" && name != "l") {
        throw Error(ErrorCode::unsupported_scenario,
                    "partition variable '" + name +
                        "' does not map onto the binary m/l columns");
      }
    }
  }
  if (scenario.tag != Scenario::Tag::generic &&
      (vars_.size() != 2 || !data.has_column("l"))) {
    throw Error(ErrorCode::unsupported_scenario,
                "rho1/rho2 require the (x, s, m, l, y) layout");
  }

  data.require_binary("s");

  pi1_ = predict(nuis.pi, data, {}, clip_eps_);

  bool has_m = std::find(vars_.begin(), vars_.end(), "m") != vars_.end();
  bool has_l = std::find(vars_.begin(), vars_.end(), "l") != vars_.end();
  if (has_m) {
    if (!nuis.f_m) throw Error(ErrorCode::bad_spec, "scenario needs f_m but it was not fitted");
    for (int s = 0; s < 2; ++s) {
      fm1_[s] = predict(*nuis.f_m, data, {{"s", double(s)}}, clip_eps_);
    }
  }
  if (has_l) {
    if (!nuis.f_l) throw Error(ErrorCode::bad_spec, "scenario needs f_l but it was not fitted");
    for (int s = 0; s < 2; ++s) {
      if (data.has_column("m")) {
        for (int m = 0; m < 2; ++m) {
          fl1_[s][m] = predict(*nuis.f_l, data, {{"s", double(s)}, {"m", double(m)}}, clip_eps_);
        }
      } else {
        fl1_[s][0] = predict(*nuis.f_l, data, {{"s", double(s)}}, clip_eps_);
        fl1_[s][1] = fl1_[s][0];
      }
    }
  }

  psi_.resize(2u << vars_.size());
  for (int s = 0; s < 2; ++s) {
    for (unsigned cfg = 0; cfg < n_configs(); ++cfg) {
      Overrides ov{{"s", double(s)}};
      for (std::size_t v = 0; v < vars_.size(); ++v) {
        ov.emplace_back(vars_[v], double((cfg >> v) & 1u));
      }
      psi_[idx(s, cfg)] = predict(nuis.psi, data, ov, clip_eps_);
    }
    psi_obs_[s] = predict(nuis.psi, data, {{"s", double(s)}}, clip_eps_);
  }
}

double PseEngine::fvar(std::size_t v, int value, int s_assign, unsigned cfg, std::size_t i) const {
  double p1;
  if (is_m_col_[v]) {
    p1 = fm1_[s_assign][i];
  } else {
    // l's conditional reads m from the configuration when m is enumerated
    int m_val = m_var_idx_ >= 0 ? static_cast<int>((cfg >> m_var_idx_) & 1u) : 0;
    p1 = fl1_[s_assign][m_val][i];
  }
  return value ? p1 : 1.0 - p1;
}

double PseEngine::fvar_observed(std::size_t v, int s_assign, std::size_t i) const {
  int value = static_cast<int>((*var_cols_[v])[i]);
  double p1;
  if (is_m_col_[v]) {
    p1 = fm1_[s_assign][i];
  } else {
    int m_val = m_var_idx_ >= 0 ? static_cast<int>((*var_cols_[m_var_idx_])[i]) : 0;
    p1 = fl1_[s_assign][m_val][i];
  }
  return value ? p1 : 1.0 - p1;
}

unsigned PseEngine::observed_cfg(std::size_t i) const {
  unsigned cfg = 0;
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    if ((*var_cols_[v])[i] != 0.0) cfg |= (1u << v);
  }
  return cfg;
}

void PseEngine::require_rho12(const char* what) const {
  if (scenario_.tag == Scenario::Tag::generic) {
    throw Error(ErrorCode::unsupported_scenario,
                std::string(what) + " is implemented for the rho1/rho2 scenarios only");
  }
}

double PseEngine::d_at(int s, unsigned cfg, std::size_t i) const {
  double pi_s = s ? pi1_[i] : 1.0 - pi1_[i];
  if (s_y_ == 1) {
    double ratio = 1.0;
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      if (!in_m_rho_[v]) continue;
      int value = static_cast<int>((cfg >> v) & 1u);
      ratio *= fvar(v, value, 0, cfg, i) / fvar(v, value, s, cfg, i);
    }
    return (2.0 * s - 1.0) / pi_s * ratio;
  }
  if (s == 1) return 0.0;
  double ratio = 1.0;
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    if (!in_m_rho_[v]) continue;
    int value = static_cast<int>((cfg >> v) & 1u);
    ratio *= fvar(v, value, 1, cfg, i) / fvar(v, value, 0, cfg, i);
  }
  return (ratio - 1.0) / pi_s;
}

double PseEngine::d_observed(std::size_t i) const {
  int s = static_cast<int>((*s_col_)[i]);
  double pi_s = s ? pi1_[i] : 1.0 - pi1_[i];
  if (s_y_ == 1) {
    double ratio = 1.0;
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      if (!in_m_rho_[v]) continue;
      ratio *= fvar_observed(v, 0, i) / fvar_observed(v, s, i);
    }
    return (2.0 * s - 1.0) / pi_s * ratio;
  }
  if (s == 1) return 0.0;
  double ratio = 1.0;
  for (std::size_t v = 0; v < vars_.size(); ++v) {
    if (!in_m_rho_[v]) continue;
    ratio *= fvar_observed(v, 1, i) / fvar_observed(v, 0, i);
  }
  return (ratio - 1.0) / pi_s;
}

double PseEngine::plugin_constraint_of(const PredRule& g) const {
  double total = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double c = 0.0;
    for (unsigned cfg = 0; cfg < n_configs(); ++cfg) {
      double wm0 = 1.0, wm1 = 1.0, wl1 = 1.0, wl0 = 1.0;
      for (std::size_t v = 0; v < vars_.size(); ++v) {
        int value = static_cast<int>((cfg >> v) & 1u);
        if (in_m_rho_[v]) {
          wm0 *= fvar(v, value, 0, cfg, i);
          if (s_y_ == 0) wm1 *= fvar(v, value, 1, cfg, i);
        } else {
          wl0 *= fvar(v, value, 0, cfg, i);
          if (s_y_ == 1) wl1 *= fvar(v, value, 1, cfg, i);
        }
      }
      if (s_y_ == 1) {
        c += (g(1, cfg, i) * wl1 - g(0, cfg, i) * wl0) * wm0;
      } else {
        c += (wm1 - wm0) * g(0, cfg, i) * wl0;
      }
    }
    total += c;
  }
  return total / static_cast<double>(n_);
}

double PseEngine::plugin_logodds_constraint_of(const PredRule& g) const {
  const double lo = clip_eps_, hi = 1.0 - clip_eps_;
  auto logit_g = [&](int s, unsigned cfg, std::size_t i) {
    double v = std::min(hi, std::max(lo, g(s, cfg, i)));
    return std::log(v / (1.0 - v));
  };
  return plugin_constraint_of(logit_g);
}

ConstraintEstimate PseEngine::theta_plugin_impl() const {
  ConstraintEstimate est;
  est.method = ThetaMethod::plugin;
  est.contributions.resize(n_);
  double total = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double c = 0.0;
    for (unsigned cfg = 0; cfg < n_configs(); ++cfg) {
      double wm0 = 1.0, wm1 = 1.0, wl1 = 1.0, wl0 = 1.0;
      for (std::size_t v = 0; v < vars_.size(); ++v) {
        int value = static_cast<int>((cfg >> v) & 1u);
        if (in_m_rho_[v]) {
          wm0 *= fvar(v, value, 0, cfg, i);
          if (s_y_ == 0) wm1 *= fvar(v, value, 1, cfg, i);
        } else {
          wl0 *= fvar(v, value, 0, cfg, i);
          if (s_y_ == 1) wl1 *= fvar(v, value, 1, cfg, i);
        }
      }
      if (s_y_ == 1) {
        c += psi_[idx(1, cfg)][i] * wl1 * wm0 - psi_[idx(0, cfg)][i] * wl0 * wm0;
      } else {
        c += (wm1 - wm0) * psi_[idx(0, cfg)][i] * wl0;
      }
    }
    est.contributions[i] = c;
    total += c;
  }
  est.value = total / static_cast<double>(n_);
  return est;
}

ConstraintEstimate PseEngine::theta_ipw_impl() const {
  require_rho12("theta_ipw");
  if (!y_col_) throw Error(ErrorCode::bad_spec, "ipw estimator needs the y column");
  ConstraintEstimate est;
  est.method = ThetaMethod::ipw;
  est.contributions.resize(n_);
  double total = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double c = d_observed(i) * (*y_col_)[i];
    est.contributions[i] = c;
    total += c;
  }
  est.value = total / static_cast<double>(n_);
  return est;
}

ConstraintEstimate PseEngine::theta_ipw_alt_impl() const {
  require_rho12("theta_ipw_alt");
  ConstraintEstimate est;
  est.method = ThetaMethod::ipw_alt;
  est.contributions.resize(n_);
  double total = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double c = 0.0;
    if ((*s_col_)[i] == 0.0) {
      double pi0 = 1.0 - pi1_[i];
      double ratio = 1.0;
      for (std::size_t v = 0; v < vars_.size(); ++v) {
        if (in_m_rho_[v]) continue;  // the L_rho \ Y density ratio
        ratio *= fvar_observed(v, 1, i) / fvar_observed(v, 0, i);
      }
      c = (ratio * psi_obs_[1][i] - psi_obs_[0][i]) / pi0;
    }
    est.contributions[i] = c;
    total += c;
  }
  est.value = total / static_cast<double>(n_);
  return est;
}

ConstraintEstimate PseEngine::theta_aipw_impl() const {
  require_rho12("theta_aipw");
  if (!y_col_) throw Error(ErrorCode::bad_spec, "aipw estimator needs the y column");
  ConstraintEstimate est;
  est.method = ThetaMethod::aipw;
  est.contributions.resize(n_);
  const bool rho1 = scenario_.tag == Scenario::Tag::rho1;
  // var indices: m is bit 0, l is bit 1 by construction
  auto cfg_of = [&](int m, int l) { return static_cast<unsigned>(m) | (static_cast<unsigned>(l) << 1); };

  double total = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    int s = static_cast<int>((*s_col_)[i]);
    int m_obs = static_cast<int>((*var_cols_[0])[i]);
    double y = (*y_col_)[i];
    double pi1 = pi1_[i], pi0 = 1.0 - pi1;
    double c;
    if (rho1) {
      // psi_bar_{L,1}(m, x) = sum_l psi(1, l, m, x) f_L(l | 1, m, x)
      auto psi_bar_l1 = [&](int m) {
        double pl1 = fl1_[1][m][i];
        return psi_[idx(1, cfg_of(m, 1))][i] * pl1 + psi_[idx(1, cfg_of(m, 0))][i] * (1.0 - pl1);
      };
      double fm0_obs = m_obs ? fm1_[0][i] : 1.0 - fm1_[0][i];
      double fm1_obs = m_obs ? fm1_[1][i] : 1.0 - fm1_[1][i];
      double theta1 = 0.0, theta0 = 0.0;
      for (int m = 0; m < 2; ++m) {
        double fm0 = m ? fm1_[0][i] : 1.0 - fm1_[0][i];
        double pl0 = fl1_[0][m][i];
        theta1 += psi_bar_l1(m) * fm0;
        theta0 += (psi_[idx(0, cfg_of(m, 1))][i] * pl0 +
                   psi_[idx(0, cfg_of(m, 0))][i] * (1.0 - pl0)) *
                  fm0;
      }
      double a = 0.0;
      if (s == 1) a += (fm0_obs / fm1_obs) * (y - psi_bar_l1(m_obs)) / pi1;
      if (s == 0) a += (psi_bar_l1(m_obs) - theta1) / pi0;
      a += theta1;
      double b = theta0;
      if (s == 0) b += (y - theta0) / pi0;
      c = a - b;
    } else {
      int l_obs = static_cast<int>((*var_cols_[1])[i]);
      // psi_bar_{L,0}(m, x) = sum_l psi(1, l, m, x) f_L(l | 0, m, x)
      auto psi_bar_l0 = [&](int m) {
        double pl0 = fl1_[0][m][i];
        return psi_[idx(1, cfg_of(m, 1))][i] * pl0 + psi_[idx(1, cfg_of(m, 0))][i] * (1.0 - pl0);
      };
      double theta1t = 0.0, theta0 = 0.0;
      for (int m = 0; m < 2; ++m) {
        double fm1v = m ? fm1_[1][i] : 1.0 - fm1_[1][i];
        double fm0v = m ? fm1_[0][i] : 1.0 - fm1_[0][i];
        double pl0 = fl1_[0][m][i];
        theta1t += psi_bar_l0(m) * fm1v;
        theta0 += (psi_[idx(0, cfg_of(m, 1))][i] * pl0 +
                   psi_[idx(0, cfg_of(m, 0))][i] * (1.0 - pl0)) *
                  fm0v;
      }
      double fl0_obs = l_obs ? fl1_[0][m_obs][i] : 1.0 - fl1_[0][m_obs][i];
      double fl1_obs = l_obs ? fl1_[1][m_obs][i] : 1.0 - fl1_[1][m_obs][i];
      double fm1_obs = m_obs ? fm1_[1][i] : 1.0 - fm1_[1][i];
      double fm0_obs = m_obs ? fm1_[0][i] : 1.0 - fm1_[0][i];
      double a = 0.0;
      if (s == 1) {
        a += (fl0_obs / fl1_obs) * (y - psi_obs_[1][i]) / pi1;
        a += (psi_bar_l0(m_obs) - theta1t) / pi1;
      }
      if (s == 0) a += (fm1_obs / fm0_obs) * (psi_obs_[1][i] - psi_bar_l0(m_obs)) / pi0;
      a += theta1t;
      double b = theta0;
      if (s == 0) b += (y - theta0) / pi0;
      c = a - b;
    }
    est.contributions[i] = c;
    total += c;
  }
  est.value = total / static_cast<double>(n_);
  return est;
}

ConstraintEstimate PseEngine::theta(ThetaMethod method) const {
  switch (method) {
    case ThetaMethod::plugin: return theta_plugin_impl();
    case ThetaMethod::ipw: return theta_ipw_impl();
    case ThetaMethod::ipw_alt: return theta_ipw_alt_impl();
    case ThetaMethod::aipw: return theta_aipw_impl();
  }
  throw Error(ErrorCode::bad_spec, "unknown theta method");
}

double PseEngine::theta_of_rule(ThetaMethod method, const PredRule& g) const {
  if (method == ThetaMethod::plugin) return plugin_constraint_of(g);
  require_rho12("theta_of_rule");
  const bool rho1 = scenario_.tag == Scenario::Tag::rho1;
  auto cfg_of = [&](int m, int l) { return static_cast<unsigned>(m) | (static_cast<unsigned>(l) << 1); };

  double total = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    int s = static_cast<int>((*s_col_)[i]);
    unsigned obs = observed_cfg(i);
    int m_obs = static_cast<int>(obs & 1u);
    double c = 0.0;
    if (method == ThetaMethod::ipw) {
      c = d_observed(i) * g(s, obs, i);
    } else if (method == ThetaMethod::ipw_alt) {
      if (s == 0) {
        double pi0 = 1.0 - pi1_[i];
        double ratio = 1.0;
        for (std::size_t v = 0; v < vars_.size(); ++v) {
          if (in_m_rho_[v]) continue;
          ratio *= fvar_observed(v, 1, i) / fvar_observed(v, 0, i);
        }
        c = (ratio * g(1, obs, i) - g(0, obs, i)) / pi0;
      }
    } else {  // aipw with Y replaced by the rule at the observed row
      double y = g(s, obs, i);
      double pi1 = pi1_[i], pi0 = 1.0 - pi1;
      if (rho1) {
        auto g_bar_l1 = [&](int m) {
          double pl1 = fl1_[1][m][i];
          return g(1, cfg_of(m, 1), i) * pl1 + g(1, cfg_of(m, 0), i) * (1.0 - pl1);
        };
        double fm0_obs = m_obs ? fm1_[0][i] : 1.0 - fm1_[0][i];
        double fm1v_obs = m_obs ? fm1_[1][i] : 1.0 - fm1_[1][i];
        double theta1 = 0.0, theta0 = 0.0;
        for (int m = 0; m < 2; ++m) {
          double fm0 = m ? fm1_[0][i] : 1.0 - fm1_[0][i];
          double pl0 = fl1_[0][m][i];
          theta1 += g_bar_l1(m) * fm0;
          theta0 += (g(0, cfg_of(m, 1), i) * pl0 + g(0, cfg_of(m, 0), i) * (1.0 - pl0)) * fm0;
        }
        double a = 0.0;
        if (s == 1) a += (fm0_obs / fm1v_obs) * (y - g_bar_l1(m_obs)) / pi1;
        if (s == 0) a += (g_bar_l1(m_obs) - theta1) / pi0;
        a += theta1;
        double b = theta0;
        if (s == 0) b += (y - theta0) / pi0;
        c = a - b;
      } else {
        int l_obs = static_cast<int>((obs >> 1) & 1u);
        auto g_bar_l0 = [&](int m) {
          double pl0 = fl1_[0][m][i];
          return g(1, cfg_of(m, 1), i) * pl0 + g(1, cfg_of(m, 0), i) * (1.0 - pl0);
        };
        double theta1t = 0.0, theta0 = 0.0;
        for (int m = 0; m < 2; ++m) {
          double fm1v = m ? fm1_[1][i] : 1.0 - fm1_[1][i];
          double fm0v = m ? fm1_[0][i] : 1.0 - fm1_[0][i];
          double pl0 = fl1_[0][m][i];
          theta1t += g_bar_l0(m) * fm1v;
          theta0 += (g(0, cfg_of(m, 1), i) * pl0 + g(0, cfg_of(m, 0), i) * (1.0 - pl0)) * fm0v;
        }
        double fl0_obs = l_obs ? fl1_[0][m_obs][i] : 1.0 - fl1_[0][m_obs][i];
        double fl1v_obs = l_obs ? fl1_[1][m_obs][i] : 1.0 - fl1_[1][m_obs][i];
        double fm1_obs = m_obs ? fm1_[1][i] : 1.0 - fm1_[1][i];
        double fm0_obs = m_obs ? fm1_[0][i] : 1.0 - fm1_[0][i];
        double a = 0.0;
        if (s == 1) {
          a += (fl0_obs / fl1v_obs) * (y - g(1, obs, i)) / pi1;
          a += (g_bar_l0(m_obs) - theta1t) / pi1;
        }
        if (s == 0) a += (fm1_obs / fm0_obs) * (g(1, obs, i) - g_bar_l0(m_obs)) / pi0;
        a += theta1t;
        double b = theta0;
        if (s == 0) b += (y - theta0) / pi0;
        c = a - b;
      }
    }
    total += c;
  }
  return total / static_cast<double>(n_);
}

GradientField PseEngine::gradient() const {
  GradientField f;
  f.scenario = scenario_.tag;
  f.d.resize(n_);
  double ss = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double d = d_observed(i);
    f.d[i] = d;
    ss += d * d;
  }
  f.sigma2 = ss / static_cast<double>(n_);
  return f;
}

ConstraintEstimate theta_plugin(const Dataset& data, const NuisanceSet& nuis,
                                const Scenario& scenario) {
  return PseEngine(data, nuis, scenario).theta(ThetaMethod::plugin);
}

ConstraintEstimate theta_ipw(const Dataset& data, const NuisanceSet& nuis,
                             const Scenario& scenario) {
  return PseEngine(data, nuis, scenario).theta(ThetaMethod::ipw);
}

ConstraintEstimate theta_ipw_alt(const Dataset& data, const NuisanceSet& nuis,
                                 const Scenario& scenario) {
  return PseEngine(data, nuis, scenario).theta(ThetaMethod::ipw_alt);
}

ConstraintEstimate theta_aipw(const Dataset& data, const NuisanceSet& nuis,
                              const Scenario& scenario) {
  return PseEngine(data, nuis, scenario).theta(ThetaMethod::aipw);
}

ConstraintEstimate estimate_theta(const Dataset& data, const NuisanceSet& nuis,
                                  const Scenario& scenario, ThetaMethod method) {
  return PseEngine(data, nuis, scenario).theta(method);
}

GradientField gradient_field(const Dataset& data, const NuisanceSet& nuis,
                             const Scenario& scenario) {
  return PseEngine(data, nuis, scenario).gradient();
}

double gradient_mean_check(const GradientField& field, const Dataset& data) {
  (void)data;
  double total = 0.0;
  for (double d : field.d) total += d;
  return field.d.empty() ? 0.0 : total / static_cast<double>(field.d.size());
}

}  // namespace fairpse
