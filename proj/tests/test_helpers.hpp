#pragma once

#include <cmath>
#include <vector>

#include "fairpse/dataset.hpp"
#include "fairpse/glm.hpp"
#include "fairpse/nuisance.hpp"
#include "fairpse/rng.hpp"

namespace testkit {

using namespace fairpse;

inline GlmModel make_glm(Family family, std::vector<std::string> terms,
                         std::vector<double> coef) {
  GlmModel m;
  m.family = family;
  m.spec = FeatureSpec::from_terms(std::move(terms));
  m.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  return m;
}

// ---- discrete toy: binary x, rational tables, denominator 256 ------------
// pi(1|x) = (2+x)/4, fM(1|s,x) = (1+s+x)/4, fL(1|s,m) = (1+2s+2m)/8,
// psi(s,m,l,x) = 0.3 + 1.1 s + 0.6 m - 0.4 l + 0.25 x

inline double toy_pi(int x) { return (2.0 + x) / 4.0; }
inline double toy_fm(int s, int x) { return (1.0 + s + x) / 4.0; }
inline double toy_fl(int s, int m) { return (1.0 + 2.0 * s + 2.0 * m) / 8.0; }
inline double toy_psi(int s, int m, int l, int x) {
  return 0.3 + 1.1 * s + 0.6 * m - 0.4 * l + 0.25 * x;
}

// logistic coefficients reproducing the rational tables exactly
inline NuisanceSet toy_nuisances() {
  NuisanceSet nuis;
  nuis.psi = make_glm(Family::gaussian, {"1", "s", "m", "l", "x"},
                      {0.3, 1.1, 0.6, -0.4, 0.25});
  nuis.pi = make_glm(Family::binomial, {"1", "x"}, {0.0, std::log(3.0)});
  nuis.f_m = make_glm(Family::binomial, {"1", "s", "x"},
                      {-std::log(3.0), std::log(3.0), std::log(3.0)});
  double b0 = logit(1.0 / 8.0);
  double bs = logit(3.0 / 8.0) - b0;
  double bm = logit(3.0 / 8.0) - b0;
  double bsm = logit(5.0 / 8.0) - (b0 + bs + bm);
  nuis.f_l = make_glm(Family::binomial, {"1", "s", "m", "s:m"}, {b0, bs, bm, bsm});
  return nuis;
}

// 256 rows enumerating (x,s,m,l) with multiplicities equal to 256 * P(row),
// y set exactly to psi so the empirical joint equals the model joint
inline Dataset toy_exact_dataset() {
  std::vector<double> xs, ss, ms, ls, ys;
  for (int x = 0; x < 2; ++x) {
    for (int s = 0; s < 2; ++s) {
      for (int m = 0; m < 2; ++m) {
        for (int l = 0; l < 2; ++l) {
          double p = 0.5 * (s ? toy_pi(x) : 1 - toy_pi(x)) *
                     (m ? toy_fm(s, x) : 1 - toy_fm(s, x)) *
                     (l ? toy_fl(s, m) : 1 - toy_fl(s, m));
          int count = static_cast<int>(std::lround(p * 256.0));
          for (int k = 0; k < count; ++k) {
            xs.push_back(x);
            ss.push_back(s);
            ms.push_back(m);
            ls.push_back(l);
            ys.push_back(toy_psi(s, m, l, x));
          }
        }
      }
    }
  }
  Dataset d;
  d.add_column("x", std::move(xs));
  d.add_column("s", std::move(ss));
  d.add_column("m", std::move(ms));
  d.add_column("l", std::move(ls));
  d.add_column("y", std::move(ys));
  return d;
}

// sampled version with gaussian noise on y
inline Dataset toy_sampled_dataset(std::size_t n, std::uint64_t seed, double noise_sd = 0.5) {
  CounterRng rng(seed, 0x70Du);
  std::vector<double> xs(n), ss(n), ms(n), ls(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    int x = static_cast<int>(rng.bernoulli(0.5));
    int s = static_cast<int>(rng.bernoulli(toy_pi(x)));
    int m = static_cast<int>(rng.bernoulli(toy_fm(s, x)));
    int l = static_cast<int>(rng.bernoulli(toy_fl(s, m)));
    xs[i] = x;
    ss[i] = s;
    ms[i] = m;
    ls[i] = l;
    ys[i] = rng.normal(toy_psi(s, m, l, x), noise_sd);
  }
  Dataset d;
  d.add_column("x", std::move(xs));
  d.add_column("s", std::move(ss));
  d.add_column("m", std::move(ms));
  d.add_column("l", std::move(ls));
  d.add_column("y", std::move(ys));
  return d;
}

// brute-force edge-g-formula for the toy, independent of the library path
inline double toy_theta_rho1_enumerated() {
  double total = 0.0;
  for (int x = 0; x < 2; ++x) {
    double acc = 0.0;
    for (int m = 0; m < 2; ++m) {
      double fm0 = m ? toy_fm(0, x) : 1 - toy_fm(0, x);
      for (int l = 0; l < 2; ++l) {
        double fl1 = l ? toy_fl(1, m) : 1 - toy_fl(1, m);
        double fl0 = l ? toy_fl(0, m) : 1 - toy_fl(0, m);
        acc += (toy_psi(1, m, l, x) * fl1 - toy_psi(0, m, l, x) * fl0) * fm0;
      }
    }
    total += 0.5 * acc;
  }
  return total;
}

inline double toy_theta_rho2_enumerated() {
  double total = 0.0;
  for (int x = 0; x < 2; ++x) {
    double acc = 0.0;
    for (int m = 0; m < 2; ++m) {
      double fm1 = m ? toy_fm(1, x) : 1 - toy_fm(1, x);
      double fm0 = m ? toy_fm(0, x) : 1 - toy_fm(0, x);
      for (int l = 0; l < 2; ++l) {
        double fl0 = l ? toy_fl(0, m) : 1 - toy_fl(0, m);
        acc += (toy_psi(1, m, l, x) * fm1 - toy_psi(0, m, l, x) * fm0) * fl0;
      }
    }
    total += 0.5 * acc;
  }
  return total;
}

// ---- oracle nuisances for the misspecification design --------------------

inline NuisanceSet oracle_61_nuisances() {
  NuisanceSet nuis;
  nuis.psi = make_glm(Family::gaussian, {"1", "s", "m", "l", "x1", "x2", "x1:x2"},
                      {-0.5, 1.0, 0.5, -0.5, -1.0, 0.0, 2.0});
  nuis.pi = make_glm(Family::binomial, {"1", "x1", "x2", "x1:x2"}, {0.0, -1.0, 0.0, 2.0});
  nuis.f_m = make_glm(Family::binomial, {"1", "s", "x1", "x2", "x1:x2"},
                      {-0.5, 0.5, -1.0, 0.0, 2.0});
  nuis.f_l = make_glm(Family::binomial, {"1", "s", "m", "x1", "x2", "x1:x2"},
                      {-1.0, 0.5, -0.5, -1.0, 0.0, 2.0});
  return nuis;
}

// binary-outcome variant of the toy for the cross-entropy machinery
inline double toy_bin_psi_logit(int s, int m, int l, int x) {
  return -0.5 + 1.0 * s + 0.5 * m - 0.5 * l + 0.5 * x;
}

inline NuisanceSet toy_bin_nuisances() {
  NuisanceSet nuis = toy_nuisances();
  nuis.psi = make_glm(Family::binomial, {"1", "s", "m", "l", "x"},
                      {-0.5, 1.0, 0.5, -0.5, 0.5});
  return nuis;
}

inline Dataset toy_bin_sampled_dataset(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 0xB17u);
  std::vector<double> xs(n), ss(n), ms(n), ls(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    int x = static_cast<int>(rng.bernoulli(0.5));
    int s = static_cast<int>(rng.bernoulli(toy_pi(x)));
    int m = static_cast<int>(rng.bernoulli(toy_fm(s, x)));
    int l = static_cast<int>(rng.bernoulli(toy_fl(s, m)));
    xs[i] = x;
    ss[i] = s;
    ms[i] = m;
    ls[i] = l;
    ys[i] = rng.bernoulli(expit(toy_bin_psi_logit(s, m, l, x)));
  }
  Dataset d;
  d.add_column("x", std::move(xs));
  d.add_column("s", std::move(ss));
  d.add_column("m", std::move(ms));
  d.add_column("l", std::move(ls));
  d.add_column("y", std::move(ys));
  return d;
}

inline double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  double mu = mean_of(v), acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace testkit
