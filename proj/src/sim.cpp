#include "fairpse/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "fairpse/errors.hpp"
#include "fairpse/rng.hpp"

namespace fairpse {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return CounterRng(seed, tag).next_u64();
}

// 6.1 design functionals
double g61(double x1, double x2) { return -x1 + 2.0 * x1 * x2; }
double pi61(double x1, double x2) { return expit(g61(x1, x2)); }
double fm61(int s, double x1, double x2) { return expit(-0.5 + 0.5 * s + g61(x1, x2)); }
double fl61(int s, int m, double x1, double x2) {
  return expit(-1.0 + 0.5 * s - 0.5 * m + g61(x1, x2));
}
double psi61(int s, int m, int l, double x1, double x2) {
  return -0.5 + s + 0.5 * m - 0.5 * l + g61(x1, x2);
}

// 6.2 design: the sparse linear index over the first five covariates; the
// bare regressor in the design is the sensitive attribute
double h62(const double* x) {
  return x[0] - x[1] / 2.0 + x[2] / 3.0 - x[3] / 4.0 + x[4] / 5.0;
}
double pi62(double h) { return expit(h); }
double fm62(int s, double h) { return expit(-s + h); }
double fl62(int s, double h) { return expit(s - h); }
double psi62(int s, int m, int l, double h) { return s + l + m + h; }

// sec. 4 worked examples
double psi_ate(int s, double x) { return 0.5 + 0.2 * x + 0.75 * s; }
double fm_nde(int s, double x) { return expit(2.0 * x + 1.5 * s); }
double psi_nde(int s, int m, double x) { return 0.5 + 0.2 * x + 0.75 * s + 0.5 * m; }

// discrete toy with rational tables
double pi_toy(double x) { return (2.0 + x) / 4.0; }
double fm_toy(int s, double x) { return (1.0 + s + x) / 4.0; }
double fl_toy(int s, int m) { return (1.0 + 2.0 * s + 2.0 * m) / 8.0; }
double psi_toy(int s, int m, int l, double x) {
  return 0.3 + 1.1 * s + 0.6 * m - 0.4 * l + 0.25 * x;
}

double simpson(double lo, double hi, int panels, const std::function<double(double)>& f) {
  if (panels % 2) ++panels;
  double h = (hi - lo) / panels;
  double acc = f(lo) + f(hi);
  for (int k = 1; k < panels; ++k) acc += f(lo + k * h) * (k % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

double rho1_ratio(double fm0, double fms) { return fm0 / fms; }

}  // namespace

const char* dgp_name(DgpTag t) {
  switch (t) {
    case DgpTag::misspec_6_1: return "misspec_6_1";
    case DgpTag::highdim_6_2: return "highdim_6_2";
    case DgpTag::ate_sec4: return "ate_sec4";
    case DgpTag::nde_sec4: return "nde_sec4";
    case DgpTag::custom_discrete: return "custom_discrete";
  }
  return "?";
}

DgpTag dgp_from_string(const std::string& s) {
  if (s == "misspec_6_1") return DgpTag::misspec_6_1;
  if (s == "highdim_6_2") return DgpTag::highdim_6_2;
  if (s == "ate_sec4") return DgpTag::ate_sec4;
  if (s == "nde_sec4") return DgpTag::nde_sec4;
  if (s == "custom_discrete") return DgpTag::custom_discrete;
  throw Error(ErrorCode::bad_spec, "unknown dgp tag: " + s);
}

DgpSpec DgpSpec::from_json(const nlohmann::json& j) {
  DgpSpec d;
  d.tag = dgp_from_string(j.at("tag").get<std::string>());
  d.seed = j.value("seed", std::uint64_t{1});
  d.p = j.value("p", 100);
  d.x_lo = j.value("x_lo", -2.0);
  d.x_hi = j.value("x_hi", 2.0);
  if (d.tag == DgpTag::highdim_6_2 && d.p < 5) {
    throw Error(ErrorCode::bad_spec, "highdim_6_2 needs p >= 5");
  }
  if (d.x_hi <= d.x_lo) throw Error(ErrorCode::bad_spec, "x_hi must exceed x_lo");
  return d;
}

Dataset generate(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::bad_spec, "n must be >= 1");
  CounterRng rng(seed, n);
  Dataset d;
  switch (dgp.tag) {
    case DgpTag::misspec_6_1: {
      std::vector<double> x1(n), x2(n), s(n), m(n), l(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x1[i] = rng.bernoulli(0.5);
        x2[i] = rng.uniform(-2.0, 2.0);
        s[i] = rng.bernoulli(pi61(x1[i], x2[i]));
        m[i] = rng.bernoulli(fm61(int(s[i]), x1[i], x2[i]));
        l[i] = rng.bernoulli(fl61(int(s[i]), int(m[i]), x1[i], x2[i]));
        y[i] = rng.normal(psi61(int(s[i]), int(m[i]), int(l[i]), x1[i], x2[i]), 2.0);
      }
      d.add_column("x1", std::move(x1));
      d.add_column("x2", std::move(x2));
      d.add_column("s", std::move(s));
      d.add_column("m", std::move(m));
      d.add_column("l", std::move(l));
      d.add_column("y", std::move(y));
      break;
    }
    case DgpTag::highdim_6_2: {
      if (dgp.p < 5) throw Error(ErrorCode::bad_spec, "highdim_6_2 needs p >= 5");
      std::vector<std::vector<double>> x(dgp.p, std::vector<double>(n));
      std::vector<double> s(n), m(n), l(n), y(n);
      std::vector<double> xrow(dgp.p);
      for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < dgp.p; ++j) {
          xrow[j] = rng.normal();
          x[j][i] = xrow[j];
        }
        double h = h62(xrow.data());
        s[i] = rng.bernoulli(pi62(h));
        m[i] = rng.bernoulli(fm62(int(s[i]), h));
        l[i] = rng.bernoulli(fl62(int(s[i]), h));
        y[i] = rng.normal(psi62(int(s[i]), int(m[i]), int(l[i]), h), 3.0);
      }
      for (int j = 0; j < dgp.p; ++j) {
        d.add_column("x" + std::to_string(j + 1), std::move(x[j]));
      }
      d.add_column("s", std::move(s));
      d.add_column("m", std::move(m));
      d.add_column("l", std::move(l));
      d.add_column("y", std::move(y));
      break;
    }
    case DgpTag::ate_sec4: {
      std::vector<double> x(n), s(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(dgp.x_lo, dgp.x_hi);
        s[i] = rng.bernoulli(expit(x[i]));
        y[i] = rng.normal(psi_ate(int(s[i]), x[i]), 1.0);
      }
      d.add_column("x", std::move(x));
      d.add_column("s", std::move(s));
      d.add_column("y", std::move(y));
      break;
    }
    case DgpTag::nde_sec4: {
      std::vector<double> x(n), s(n), m(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(dgp.x_lo, dgp.x_hi);
        s[i] = rng.bernoulli(0.5);
        m[i] = rng.bernoulli(fm_nde(int(s[i]), x[i]));
        y[i] = rng.normal(psi_nde(int(s[i]), int(m[i]), x[i]), 1.0);
      }
      d.add_column("x", std::move(x));
      d.add_column("s", std::move(s));
      d.add_column("m", std::move(m));
      d.add_column("y", std::move(y));
      break;
    }
    case DgpTag::custom_discrete: {
      std::vector<double> x(n), s(n), m(n), l(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.bernoulli(0.5);
        s[i] = rng.bernoulli(pi_toy(x[i]));
        m[i] = rng.bernoulli(fm_toy(int(s[i]), x[i]));
        l[i] = rng.bernoulli(fl_toy(int(s[i]), int(m[i])));
        y[i] = rng.normal(psi_toy(int(s[i]), int(m[i]), int(l[i]), x[i]), 0.5);
      }
      d.add_column("x", std::move(x));
      d.add_column("s", std::move(s));
      d.add_column("m", std::move(m));
      d.add_column("l", std::move(l));
      d.add_column("y", std::move(y));
      break;
    }
  }
  return d;
}

std::vector<double> true_psi0(const DgpSpec& dgp, const Dataset& data) {
  const std::size_t n = data.n_rows();
  std::vector<double> out(n);
  const auto& s = data.column("s");
  switch (dgp.tag) {
    case DgpTag::misspec_6_1: {
      const auto& x1 = data.column("x1");
      const auto& x2 = data.column("x2");
      const auto& m = data.column("m");
      const auto& l = data.column("l");
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = psi61(int(s[i]), int(m[i]), int(l[i]), x1[i], x2[i]);
      }
      break;
    }
    case DgpTag::highdim_6_2: {
      const auto& m = data.column("m");
      const auto& l = data.column("l");
      std::vector<const std::vector<double>*> x;
      for (int j = 0; j < 5; ++j) x.push_back(&data.column("x" + std::to_string(j + 1)));
      for (std::size_t i = 0; i < n; ++i) {
        double xr[5] = {(*x[0])[i], (*x[1])[i], (*x[2])[i], (*x[3])[i], (*x[4])[i]};
        out[i] = psi62(int(s[i]), int(m[i]), int(l[i]), h62(xr));
      }
      break;
    }
    case DgpTag::ate_sec4: {
      const auto& x = data.column("x");
      for (std::size_t i = 0; i < n; ++i) out[i] = psi_ate(int(s[i]), x[i]);
      break;
    }
    case DgpTag::nde_sec4: {
      const auto& x = data.column("x");
      const auto& m = data.column("m");
      for (std::size_t i = 0; i < n; ++i) out[i] = psi_nde(int(s[i]), int(m[i]), x[i]);
      break;
    }
    case DgpTag::custom_discrete: {
      const auto& x = data.column("x");
      const auto& m = data.column("m");
      const auto& l = data.column("l");
      for (std::size_t i = 0; i < n; ++i) {
        out[i] = psi_toy(int(s[i]), int(m[i]), int(l[i]), x[i]);
      }
      break;
    }
  }
  return out;
}

std::vector<double> true_gradient(const DgpSpec& dgp, const Dataset& data) {
  const std::size_t n = data.n_rows();
  std::vector<double> out(n);
  const auto& s = data.column("s");
  switch (dgp.tag) {
    case DgpTag::misspec_6_1: {
      const auto& x1 = data.column("x1");
      const auto& x2 = data.column("x2");
      const auto& m = data.column("m");
      for (std::size_t i = 0; i < n; ++i) {
        int si = int(s[i]), mi = int(m[i]);
        double pi1 = pi61(x1[i], x2[i]);
        double pis = si ? pi1 : 1.0 - pi1;
        double f0 = mi ? fm61(0, x1[i], x2[i]) : 1.0 - fm61(0, x1[i], x2[i]);
        double fs = mi ? fm61(si, x1[i], x2[i]) : 1.0 - fm61(si, x1[i], x2[i]);
        out[i] = (2.0 * si - 1.0) / pis * rho1_ratio(f0, fs);
      }
      break;
    }
    case DgpTag::highdim_6_2: {
      const auto& m = data.column("m");
      std::vector<const std::vector<double>*> x;
      for (int j = 0; j < 5; ++j) x.push_back(&data.column("x" + std::to_string(j + 1)));
      for (std::size_t i = 0; i < n; ++i) {
        double xr[5] = {(*x[0])[i], (*x[1])[i], (*x[2])[i], (*x[3])[i], (*x[4])[i]};
        double h = h62(xr);
        int si = int(s[i]), mi = int(m[i]);
        double pi1 = pi62(h);
        double pis = si ? pi1 : 1.0 - pi1;
        double f0 = mi ? fm62(0, h) : 1.0 - fm62(0, h);
        double fs = mi ? fm62(si, h) : 1.0 - fm62(si, h);
        out[i] = (2.0 * si - 1.0) / pis * rho1_ratio(f0, fs);
      }
      break;
    }
    case DgpTag::ate_sec4: {
      const auto& x = data.column("x");
      for (std::size_t i = 0; i < n; ++i) {
        int si = int(s[i]);
        double pi1 = expit(x[i]);
        out[i] = (2.0 * si - 1.0) / (si ? pi1 : 1.0 - pi1);
      }
      break;
    }
    case DgpTag::nde_sec4: {
      const auto& x = data.column("x");
      const auto& m = data.column("m");
      for (std::size_t i = 0; i < n; ++i) {
        int si = int(s[i]), mi = int(m[i]);
        double f0 = mi ? fm_nde(0, x[i]) : 1.0 - fm_nde(0, x[i]);
        double fs = mi ? fm_nde(si, x[i]) : 1.0 - fm_nde(si, x[i]);
        out[i] = (4.0 * si - 2.0) * rho1_ratio(f0, fs);
      }
      break;
    }
    case DgpTag::custom_discrete: {
      const auto& x = data.column("x");
      const auto& m = data.column("m");
      for (std::size_t i = 0; i < n; ++i) {
        int si = int(s[i]), mi = int(m[i]);
        double pi1 = pi_toy(x[i]);
        double pis = si ? pi1 : 1.0 - pi1;
        double f0 = mi ? fm_toy(0, x[i]) : 1.0 - fm_toy(0, x[i]);
        double fs = mi ? fm_toy(si, x[i]) : 1.0 - fm_toy(si, x[i]);
        out[i] = (2.0 * si - 1.0) / pis * rho1_ratio(f0, fs);
      }
      break;
    }
  }
  return out;
}

double true_constraint_of(const DgpSpec& dgp, const Dataset& data, const PredRule& g) {
  const std::size_t n = data.n_rows();
  double total = 0.0;
  switch (dgp.tag) {
    case DgpTag::ate_sec4: {
      for (std::size_t i = 0; i < n; ++i) total += g(1, 0, i) - g(0, 0, i);
      break;
    }
    case DgpTag::nde_sec4: {
      const auto& x = data.column("x");
      for (std::size_t i = 0; i < n; ++i) {
        double c = 0.0;
        for (unsigned m = 0; m < 2; ++m) {
          double fm0 = m ? fm_nde(0, x[i]) : 1.0 - fm_nde(0, x[i]);
          c += fm0 * (g(1, m, i) - g(0, m, i));
        }
        total += c;
      }
      break;
    }
    case DgpTag::misspec_6_1:
    case DgpTag::highdim_6_2:
    case DgpTag::custom_discrete: {
      // rho1 layout: sum over m with f_M(.|0, x), then l with f_L(.|s, m, x)
      const std::vector<double>* x1 = nullptr;
      const std::vector<double>* x2 = nullptr;
      const std::vector<double>* xc = nullptr;
      const std::vector<double>* xs[5] = {nullptr, nullptr, nullptr, nullptr, nullptr};
      if (dgp.tag == DgpTag::misspec_6_1) {
        x1 = &data.column("x1");
        x2 = &data.column("x2");
      } else if (dgp.tag == DgpTag::custom_discrete) {
        xc = &data.column("x");
      } else {
        for (int j = 0; j < 5; ++j) xs[j] = &data.column("x" + std::to_string(j + 1));
      }
      for (std::size_t i = 0; i < n; ++i) {
        double fm1_0, fl1s[2][2];  // P(M=1|S=0,x); P(L=1|s,m,x)
        if (dgp.tag == DgpTag::misspec_6_1) {
          fm1_0 = fm61(0, (*x1)[i], (*x2)[i]);
          for (int s = 0; s < 2; ++s) {
            for (int m = 0; m < 2; ++m) fl1s[s][m] = fl61(s, m, (*x1)[i], (*x2)[i]);
          }
        } else if (dgp.tag == DgpTag::custom_discrete) {
          fm1_0 = fm_toy(0, (*xc)[i]);
          for (int s = 0; s < 2; ++s) {
            for (int m = 0; m < 2; ++m) fl1s[s][m] = fl_toy(s, m);
          }
        } else {
          double xr[5] = {(*xs[0])[i], (*xs[1])[i], (*xs[2])[i], (*xs[3])[i], (*xs[4])[i]};
          double h = h62(xr);
          fm1_0 = fm62(0, h);
          for (int s = 0; s < 2; ++s) {
            for (int m = 0; m < 2; ++m) fl1s[s][m] = fl62(s, h);
          }
        }
        double c = 0.0;
        for (unsigned m = 0; m < 2; ++m) {
          double fm0 = m ? fm1_0 : 1.0 - fm1_0;
          for (unsigned l = 0; l < 2; ++l) {
            unsigned cfg = m | (l << 1);
            double fl1v = l ? fl1s[1][m] : 1.0 - fl1s[1][m];
            double fl0v = l ? fl1s[0][m] : 1.0 - fl1s[0][m];
            c += fm0 * (fl1v * g(1, cfg, i) - fl0v * g(0, cfg, i));
          }
        }
        total += c;
      }
      break;
    }
  }
  return total / static_cast<double>(n);
}

double noise_variance(const DgpSpec& dgp) {
  switch (dgp.tag) {
    case DgpTag::misspec_6_1: return 4.0;
    case DgpTag::highdim_6_2: return 9.0;
    case DgpTag::ate_sec4: return 1.0;
    case DgpTag::nde_sec4: return 1.0;
    case DgpTag::custom_discrete: return 0.25;
  }
  return 1.0;
}

OracleReport oracle_truths(const DgpSpec& dgp, std::size_t test_n, std::uint64_t seed) {
  if (test_n < 100000) {
    throw Error(ErrorCode::bad_spec, "oracle test size must be >= 1e5");
  }
  OracleReport rep;
  rep.noise_var = noise_variance(dgp);
  rep.risk_psi0 = rep.noise_var;
  CounterRng rng(seed, 0x0AC1Eu);

  double theta_acc = 0.0, d2_acc = 0.0;
  const double n = static_cast<double>(test_n);

  switch (dgp.tag) {
    case DgpTag::misspec_6_1: {
      for (std::size_t i = 0; i < test_n; ++i) {
        double x1 = rng.bernoulli(0.5);
        double x2 = rng.uniform(-2.0, 2.0);
        double th = 0.0, d2 = 0.0;
        double pi1 = pi61(x1, x2);
        for (int m = 0; m < 2; ++m) {
          double fm0 = m ? fm61(0, x1, x2) : 1.0 - fm61(0, x1, x2);
          for (int l = 0; l < 2; ++l) {
            double fl1v = l ? fl61(1, m, x1, x2) : 1.0 - fl61(1, m, x1, x2);
            double fl0v = l ? fl61(0, m, x1, x2) : 1.0 - fl61(0, m, x1, x2);
            th += (psi61(1, m, l, x1, x2) * fl1v - psi61(0, m, l, x1, x2) * fl0v) * fm0;
          }
          for (int s = 0; s < 2; ++s) {
            double pis = s ? pi1 : 1.0 - pi1;
            double fms = m ? fm61(s, x1, x2) : 1.0 - fm61(s, x1, x2);
            double dv = (2.0 * s - 1.0) / pis * (fm0 / fms);
            d2 += pis * fms * dv * dv;
          }
        }
        theta_acc += th;
        d2_acc += d2;
      }
      break;
    }
    case DgpTag::highdim_6_2: {
      std::vector<double> xr(5);
      for (std::size_t i = 0; i < test_n; ++i) {
        for (int j = 0; j < 5; ++j) xr[j] = rng.normal();
        double h = h62(xr.data());
        // psi is additive in l and m, so the inner sums collapse
        theta_acc += 1.0 + fl62(1, h) - fl62(0, h);
        double pi1 = pi62(h), d2 = 0.0;
        for (int s = 0; s < 2; ++s) {
          double pis = s ? pi1 : 1.0 - pi1;
          for (int m = 0; m < 2; ++m) {
            double fm0 = m ? fm62(0, h) : 1.0 - fm62(0, h);
            double fms = m ? fm62(s, h) : 1.0 - fm62(s, h);
            double dv = (2.0 * s - 1.0) / pis * (fm0 / fms);
            d2 += pis * fms * dv * dv;
          }
        }
        d2_acc += d2;
      }
      break;
    }
    case DgpTag::ate_sec4: {
      for (std::size_t i = 0; i < test_n; ++i) {
        double x = rng.uniform(dgp.x_lo, dgp.x_hi);
        theta_acc += 0.75;
        double p = expit(x);
        d2_acc += 1.0 / (p * (1.0 - p));
      }
      break;
    }
    case DgpTag::nde_sec4: {
      for (std::size_t i = 0; i < test_n; ++i) {
        double x = rng.uniform(dgp.x_lo, dgp.x_hi);
        double th = 0.0, d2 = 0.0;
        for (int m = 0; m < 2; ++m) {
          double fm0 = m ? fm_nde(0, x) : 1.0 - fm_nde(0, x);
          th += (psi_nde(1, m, x) - psi_nde(0, m, x)) * fm0;
          for (int s = 0; s < 2; ++s) {
            double fms = m ? fm_nde(s, x) : 1.0 - fm_nde(s, x);
            double dv = (4.0 * s - 2.0) * (fm0 / fms);
            d2 += 0.5 * fms * dv * dv;
          }
        }
        theta_acc += th;
        d2_acc += d2;
      }
      break;
    }
    case DgpTag::custom_discrete: {
      // fully discrete: exact enumeration, no sampling error
      double th = 0.0, d2 = 0.0;
      for (int xi = 0; xi < 2; ++xi) {
        double x = xi;
        double px = 0.5;
        double pi1 = pi_toy(x);
        for (int m = 0; m < 2; ++m) {
          double fm0 = m ? fm_toy(0, x) : 1.0 - fm_toy(0, x);
          for (int l = 0; l < 2; ++l) {
            double fl1v = l ? fl_toy(1, m) : 1.0 - fl_toy(1, m);
            double fl0v = l ? fl_toy(0, m) : 1.0 - fl_toy(0, m);
            th += px * (psi_toy(1, m, l, x) * fl1v - psi_toy(0, m, l, x) * fl0v) * fm0;
          }
          for (int s = 0; s < 2; ++s) {
            double pis = s ? pi1 : 1.0 - pi1;
            double fms = m ? fm_toy(s, x) : 1.0 - fm_toy(s, x);
            double dv = (2.0 * s - 1.0) / pis * (fm0 / fms);
            d2 += px * pis * fms * dv * dv;
          }
        }
      }
      rep.theta = th;
      rep.sigma2_d = d2;
      rep.risk_psistar = rep.noise_var + th * th / d2;
      return rep;
    }
  }
  rep.theta = theta_acc / n;
  rep.sigma2_d = d2_acc / n;
  rep.risk_psistar = rep.noise_var + rep.theta * rep.theta / rep.sigma2_d;
  return rep;
}

double ate_sigma2_quadrature(double x_lo, double x_hi) {
  return simpson(x_lo, x_hi, 4000, [](double x) { return 2.0 + 2.0 * std::cosh(x); }) /
         (x_hi - x_lo);
}

double ate_naive_gap_quadrature(double x_lo, double x_hi) {
  return 0.5625 *
         simpson(x_lo, x_hi, 4000, [](double x) { return expit(x); }) / (x_hi - x_lo);
}

double theta61_quadrature() {
  double total = 0.0;
  for (int x1i = 0; x1i < 2; ++x1i) {
    double x1 = x1i;
    total += 0.5 * simpson(-2.0, 2.0, 8000, [x1](double x2) {
               double th = 0.0;
               for (int m = 0; m < 2; ++m) {
                 double fm0 = m ? fm61(0, x1, x2) : 1.0 - fm61(0, x1, x2);
                 for (int l = 0; l < 2; ++l) {
                   double fl1v = l ? fl61(1, m, x1, x2) : 1.0 - fl61(1, m, x1, x2);
                   double fl0v = l ? fl61(0, m, x1, x2) : 1.0 - fl61(0, m, x1, x2);
                   th += (psi61(1, m, l, x1, x2) * fl1v - psi61(0, m, l, x1, x2) * fl0v) * fm0;
                 }
               }
               return th;
             }) / 4.0;
  }
  return total;
}

double sigma2_61_quadrature() {
  double total = 0.0;
  for (int x1i = 0; x1i < 2; ++x1i) {
    double x1 = x1i;
    total += 0.5 * simpson(-2.0, 2.0, 8000, [x1](double x2) {
               double d2 = 0.0;
               double pi1 = pi61(x1, x2);
               for (int s = 0; s < 2; ++s) {
                 double pis = s ? pi1 : 1.0 - pi1;
                 for (int m = 0; m < 2; ++m) {
                   double fm0 = m ? fm61(0, x1, x2) : 1.0 - fm61(0, x1, x2);
                   double fms = m ? fm61(s, x1, x2) : 1.0 - fm61(s, x1, x2);
                   d2 += fm0 * fm0 / fms / pis;
                 }
               }
               return d2;
             }) / 4.0;
  }
  return total;
}

double theta62_quadrature() {
  const double var = 1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0 + 1.0 / 25.0;
  const double sd = std::sqrt(var);
  const double norm = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
  double integral = simpson(-12.0 * sd, 12.0 * sd, 24000, [&](double h) {
    double phi = norm / sd * std::exp(-0.5 * h * h / var);
    return (1.0 + fl62(1, h) - fl62(0, h)) * phi;
  });
  return integral;
}

NuisanceConfig nuisance_config_for(const DgpSpec& dgp, const MisspecPattern& pattern,
                                   const std::vector<double>& cv_grid,
                                   std::uint64_t cv_seed) {
  NuisanceConfig cfg;
  cfg.cv_grid = cv_grid;
  cfg.cv_seed = cv_seed;
  auto with_inter = [](std::vector<std::string> base, bool correct) {
    if (correct) base.push_back("x1:x2");
    return base;
  };
  switch (dgp.tag) {
    case DgpTag::misspec_6_1:
      cfg.psi_spec = FeatureSpec::from_terms(with_inter({"1", "s", "m", "l", "x1", "x2"}, pattern.psi));
      cfg.pi_spec = FeatureSpec::from_terms(with_inter({"1", "x1", "x2"}, pattern.pi));
      cfg.fm_spec = FeatureSpec::from_terms(with_inter({"1", "s", "x1", "x2"}, pattern.f_m));
      cfg.fl_spec = FeatureSpec::from_terms(with_inter({"1", "s", "m", "x1", "x2"}, pattern.f_l));
      break;
    case DgpTag::highdim_6_2: {
      std::vector<std::string> xcols;
      for (int j = 0; j < dgp.p; ++j) xcols.push_back("x" + std::to_string(j + 1));
      auto terms = [&xcols](std::vector<std::string> head) {
        head.insert(head.end(), xcols.begin(), xcols.end());
        return head;
      };
      cfg.psi_spec = FeatureSpec::from_terms(terms({"1", "s", "m", "l"}));
      cfg.pi_spec = FeatureSpec::from_terms(terms({"1"}));
      cfg.fm_spec = FeatureSpec::from_terms(terms({"1", "s"}));
      cfg.fl_spec = FeatureSpec::from_terms(terms({"1", "s", "m"}));
      if (cfg.cv_grid.empty()) {
        cfg.cv_grid = {0.0005, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1};
      }
      break;
    }
    case DgpTag::ate_sec4:
      cfg.psi_spec = FeatureSpec::from_terms({"1", "s", "x"});
      cfg.pi_spec = FeatureSpec::from_terms({"1", "x"});
      break;
    case DgpTag::nde_sec4:
      cfg.psi_spec = FeatureSpec::from_terms({"1", "s", "x", "m"});
      cfg.pi_spec = FeatureSpec::from_terms({"1"});
      cfg.fm_spec = FeatureSpec::from_terms({"1", "s", "x"});
      break;
    case DgpTag::custom_discrete:
      cfg.psi_spec = FeatureSpec::from_terms({"1", "s", "m", "l", "x"});
      cfg.pi_spec = FeatureSpec::from_terms({"1", "x"});
      cfg.fm_spec = FeatureSpec::from_terms({"1", "s", "x"});
      cfg.fl_spec = FeatureSpec::from_terms({"1", "s", "m", "s:m"});
      break;
  }
  return cfg;
}

namespace {

Scenario scenario_for(const DgpSpec& dgp) {
  switch (dgp.tag) {
    case DgpTag::misspec_6_1:
    case DgpTag::highdim_6_2:
    case DgpTag::custom_discrete:
      return Scenario::rho1();
    case DgpTag::ate_sec4:
      return Scenario::generic(CausalPartition{{"x"}, "s", "y", 1, {}, {"y"}});
    case DgpTag::nde_sec4:
      return Scenario::generic(CausalPartition{{"x"}, "s", "y", 1, {"m"}, {"y"}});
  }
  return Scenario::rho1();
}

}  // namespace

SimPlan SimPlan::from_json(const nlohmann::json& j) {
  SimPlan p;
  p.dgp = DgpSpec::from_json(j.at("dgp"));
  if (j.contains("sizes")) p.sizes = j.at("sizes").get<std::vector<std::size_t>>();
  p.replications = j.value("replications", 200);
  if (j.contains("pattern")) {
    const auto& pat = j.at("pattern");
    p.pattern.psi = pat.value("psi", true);
    p.pattern.pi = pat.value("pi", true);
    p.pattern.f_m = pat.value("f_m", true);
    p.pattern.f_l = pat.value("f_l", true);
  }
  if (j.contains("methods")) {
    p.methods.clear();
    for (const auto& m : j.at("methods")) {
      p.methods.push_back(method_from_string(m.get<std::string>()));
    }
  }
  if (j.contains("bounds")) p.bounds = j.at("bounds").get<std::vector<double>>();
  p.test_n = j.value("test_n", std::size_t{100000});
  if (j.contains("risk")) p.risk = risk_mode_from_string(j.at("risk").get<std::string>());
  p.base_seed = j.value("base_seed", std::uint64_t{1});
  p.threads = j.value("threads", 0);
  p.lambda_grid = j.value("lambda_grid", 2001);
  if (j.contains("cv_grid")) p.cv_grid = j.at("cv_grid").get<std::vector<double>>();
  p.validate();
  return p;
}

void SimPlan::validate() const {
  if (replications < 1) throw Error(ErrorCode::bad_spec, "replications must be >= 1");
  if (sizes.empty()) throw Error(ErrorCode::bad_spec, "sizes must be nonempty");
  if (methods.empty()) throw Error(ErrorCode::bad_spec, "methods must be nonempty");
  if (bounds.empty()) throw Error(ErrorCode::bad_spec, "bounds must be nonempty");
  if (test_n < 100000) throw Error(ErrorCode::bad_spec, "test_n must be >= 1e5 for oracle metrics");
  for (double b : bounds) {
    if (b < 0) throw Error(ErrorCode::bad_spec, "bounds must be >= 0");
  }
}

SimResult run_plan(const SimPlan& plan) {
  plan.validate();
  SimResult result;
  result.oracle = oracle_truths(plan.dgp, plan.test_n, plan.base_seed);

  Dataset test = generate(plan.dgp, plan.test_n, derive_seed(plan.base_seed, 0x7E57u));
  const auto psi0 = true_psi0(plan.dgp, test);
  const double noise = noise_variance(plan.dgp);
  const Scenario scenario = scenario_for(plan.dgp);
  const auto& test_s = test.column("s");

  const std::size_t n_sizes = plan.sizes.size();
  const std::size_t n_methods = plan.methods.size();
  const std::size_t n_bounds = plan.bounds.size();
  const std::size_t cells_per_job = n_methods * n_bounds;
  const std::size_t n_jobs = static_cast<std::size_t>(plan.replications) * n_sizes;
  result.cells.resize(n_jobs * cells_per_job);

  auto cell_at = [&](std::size_t job, std::size_t mi, std::size_t bi) -> SimCell& {
    return result.cells[(job * n_methods + mi) * n_bounds + bi];
  };

  auto run_job = [&](std::size_t job) {
    const int rep = static_cast<int>(job / n_sizes);
    const std::size_t n = plan.sizes[job % n_sizes];
    const std::uint64_t seed = plan.base_seed + static_cast<std::uint64_t>(rep);
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      for (std::size_t bi = 0; bi < n_bounds; ++bi) {
        SimCell& c = cell_at(job, mi, bi);
        c.rep = rep;
        c.n = n;
        c.method = plan.methods[mi];
        c.bound = plan.bounds[bi];
        c.risk = c.constraint = c.theta_n = c.lambda_n = std::nan("");
      }
    }
    try {
      Dataset data = generate(plan.dgp, n, seed);
      NuisanceConfig cfg = nuisance_config_for(plan.dgp, plan.pattern, plan.cv_grid, seed);
      NuisanceSet nuis = fit_nuisances(data, cfg);
      PseEngine engine(data, nuis, scenario);
      GradientField field = engine.gradient();

      PseEngine test_engine(test, nuis, scenario);
      const std::size_t tn = test.n_rows();
      std::vector<double> test_psi(tn), test_d(tn);
      for (std::size_t i = 0; i < tn; ++i) {
        int si = static_cast<int>(test_s[i]);
        test_psi[i] = test_engine.psi_observed(si, i);
        test_d[i] = test_engine.d_observed(i);
      }

      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        ThetaMethod method = plan.methods[mi];
        ConstraintEstimate est;
        try {
          est = engine.theta(method);
        } catch (const std::exception& e) {
          for (std::size_t bi = 0; bi < n_bounds; ++bi) cell_at(job, mi, bi).error = e.what();
          continue;
        }
        for (std::size_t bi = 0; bi < n_bounds; ++bi) {
          SimCell& c = cell_at(job, mi, bi);
          auto t0 = std::chrono::steady_clock::now();
          try {
            FairPredictor fp;
            switch (plan.risk) {
              case RiskMode::mse_mean_diff:
                fp = solve_mse(data, nuis, scenario, method, c.bound);
                break;
              case RiskMode::xent_mean_diff: {
                LambdaSearchConfig lcfg;
                lcfg.grid_size = plan.lambda_grid;
                fp = solve_lambda_xent(data, nuis, scenario, method, lcfg, c.bound);
                break;
              }
              case RiskMode::xent_log_odds: {
                LambdaSearchConfig lcfg;
                lcfg.grid_size = plan.lambda_grid;
                fp = adjust_log_odds(data, nuis, scenario, lcfg);
                break;
              }
            }
            double risk_acc = 0.0;
            std::size_t clamped = 0;
            for (std::size_t i = 0; i < tn; ++i) {
              int si = static_cast<int>(test_s[i]);
              double v = fair_value(fp, test_psi[i], test_d[i], si, &clamped);
              double e = psi0[i] - v;
              risk_acc += e * e;
            }
            c.risk = risk_acc / static_cast<double>(tn) + noise;
            PredRule adjusted = [&](int s, unsigned cfg, std::size_t i) {
              return fair_value(fp, test_engine.psi_at(s, cfg, i),
                                test_engine.d_at(s, cfg, i), s, nullptr);
            };
            c.constraint = true_constraint_of(plan.dgp, test, adjusted);
            c.theta_n = est.value;
            c.lambda_n = fp.lambda_n;
            c.ok = true;
          } catch (const std::exception& e) {
            c.error = e.what();
          }
          c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
      }
    } catch (const std::exception& e) {
      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        for (std::size_t bi = 0; bi < n_bounds; ++bi) {
          if (cell_at(job, mi, bi).error.empty()) cell_at(job, mi, bi).error = e.what();
        }
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  unsigned n_threads = plan.threads > 0 ? static_cast<unsigned>(plan.threads)
                                        : (hw ? hw : 1u);
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(n_jobs));
  if (n_threads <= 1) {
    for (std::size_t j = 0; j < n_jobs; ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back([&]() {
        for (;;) {
          std::size_t j = next.fetch_add(1);
          if (j >= n_jobs) return;
          run_job(j);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return result;
}

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

std::vector<SummaryRow> summarize(const SimResult& result) {
  if (result.cells.empty()) throw Error(ErrorCode::bad_spec, "nothing to summarize");
  struct Key {
    std::size_t n;
    ThetaMethod method;
    double bound;
    bool operator<(const Key& o) const {
      if (n != o.n) return n < o.n;
      if (method != o.method) return method < o.method;
      return bound < o.bound;
    }
  };
  std::vector<Key> keys;
  for (const auto& c : result.cells) {
    Key k{c.n, c.method, c.bound};
    if (std::find_if(keys.begin(), keys.end(), [&](const Key& x) {
          return x.n == k.n && x.method == k.method && x.bound == k.bound;
        }) == keys.end()) {
      keys.push_back(k);
    }
  }
  std::sort(keys.begin(), keys.end());

  std::vector<SummaryRow> rows;
  for (const auto& k : keys) {
    SummaryRow r;
    r.n = k.n;
    r.method = k.method;
    r.bound = k.bound;
    std::vector<double> risks, cons, abs_cons;
    for (const auto& c : result.cells) {
      if (c.n != k.n || c.method != k.method || c.bound != k.bound || !c.ok) continue;
      risks.push_back(c.risk);
      cons.push_back(c.constraint);
      abs_cons.push_back(std::abs(c.constraint));
    }
    r.n_ok = static_cast<int>(risks.size());
    r.risk_q1 = quantile(risks, 0.25);
    r.risk_med = quantile(risks, 0.5);
    r.risk_q3 = quantile(risks, 0.75);
    r.cons_q1 = quantile(cons, 0.25);
    r.cons_med = quantile(cons, 0.5);
    r.cons_q3 = quantile(cons, 0.75);
    r.abs_cons_med = quantile(abs_cons, 0.5);
    rows.push_back(r);
  }
  return rows;
}

namespace {

void write_num(std::ofstream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void write_result_csv(const SimResult& result, const std::string& path,
                      bool include_timing) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::data, "cannot write " + path);
  out << "rep,n,method,bound,risk,constraint,theta_n,lambda_n,seconds\n";
  for (const auto& c : result.cells) {
    out << c.rep << ',' << c.n << ',' << method_name(c.method) << ',';
    write_num(out, c.bound);
    out << ',';
    write_num(out, c.risk);
    out << ',';
    write_num(out, c.constraint);
    out << ',';
    write_num(out, c.theta_n);
    out << ',';
    write_num(out, c.lambda_n);
    out << ',';
    write_num(out, include_timing ? c.seconds : 0.0);
    out << "\n";
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::data, "cannot write " + path);
  out << "n,method,bound,n_ok,risk_q1,risk_med,risk_q3,"
         "constraint_q1,constraint_med,constraint_q3,abs_constraint_med\n";
  for (const auto& r : rows) {
    out << r.n << ',' << method_name(r.method) << ',';
    write_num(out, r.bound);
    out << ',' << r.n_ok;
    for (double v : {r.risk_q1, r.risk_med, r.risk_q3, r.cons_q1, r.cons_med, r.cons_q3,
                     r.abs_cons_med}) {
      out << ',';
      write_num(out, v);
    }
    out << "\n";
  }
}

}  // namespace fairpse
