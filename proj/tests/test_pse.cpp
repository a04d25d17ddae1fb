#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fairpse/errors.hpp"
#include "fairpse/pse.hpp"
#include "fairpse/rng.hpp"
#include "fairpse/sim.hpp"
#include "test_helpers.hpp"

using namespace fairpse;
using namespace testkit;

TEST_CASE("toy nuisance coefficients reproduce the rational tables") {
  NuisanceSet nuis = toy_nuisances();
  Dataset d;
  d.add_column("x", {0, 1, 0, 1});
  d.add_column("s", {0, 0, 1, 1});
  d.add_column("m", {0, 1, 1, 0});
  d.add_column("l", {0, 0, 1, 1});
  auto pi = predict(nuis.pi, d);
  CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pi[1] == doctest::Approx(0.75).epsilon(1e-12));
  auto fm = predict(*nuis.f_m, d);
  CHECK(fm[0] == doctest::Approx(toy_fm(0, 0)).epsilon(1e-12));
  CHECK(fm[3] == doctest::Approx(toy_fm(1, 1)).epsilon(1e-12));
  auto fl = predict(*nuis.f_l, d);
  for (int i = 0; i < 4; ++i) {
    CHECK(fl[i] == doctest::Approx(toy_fl(int(d.column("s")[i]), int(d.column("m")[i])))
                       .epsilon(1e-12));
  }
}

TEST_CASE("all four estimators equal the enumeration oracle on the exact toy") {
  Dataset data = toy_exact_dataset();
  REQUIRE(data.n_rows() == 256);
  NuisanceSet nuis = toy_nuisances();
  const double truth = toy_theta_rho1_enumerated();

  auto plugin = theta_plugin(data, nuis, Scenario::rho1());
  auto ipw = theta_ipw(data, nuis, Scenario::rho1());
  auto alt = theta_ipw_alt(data, nuis, Scenario::rho1());
  auto aipw = theta_aipw(data, nuis, Scenario::rho1());
  CHECK(plugin.value == doctest::Approx(truth).epsilon(1e-12));
  CHECK(ipw.value == doctest::Approx(truth).epsilon(1e-10));
  CHECK(alt.value == doctest::Approx(truth).epsilon(1e-10));
  CHECK(aipw.value == doctest::Approx(truth).epsilon(1e-10));

  // per-row contributions average to the reported value exactly
  for (const auto* est : {&plugin, &ipw, &alt, &aipw}) {
    double acc = 0.0;
    for (double c : est->contributions) acc += c;
    CHECK(est->value == doctest::Approx(acc / 256.0).epsilon(1e-14));
  }
}

TEST_CASE("rho2 estimators equal the rho2 enumeration oracle on the exact toy") {
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  const double truth = toy_theta_rho2_enumerated();
  CHECK(theta_plugin(data, nuis, Scenario::rho2()).value == doctest::Approx(truth).epsilon(1e-12));
  CHECK(theta_ipw(data, nuis, Scenario::rho2()).value == doctest::Approx(truth).epsilon(1e-10));
  CHECK(theta_ipw_alt(data, nuis, Scenario::rho2()).value == doctest::Approx(truth).epsilon(1e-10));
  CHECK(theta_aipw(data, nuis, Scenario::rho2()).value == doctest::Approx(truth).epsilon(1e-10));
}

TEST_CASE("generic plug-in with the canonical partition matches the rho1/rho2 forms") {
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  CausalPartition p1{{"x"}, "s", "y", 1, {"m"}, {"l", "y"}};
  CausalPartition p2{{"x"}, "s", "y", 1, {"l"}, {"m", "y"}};
  CHECK(theta_plugin(data, nuis, Scenario::generic(p1)).value ==
        doctest::Approx(theta_plugin(data, nuis, Scenario::rho1()).value).epsilon(1e-14));
  CHECK(theta_plugin(data, nuis, Scenario::generic(p2)).value ==
        doctest::Approx(theta_plugin(data, nuis, Scenario::rho2()).value).epsilon(1e-14));
  // the four-estimator suite stays rho1/rho2 only
  CHECK_THROWS_AS(theta_ipw(data, nuis, Scenario::generic(p1)), Error);
  CHECK_THROWS_AS(theta_aipw(data, nuis, Scenario::generic(p1)), Error);
}

TEST_CASE("estimators agree within monte carlo error on sampled toy data") {
  Dataset data = toy_sampled_dataset(1000000, 99);
  NuisanceSet nuis = toy_nuisances();
  const double truth = toy_theta_rho1_enumerated();
  std::vector<ConstraintEstimate> ests{
      theta_plugin(data, nuis, Scenario::rho1()), theta_ipw(data, nuis, Scenario::rho1()),
      theta_ipw_alt(data, nuis, Scenario::rho1()), theta_aipw(data, nuis, Scenario::rho1())};
  for (const auto& a : ests) {
    double se = std::max(standard_error(a), 1e-4);
    CHECK(std::abs(a.value - truth) < 3.0 * se);
  }
  for (std::size_t i = 0; i < ests.size(); ++i) {
    for (std::size_t j = i + 1; j < ests.size(); ++j) {
      double se = std::sqrt(std::pow(standard_error(ests[i]), 2) +
                            std::pow(standard_error(ests[j]), 2));
      CHECK(std::abs(ests[i].value - ests[j].value) < 3.0 * std::max(se, 1e-4));
    }
  }
}

TEST_CASE("estimators hit the misspecification-design constraint with oracle nuisances") {
  DgpSpec dgp;
  dgp.tag = DgpTag::misspec_6_1;
  Dataset data = generate(dgp, 1000000, 606);
  NuisanceSet oracle = oracle_61_nuisances();
  auto plugin = theta_plugin(data, oracle, Scenario::rho1());
  auto ipw = theta_ipw(data, oracle, Scenario::rho1());
  auto alt = theta_ipw_alt(data, oracle, Scenario::rho1());
  CHECK(std::abs(plugin.value - 0.96) < 0.02);
  CHECK(std::abs(ipw.value - 0.96) < 0.03);
  CHECK(std::abs(alt.value - 0.96) < 0.03);
}

TEST_CASE("high-dimensional design: plug-in with oracle nuisances lands on 1.19") {
  DgpSpec dgp;
  dgp.tag = DgpTag::highdim_6_2;
  dgp.p = 100;
  Dataset data = generate(dgp, 1000000, 607);
  NuisanceSet oracle;
  oracle.psi = make_glm(Family::gaussian, {"1", "s", "l", "m", "x1", "x2", "x3", "x4", "x5"},
                        {0, 1, 1, 1, 1, -0.5, 1.0 / 3, -0.25, 0.2});
  oracle.pi = make_glm(Family::binomial, {"1", "x1", "x2", "x3", "x4", "x5"},
                       {0, 1, -0.5, 1.0 / 3, -0.25, 0.2});
  oracle.f_m = make_glm(Family::binomial, {"1", "s", "x1", "x2", "x3", "x4", "x5"},
                        {0, -1, 1, -0.5, 1.0 / 3, -0.25, 0.2});
  oracle.f_l = make_glm(Family::binomial, {"1", "s", "x1", "x2", "x3", "x4", "x5"},
                        {0, 1, -1, 0.5, -1.0 / 3, 0.25, -0.2});
  auto plugin = theta_plugin(data, oracle, Scenario::rho1());
  CHECK(std::abs(plugin.value - 1.19) < 0.03);
}

TEST_CASE("fitted plug-in and aipw estimates agree under correct specification") {
  DgpSpec dgp;
  dgp.tag = DgpTag::misspec_6_1;
  Dataset data = generate(dgp, 20000, 608);
  NuisanceConfig cfg = nuisance_config_for(dgp, MisspecPattern{}, {}, 1);
  NuisanceSet nuis = fit_nuisances(data, cfg);
  auto plugin = theta_plugin(data, nuis, Scenario::rho1());
  auto aipw = theta_aipw(data, nuis, Scenario::rho1());
  double pooled = std::sqrt(std::pow(standard_error(plugin), 2) +
                            std::pow(standard_error(aipw), 2));
  CHECK(std::abs(plugin.value - aipw.value) < 3.0 * pooled);
}

TEST_CASE("plug-in vanishes when s influences nothing") {
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  // no s in psi, none in f_l: the integrand difference cancels
  nuis.psi = make_glm(Family::gaussian, {"1", "m", "l", "x"}, {0.3, 0.6, -0.4, 0.25});
  nuis.f_l = make_glm(Family::binomial, {"1", "m"}, {logit(1.0 / 8.0), logit(3.0 / 8.0) - logit(1.0 / 8.0)});
  CHECK(std::abs(theta_plugin(data, nuis, Scenario::rho1()).value) < 1e-12);
}

TEST_CASE("ipw-alt vanishes when the counterfactual arms coincide") {
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  nuis.psi = make_glm(Family::gaussian, {"1", "m", "l", "x"}, {0.3, 0.6, -0.4, 0.25});
  nuis.f_l = make_glm(Family::binomial, {"1", "m"}, {logit(1.0 / 8.0), logit(3.0 / 8.0) - logit(1.0 / 8.0)});
  CHECK(std::abs(theta_ipw_alt(data, nuis, Scenario::rho1()).value) < 1e-12);
}

TEST_CASE("ipw with balanced flat weights cancels symmetrically") {
  // pi = 1/2, density ratio = 1, constant outcome, balanced s
  Dataset d;
  std::vector<double> x(8, 0.0), s{0, 1, 0, 1, 0, 1, 0, 1}, m(8, 0.0), l(8, 0.0), y(8, 3.0);
  d.add_column("x", x);
  d.add_column("s", s);
  d.add_column("m", m);
  d.add_column("l", l);
  d.add_column("y", y);
  NuisanceSet nuis = toy_nuisances();
  nuis.pi = make_glm(Family::binomial, {"1"}, {0.0});
  nuis.f_m = make_glm(Family::binomial, {"1"}, {0.3});  // no s: ratio = 1
  CHECK(std::abs(theta_ipw(d, nuis, Scenario::rho1()).value) < 1e-12);
}

TEST_CASE("gradient field formulas: flat, ate, nde") {
  // flat: pi = 1/2, ratio = 1 -> d = +-2, sigma2 = 4
  Dataset d;
  d.add_column("x", {0.5, -1.0, 2.0, 0.0});
  d.add_column("s", {1, 0, 1, 0});
  d.add_column("m", {1, 1, 0, 0});
  d.add_column("l", {0, 1, 0, 1});
  NuisanceSet nuis = toy_nuisances();
  nuis.pi = make_glm(Family::binomial, {"1"}, {0.0});
  nuis.f_m = make_glm(Family::binomial, {"1"}, {-0.4});
  GradientField f = gradient_field(d, nuis, Scenario::rho1());
  for (std::size_t i = 0; i < 4; ++i) {
    double expect = d.column("s")[i] == 1.0 ? 2.0 : -2.0;
    CHECK(f.d[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(f.sigma2 == doctest::Approx(4.0).epsilon(1e-12));

  // ate: d(1,x) = 1/expit(x), d(0,x) = -1/(1-expit(x))
  Dataset da;
  da.add_column("x", {-1.5, 0.0, 0.7, 2.0});
  da.add_column("s", {1, 0, 1, 0});
  NuisanceSet na;
  na.psi = make_glm(Family::gaussian, {"1", "x", "s"}, {0.5, 0.2, 0.75});
  na.pi = make_glm(Family::binomial, {"1", "x"}, {0.0, 1.0});
  Scenario ate = Scenario::generic(CausalPartition{{"x"}, "s", "y", 1, {}, {"y"}});
  GradientField fa = gradient_field(da, na, ate);
  for (std::size_t i = 0; i < 4; ++i) {
    double p = expit(da.column("x")[i]);
    double expect = da.column("s")[i] == 1.0 ? 1.0 / p : -1.0 / (1.0 - p);
    CHECK(fa.d[i] == doctest::Approx(expect).epsilon(1e-9));
  }

  // nde: d(s,x,m) = (4s-2) f(m|0,x)/f(m|s,x)
  Dataset dn;
  dn.add_column("x", {-0.3, 0.4, 1.1, -1.2});
  dn.add_column("s", {1, 1, 0, 0});
  dn.add_column("m", {1, 0, 1, 0});
  NuisanceSet nn;
  nn.psi = make_glm(Family::gaussian, {"1", "x", "s", "m"}, {0.5, 0.2, 0.75, 0.5});
  nn.pi = make_glm(Family::binomial, {"1"}, {0.0});
  nn.f_m = make_glm(Family::binomial, {"1", "s", "x"}, {0.0, 1.5, 2.0});
  Scenario nde = Scenario::generic(CausalPartition{{"x"}, "s", "y", 1, {"m"}, {"y"}});
  GradientField fn = gradient_field(dn, nn, nde);
  for (std::size_t i = 0; i < 4; ++i) {
    int s = int(dn.column("s")[i]), m = int(dn.column("m")[i]);
    double x = dn.column("x")[i];
    double f0 = m ? expit(1.5 * 0 + 2 * x) : 1 - expit(1.5 * 0 + 2 * x);
    double fs = m ? expit(1.5 * s + 2 * x) : 1 - expit(1.5 * s + 2 * x);
    CHECK(fn.d[i] == doctest::Approx((4.0 * s - 2.0) * f0 / fs).epsilon(1e-9));
  }
}

TEST_CASE("gradient of the s_y = 0 branch vanishes on the treated arm") {
  // rho = {s->l->y} style partitions put l in m_rho with s_y = 0
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  Scenario sc = Scenario::generic(CausalPartition{{"x"}, "s", "y", 0, {"l"}, {"m", "y"}});
  GradientField f = gradient_field(data, nuis, sc);
  const auto& s = data.column("s");
  const auto& m = data.column("m");
  const auto& l = data.column("l");
  const auto& x = data.column("x");
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    if (s[i] == 1.0) {
      CHECK(f.d[i] == 0.0);
    } else {
      double fl1 = l[i] ? toy_fl(1, int(m[i])) : 1 - toy_fl(1, int(m[i]));
      double fl0 = l[i] ? toy_fl(0, int(m[i])) : 1 - toy_fl(0, int(m[i]));
      double pi0 = 1.0 - toy_pi(int(x[i]));
      CHECK(f.d[i] == doctest::Approx((fl1 / fl0 - 1.0) / pi0).epsilon(1e-9));
    }
  }
}

TEST_CASE("gradient mean check: closed form and oracle zero") {
  // pi = 1/2, ratio = 1, unbalanced s: mean is exactly (2 #s1/n - 1) * 2
  Dataset d;
  d.add_column("x", std::vector<double>(10, 0.0));
  d.add_column("s", {1, 1, 1, 0, 0, 0, 0, 0, 0, 0});
  d.add_column("m", std::vector<double>(10, 1.0));
  d.add_column("l", std::vector<double>(10, 0.0));
  NuisanceSet nuis = toy_nuisances();
  nuis.pi = make_glm(Family::binomial, {"1"}, {0.0});
  nuis.f_m = make_glm(Family::binomial, {"1"}, {0.2});
  GradientField f = gradient_field(d, nuis, Scenario::rho1());
  CHECK(gradient_mean_check(f, d) == doctest::Approx((2.0 * 0.3 - 1.0) * 2.0).epsilon(1e-12));

  // oracle nuisances on sampled toy: population mean of D is zero
  Dataset big = toy_sampled_dataset(1000000, 7);
  NuisanceSet oracle = toy_nuisances();
  GradientField fb = gradient_field(big, oracle, Scenario::rho1());
  double mean = gradient_mean_check(fb, big);
  double sd = sd_of(fb.d);
  CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(1e6));
}

TEST_CASE("aipw equals plug-in plus a mean-zero augmentation on the exact toy") {
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  auto plugin = theta_plugin(data, nuis, Scenario::rho1());
  auto aipw = theta_aipw(data, nuis, Scenario::rho1());
  CHECK(std::abs(aipw.value - plugin.value) < 1e-12);  // augmentation sums to zero exactly
}

TEST_CASE("sigma2 is row-order invariant and deterministic") {
  Dataset data = toy_sampled_dataset(5000, 13);
  NuisanceSet nuis = toy_nuisances();
  GradientField f1 = gradient_field(data, nuis, Scenario::rho1());
  // rebuild with rows reversed
  Dataset rev;
  for (const auto& name : data.column_names()) {
    auto col = data.column(name);
    std::reverse(col.begin(), col.end());
    rev.add_column(name, col);
  }
  GradientField f2 = gradient_field(rev, nuis, Scenario::rho1());
  CHECK(f1.sigma2 == doctest::Approx(f2.sigma2).epsilon(1e-12));
  GradientField f3 = gradient_field(data, nuis, Scenario::rho1());
  CHECK(f1.sigma2 == f3.sigma2);
}

TEST_CASE("s_y = 0 generic plug-in matches its enumeration oracle") {
  // rho = {s->l->y}: l takes the S=1 assignment while y stays at S=0
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  Scenario sc = Scenario::generic(CausalPartition{{"x"}, "s", "y", 0, {"l"}, {"m", "y"}});
  double truth = 0.0;
  for (int x = 0; x < 2; ++x) {
    double acc = 0.0;
    for (int m = 0; m < 2; ++m) {
      double fm0 = m ? toy_fm(0, x) : 1 - toy_fm(0, x);
      for (int l = 0; l < 2; ++l) {
        double fl1 = l ? toy_fl(1, m) : 1 - toy_fl(1, m);
        double fl0 = l ? toy_fl(0, m) : 1 - toy_fl(0, m);
        acc += (fl1 - fl0) * toy_psi(0, m, l, x) * fm0;
      }
    }
    truth += 0.5 * acc;
  }
  CHECK(theta_plugin(data, nuis, sc).value == doctest::Approx(truth).epsilon(1e-12));
}

TEST_CASE("empty rho is fully degenerate") {
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  Scenario sc = Scenario::generic(CausalPartition{{"x"}, "s", "y", 0, {}, {"m", "l", "y"}});
  CHECK(theta_plugin(data, nuis, sc).value == 0.0);
  GradientField f = gradient_field(data, nuis, sc);
  CHECK(f.sigma2 == 0.0);
}

TEST_CASE("unsupported scenarios are rejected cleanly") {
  Dataset data = toy_exact_dataset();
  NuisanceSet nuis = toy_nuisances();
  // partition variable that has no binary column in the layout
  Scenario bad = Scenario::generic(CausalPartition{{"x"}, "s", "y", 1, {"w"}, {"y"}});
  CHECK_THROWS_AS(theta_plugin(data, nuis, bad), Error);
}
