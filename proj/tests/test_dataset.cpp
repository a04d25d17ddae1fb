#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "fairpse/dataset.hpp"
#include "fairpse/errors.hpp"
#include "fairpse/rng.hpp"

using namespace fairpse;

namespace {

std::string temp_path(const char* name) {
  return std::string("./") + name;
}

}  // namespace

TEST_CASE("csv round-trip is bit exact") {
  CounterRng rng(42);
  Dataset d;
  std::vector<double> a(100), b(100);
  for (std::size_t i = 0; i < 100; ++i) {
    a[i] = rng.normal(0.0, 1e3);
    b[i] = rng.uniform(-1e-9, 1e-9);
  }
  d.add_column("a", a);
  d.add_column("b", b);
  auto path = temp_path("roundtrip.csv");
  d.write_csv(path);
  Dataset back = Dataset::read_csv(path);
  REQUIRE(back.n_rows() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(back.column("a")[i] == a[i]);
    CHECK(back.column("b")[i] == b[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("binary validation flags the offending row") {
  Dataset d;
  d.add_column("s", {0, 1, 0.5, 1});
  CHECK_THROWS_AS(d.require_binary("s"), Error);
  try {
    d.require_binary("s");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("unknown column and duplicate column errors") {
  Dataset d;
  d.add_column("x", {1, 2});
  CHECK_THROWS_AS(d.column("nope"), Error);
  CHECK_THROWS_AS(d.add_column("x", {3, 4}), Error);
  CHECK_THROWS_AS(d.add_column("y", {1, 2, 3}), Error);
}

TEST_CASE("malformed csv rejected") {
  auto path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n3,oops\n";
  }
  CHECK_THROWS_AS(Dataset::read_csv(path), Error);
  std::remove(path.c_str());
}

TEST_CASE("non-finite values rejected at load") {
  auto path = temp_path("inf.csv");
  {
    std::ofstream out(path);
    out << "a\n1\ninf\n";
  }
  CHECK_THROWS_AS(Dataset::read_csv(path), Error);
  std::remove(path.c_str());
}

TEST_CASE("x_columns finds numbered covariates") {
  Dataset d;
  d.add_column("x1", {1.0});
  d.add_column("x2", {2.0});
  d.add_column("s", {1.0});
  auto xcols = d.x_columns();
  REQUIRE(xcols.size() == 2);
  CHECK(xcols[0] == "x1");
  CHECK(xcols[1] == "x2");
}
