#include <doctest.h>

#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <string>

#include "fairpse/dag.hpp"
#include "fairpse/errors.hpp"
#include "fairpse/rng.hpp"

using namespace fairpse;

namespace {

Dag fig1c() {
  return Dag({{"x", NodeRole::covariate},
              {"s", NodeRole::sensitive},
              {"m", NodeRole::mediator},
              {"l", NodeRole::mediator},
              {"y", NodeRole::outcome}},
             {{"x", "s"}, {"x", "m"}, {"x", "l"}, {"x", "y"}, {"s", "m"},
              {"s", "l"}, {"s", "y"}, {"m", "l"}, {"m", "y"}, {"l", "y"}});
}

PathSet rho1() { return PathSet{{{"s", "y"}, {"s", "l"}, {"l", "y"}}}; }
PathSet rho2() { return PathSet{{{"s", "y"}, {"s", "m"}, {"m", "y"}, {"m", "l"}, {"l", "y"}}}; }

// ---- brute-force oracle: symbolic expansion of the counterfactual
// recursion; a node is a recanting witness iff both of its versions are
// demanded and their fully expanded structural forms differ -----------------

struct OracleGraph {
  int n = 0;
  std::vector<std::vector<int>> parents;
  int s = -1, y = -1;
  std::set<std::pair<int, int>> rho;
};

struct OracleState {
  const OracleGraph& g;
  std::map<std::pair<int, bool>, std::string> memo;

  std::string sig(int v, bool rho_kind) {
    auto key = std::make_pair(v, rho_kind);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::string out = "f" + std::to_string(v) + "(";
    for (int p : g.parents[v]) {
      if (p == g.s) {
        bool takes_s = rho_kind && g.rho.count({g.s, v}) > 0;
        out += takes_s ? "S=1;" : "S=0;";
      } else {
        out += sig(p, rho_kind && g.rho.count({p, v}) > 0) + ";";
      }
    }
    out += ")";
    memo[key] = out;
    return out;
  }
};

struct OracleResult {
  bool identified = true;
  std::set<int> witnesses;
};

OracleResult oracle_check(const OracleGraph& g) {
  // collect which versions each node is demanded in, walking from Y
  std::set<std::pair<int, bool>> need{{g.y, true}};
  std::vector<std::pair<int, bool>> work{{g.y, true}};
  while (!work.empty()) {
    auto [v, rho_kind] = work.back();
    work.pop_back();
    for (int p : g.parents[v]) {
      if (p == g.s) continue;
      bool kind = rho_kind && g.rho.count({p, v}) > 0;
      if (need.insert({p, kind}).second) work.emplace_back(p, kind);
    }
  }
  OracleState st{g, {}};
  OracleResult res;
  for (int v = 0; v < g.n; ++v) {
    if (v == g.y || v == g.s) continue;
    if (need.count({v, true}) && need.count({v, false}) &&
        st.sig(v, true) != st.sig(v, false)) {
      res.identified = false;
      res.witnesses.insert(v);
    }
  }
  return res;
}

}  // namespace

TEST_CASE("fig 1(c) validates cleanly") {
  CHECK(validate_dag(fig1c()).ok());
}

TEST_CASE("cycle, missing outcome, dangling edge are reported") {
  Dag cyc({{"x", NodeRole::covariate},
           {"s", NodeRole::sensitive},
           {"m", NodeRole::mediator},
           {"l", NodeRole::mediator},
           {"y", NodeRole::outcome}},
          {{"x", "s"}, {"x", "m"}, {"x", "l"}, {"x", "y"}, {"s", "m"}, {"s", "l"},
           {"s", "y"}, {"m", "l"}, {"m", "y"}, {"l", "y"}, {"y", "s"}});
  auto rep = validate_dag(cyc);
  REQUIRE_FALSE(rep.ok());
  bool has_cycle = false;
  for (const auto& i : rep.issues) has_cycle |= i.code == "cycle";
  CHECK(has_cycle);

  Dag no_outcome({{"s", NodeRole::sensitive}, {"x", NodeRole::covariate}}, {{"x", "s"}});
  rep = validate_dag(no_outcome);
  bool missing = false;
  for (const auto& i : rep.issues) missing |= i.code == "missing_outcome";
  CHECK(missing);

  Dag dangling({{"s", NodeRole::sensitive}, {"y", NodeRole::outcome}},
               {{"s", "y"}, {"s", "ghost"}});
  rep = validate_dag(dangling);
  bool dang = false;
  for (const auto& i : rep.issues) dang |= i.code == "dangling_edge";
  CHECK(dang);
}

TEST_CASE("covariate on a causal path is an error, not a reclassification") {
  Dag bad({{"s", NodeRole::sensitive},
           {"a", NodeRole::covariate},
           {"y", NodeRole::outcome}},
          {{"s", "a"}, {"a", "y"}, {"s", "y"}});
  auto rep = validate_dag(bad);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.issues.front().code == "covariate_on_path");
}

TEST_CASE("the single-pathway rho through m has a recanting witness") {
  PathSet rho{{{"s", "m"}, {"m", "y"}}};  // s->m->y but not s->m->l->y
  auto id = check_identifiability(fig1c(), rho);
  REQUIRE_FALSE(id.identified);
  CHECK(id.witness == "m");
}

TEST_CASE("rho1 and rho2 are identified with the expected partitions") {
  auto id1 = check_identifiability(fig1c(), rho1());
  CHECK(id1.identified);
  CausalPartition p1 = partition(fig1c(), rho1());
  CHECK(p1.s_y == 1);
  CHECK(p1.m_rho == std::vector<std::string>{"m"});
  CHECK(p1.l_rho == std::vector<std::string>{"l", "y"});
  CHECK(p1.x_vars == std::vector<std::string>{"x"});

  auto id2 = check_identifiability(fig1c(), rho2());
  CHECK(id2.identified);
  CausalPartition p2 = partition(fig1c(), rho2());
  CHECK(p2.s_y == 1);
  CHECK(p2.m_rho == std::vector<std::string>{"l"});
  CHECK(p2.l_rho == std::vector<std::string>{"m", "y"});
}

TEST_CASE("empty rho is identified and the ate graph has no mediators") {
  CHECK(check_identifiability(fig1c(), PathSet{}).identified);

  Dag ate({{"x", NodeRole::covariate}, {"s", NodeRole::sensitive}, {"y", NodeRole::outcome}},
          {{"x", "s"}, {"x", "y"}, {"s", "y"}});
  CausalPartition p = partition(ate, PathSet{{{"s", "y"}}});
  CHECK(p.s_y == 1);
  CHECK(p.m_rho.empty());
  CHECK(p.l_rho == std::vector<std::string>{"y"});
  CHECK(p.x_vars == std::vector<std::string>{"x"});
}

TEST_CASE("rho off the causal paths is rejected") {
  Dag g({{"x", NodeRole::covariate}, {"s", NodeRole::sensitive}, {"y", NodeRole::outcome}},
        {{"x", "s"}, {"x", "y"}, {"s", "y"}});
  CHECK_THROWS_AS(check_identifiability(g, PathSet{{{"x", "y"}}}), Error);
  CHECK_THROWS_AS(check_identifiability(g, PathSet{{{"s", "x"}}}), Error);
}

TEST_CASE("partition throws when not identified") {
  PathSet rho{{{"s", "m"}, {"m", "y"}}};
  CHECK_THROWS_AS(partition(fig1c(), rho), Error);
}

TEST_CASE("graph json round trip") {
  nlohmann::json j = nlohmann::json::parse(R"({
    "nodes": [
      {"name": "x", "role": "covariate"},
      {"name": "s", "role": "sensitive"},
      {"name": "y", "role": "outcome"}
    ],
    "edges": [["x", "s"], ["x", "y"], ["s", "y"]],
    "rho": [["s", "y"]]
  })");
  Dag g = Dag::from_json(j);
  CHECK(validate_dag(g).ok());
  PathSet rho = PathSet::from_json(j.at("rho"));
  CHECK(check_identifiability(g, rho).identified);
}

namespace {

struct RandomCase {
  Dag dag;
  PathSet rho;
  OracleGraph oracle;
};

// random dags over a fixed topological order: node 0 = S, last node = Y,
// everything else labelled by whether it sits on a causal path
RandomCase random_case(CounterRng& rng) {
  const int n = 3 + static_cast<int>(rng.next_u64() % 4);  // 3..6 nodes
  std::vector<std::vector<int>> parents(n);
  std::vector<std::pair<int, int>> edges;
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      if (rng.uniform() < 0.55) {
        parents[j].push_back(i);
        edges.emplace_back(i, j);
      }
    }
  }
  const int s = 0, y = n - 1;
  // reachability
  auto reach = [&](int from, int to) {
    std::vector<char> seen(n, 0);
    std::vector<int> work{from};
    seen[from] = 1;
    while (!work.empty()) {
      int u = work.back();
      work.pop_back();
      if (u == to) return true;
      for (const auto& [a, b] : edges) {
        if (a == u && !seen[b]) {
          seen[b] = 1;
          work.push_back(b);
        }
      }
    }
    return false;
  };

  std::vector<DagNode> nodes(n);
  std::vector<std::string> names(n);
  for (int v = 0; v < n; ++v) names[v] = "n" + std::to_string(v);
  nodes[s] = {names[s], NodeRole::sensitive};
  nodes[y] = {names[y], NodeRole::outcome};
  for (int v = 1; v < n - 1; ++v) {
    bool on_path = reach(s, v) && reach(v, y);
    nodes[v] = {names[v], on_path ? NodeRole::mediator : NodeRole::covariate};
  }

  OracleGraph og;
  og.n = n;
  og.parents = parents;
  og.s = s;
  og.y = y;

  std::vector<std::pair<std::string, std::string>> edge_names;
  for (const auto& [a, b] : edges) edge_names.emplace_back(names[a], names[b]);

  PathSet rho;
  for (const auto& [a, b] : edges) {
    bool causal = (a == s || reach(s, a)) && (b == y || reach(b, y));
    if (causal && rng.uniform() < 0.45) {
      rho.rho.emplace_back(names[a], names[b]);
      og.rho.insert({a, b});
    }
  }
  return RandomCase{Dag(std::move(nodes), std::move(edge_names)), std::move(rho), std::move(og)};
}

}  // namespace

TEST_CASE("identifiability matches the symbolic expansion oracle") {
  CounterRng rng(2024);
  int checked = 0, unidentified = 0;
  for (int trial = 0; trial < 500; ++trial) {
    RandomCase rc = random_case(rng);
    if (!validate_dag(rc.dag).ok()) continue;
    IdentifiabilityResult got = check_identifiability(rc.dag, rc.rho);
    OracleResult want = oracle_check(rc.oracle);
    CHECK(got.identified == want.identified);
    if (!want.identified) {
      ++unidentified;
      int widx = rc.dag.node_index(got.witness);
      CHECK(want.witnesses.count(widx) == 1);
    }
    ++checked;
  }
  // the sweep must actually exercise both outcomes
  CHECK(checked > 300);
  CHECK(unidentified > 20);
}

TEST_CASE("partition is a disjoint cover and marking all causal edges empties m_rho") {
  CounterRng rng(77);
  int covered = 0, full_rho = 0;
  for (int trial = 0; trial < 400; ++trial) {
    RandomCase rc = random_case(rng);
    if (!validate_dag(rc.dag).ok()) continue;
    if (!check_identifiability(rc.dag, rc.rho).identified) continue;
    CausalPartition p = partition(rc.dag, rc.rho);
    std::set<std::string> all;
    for (const auto& nd : rc.dag.nodes()) all.insert(nd.name);
    std::set<std::string> seen{p.sensitive};
    std::size_t total = 1;
    for (const auto& group : {p.x_vars, p.m_rho, p.l_rho}) {
      for (const auto& name : group) {
        seen.insert(name);
        ++total;
      }
    }
    CHECK(seen == all);
    CHECK(total == all.size());  // pairwise disjoint
    CHECK(std::find(p.l_rho.begin(), p.l_rho.end(), p.outcome) != p.l_rho.end());
    ++covered;

    // total-effect case: every causal edge marked
    PathSet all_edges;
    int s = rc.oracle.s, y = rc.oracle.y;
    auto reach = [&](int from, int to) {
      if (from == to) return true;
      std::vector<char> seen2(rc.oracle.n, 0);
      std::vector<int> work{from};
      while (!work.empty()) {
        int u = work.back();
        work.pop_back();
        if (u == to) return true;
        for (int v = 0; v < rc.oracle.n; ++v) {
          for (int pa : rc.oracle.parents[v]) {
            if (pa == u && !seen2[v]) {
              seen2[v] = 1;
              work.push_back(v);
            }
          }
        }
      }
      return false;
    };
    for (int v = 0; v < rc.oracle.n; ++v) {
      for (int pa : rc.oracle.parents[v]) {
        bool causal = (pa == s || reach(s, pa)) && (v == y || reach(v, y));
        if (causal) {
          all_edges.rho.emplace_back(rc.dag.nodes()[pa].name, rc.dag.nodes()[v].name);
        }
      }
    }
    // with the direct edge present, marking everything is the total effect
    bool has_direct = false;
    for (int pa : rc.oracle.parents[y]) has_direct |= pa == s;
    if (has_direct && check_identifiability(rc.dag, all_edges).identified) {
      CausalPartition pt = partition(rc.dag, all_edges);
      CHECK(pt.m_rho.empty());
      ++full_rho;
    }
  }
  CHECK(covered > 150);
  CHECK(full_rho > 100);
}
