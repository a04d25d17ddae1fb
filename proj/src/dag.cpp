#include "fairpse/dag.hpp"

#include <algorithm>
#include <deque>
#include <nlohmann/json.hpp>
#include <set>

#include "fairpse/errors.hpp"

namespace fairpse {

namespace {

NodeRole role_from_string(const std::string& s) {
  if (s == "sensitive") return NodeRole::sensitive;
  if (s == "covariate") return NodeRole::covariate;
  if (s == "mediator") return NodeRole::mediator;
  if (s == "outcome") return NodeRole::outcome;
  throw Error(ErrorCode::parse, "unknown node role: " + s);
}

}  // namespace

Dag::Dag(std::vector<DagNode> nodes, std::vector<std::pair<std::string, std::string>> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  parents_.resize(nodes_.size());
  children_.resize(nodes_.size());
  for (const auto& [a, b] : edges_) {
    int ia = node_index(a), ib = node_index(b);
    if (ia >= 0 && ib >= 0) {
      resolved_edges_.emplace_back(ia, ib);
      parents_[ib].push_back(ia);
      children_[ia].push_back(ib);
    }
  }
}

Dag Dag::from_json(const nlohmann::json& j) {
  std::vector<DagNode> nodes;
  for (const auto& n : j.at("nodes")) {
    nodes.push_back({n.at("name").get<std::string>(),
                     role_from_string(n.at("role").get<std::string>())});
  }
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : j.at("edges")) {
    edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  }
  return Dag(std::move(nodes), std::move(edges));
}

PathSet PathSet::from_json(const nlohmann::json& j) {
  PathSet p;
  if (!j.is_array()) throw Error(ErrorCode::parse, "rho must be an array of edges");
  for (const auto& e : j) {
    p.rho.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  }
  return p;
}

bool PathSet::contains(const std::string& from, const std::string& to) const {
  for (const auto& [a, b] : rho) {
    if (a == from && b == to) return true;
  }
  return false;
}

int Dag::node_index(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

bool Dag::has_edge(int from, int to) const {
  for (int c : children_[from]) {
    if (c == to) return true;
  }
  return false;
}

int Dag::sensitive_index() const {
  int found = -1;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].role == NodeRole::sensitive) {
      if (found >= 0) return -1;
      found = static_cast<int>(i);
    }
  }
  return found;
}

int Dag::outcome_index() const {
  int found = -1;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].role == NodeRole::outcome) {
      if (found >= 0) return -1;
      found = static_cast<int>(i);
    }
  }
  return found;
}

std::vector<bool> Dag::descendants(int v) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<int> work{v};
  while (!work.empty()) {
    int u = work.front();
    work.pop_front();
    for (int c : children_[u]) {
      if (!seen[c]) {
        seen[c] = true;
        work.push_back(c);
      }
    }
  }
  return seen;
}

std::vector<bool> Dag::ancestors(int v) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<int> work{v};
  while (!work.empty()) {
    int u = work.front();
    work.pop_front();
    for (int p : parents_[u]) {
      if (!seen[p]) {
        seen[p] = true;
        work.push_back(p);
      }
    }
  }
  return seen;
}

bool Dag::topological_order(std::vector<int>& order) const {
  std::vector<int> indeg(nodes_.size(), 0);
  for (const auto& [a, b] : resolved_edges_) {
    (void)a;
    ++indeg[b];
  }
  std::deque<int> queue;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (indeg[i] == 0) queue.push_back(static_cast<int>(i));
  }
  order.clear();
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    order.push_back(u);
    for (int c : children_[u]) {
      if (--indeg[c] == 0) queue.push_back(c);
    }
  }
  return order.size() == nodes_.size();
}

ValidationReport validate_dag(const Dag& dag) {
  ValidationReport rep;
  const auto& nodes = dag.nodes();

  std::set<std::string> seen;
  for (const auto& n : nodes) {
    if (!seen.insert(n.name).second) {
      rep.issues.push_back({"duplicate_node", "node declared twice: " + n.name});
    }
  }

  int n_sens = 0, n_out = 0;
  for (const auto& n : nodes) {
    n_sens += n.role == NodeRole::sensitive;
    n_out += n.role == NodeRole::outcome;
  }
  if (n_sens == 0) rep.issues.push_back({"missing_sensitive", "no node tagged sensitive"});
  if (n_sens > 1) rep.issues.push_back({"multiple_sensitive", "more than one sensitive node"});
  if (n_out == 0) rep.issues.push_back({"missing_outcome", "no node tagged outcome"});
  if (n_out > 1) rep.issues.push_back({"multiple_outcome", "more than one outcome node"});

  std::set<std::pair<std::string, std::string>> edge_set;
  for (const auto& [a, b] : dag.edges()) {
    if (dag.node_index(a) < 0 || dag.node_index(b) < 0) {
      rep.issues.push_back({"dangling_edge", "edge references undeclared node: " + a + " -> " + b});
    }
    if (a == b) rep.issues.push_back({"self_loop", "self loop on " + a});
    if (!edge_set.insert({a, b}).second) {
      rep.issues.push_back({"duplicate_edge", "edge declared twice: " + a + " -> " + b});
    }
  }

  std::vector<int> order;
  if (!dag.topological_order(order)) {
    rep.issues.push_back({"cycle", "graph contains a directed cycle"});
  }

  // role/topology cross-checks only make sense on a structurally sound graph
  if (rep.ok()) {
    int s = dag.sensitive_index(), y = dag.outcome_index();
    auto desc_s = dag.descendants(s);
    auto anc_y = dag.ancestors(y);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      int v = static_cast<int>(i);
      if (v == s || v == y) continue;
      bool on_path = desc_s[i] && anc_y[i];
      if (nodes[i].role == NodeRole::covariate && on_path) {
        rep.issues.push_back(
            {"covariate_on_path",
             "declared covariate " + nodes[i].name + " lies on a causal path from S to Y"});
      }
      if (nodes[i].role == NodeRole::mediator && !on_path) {
        rep.issues.push_back(
            {"mediator_off_path",
             "declared mediator " + nodes[i].name + " is on no causal path from S to Y"});
      }
    }
  }
  return rep;
}

namespace {

struct VersionFlags {
  bool rho = false;
  bool sprime = false;
};

// shared machinery for check_identifiability and partition
struct Expansion {
  int s = -1, y = -1;
  std::vector<VersionFlags> need;
  std::vector<bool> reaches_s;  // all-rho directed path from S
  std::vector<int> topo;
  std::vector<bool> on_path;  // proper causal path S -> ... -> Y
};

Expansion expand(const Dag& dag, const PathSet& rho) {
  auto rep = validate_dag(dag);
  if (!rep.ok()) {
    throw Error(ErrorCode::bad_spec, "invalid dag: " + rep.issues.front().message);
  }
  Expansion ex;
  ex.s = dag.sensitive_index();
  ex.y = dag.outcome_index();
  const int n = static_cast<int>(dag.nodes().size());

  // every rho edge must exist and lie on some S -> ... -> Y path
  auto desc_s = dag.descendants(ex.s);
  auto anc_y = dag.ancestors(ex.y);
  for (const auto& [a, b] : rho.rho) {
    int ia = dag.node_index(a), ib = dag.node_index(b);
    if (ia < 0 || ib < 0 || !dag.has_edge(ia, ib)) {
      throw Error(ErrorCode::invalid_path_set, "rho edge not in graph: " + a + " -> " + b);
    }
    bool tail_ok = (ia == ex.s) || desc_s[ia];
    bool head_ok = (ib == ex.y) || anc_y[ib];
    if (!tail_ok || !head_ok) {
      throw Error(ErrorCode::invalid_path_set,
                  "rho edge off all causal paths from S to Y: " + a + " -> " + b);
    }
  }

  ex.on_path.assign(n, false);
  for (int v = 0; v < n; ++v) {
    ex.on_path[v] = desc_s[v] && (v == ex.y || anc_y[v]);
  }

  dag.topological_order(ex.topo);

  auto in_rho = [&](int from, int to) {
    return rho.contains(dag.nodes()[from].name, dag.nodes()[to].name);
  };

  // rho-version of V demands rho-versions of rho-parents and s'-versions of
  // all other parents; the s'-version demands s'-versions of all parents
  ex.need.assign(n, {});
  ex.need[ex.y].rho = true;
  std::deque<std::pair<int, bool>> work{{ex.y, true}};  // (node, is_rho)
  while (!work.empty()) {
    auto [v, is_rho] = work.front();
    work.pop_front();
    for (int p : dag.parents(v)) {
      if (p == ex.s) continue;  // S is intervened on, it has no versions
      bool want_rho = is_rho && in_rho(p, v);
      VersionFlags& f = ex.need[p];
      bool& flag = want_rho ? f.rho : f.sprime;
      if (!flag) {
        flag = true;
        work.emplace_back(p, want_rho);
      }
    }
  }

  // reaches_s in topological order: an all-rho chain from S
  ex.reaches_s.assign(n, false);
  for (int v : ex.topo) {
    if (v == ex.s) continue;
    for (int p : dag.parents(v)) {
      if (!in_rho(p, v)) continue;
      if (p == ex.s || ex.reaches_s[p]) {
        ex.reaches_s[v] = true;
        break;
      }
    }
  }
  return ex;
}

}  // namespace

IdentifiabilityResult check_identifiability(const Dag& dag, const PathSet& rho) {
  Expansion ex = expand(dag, rho);
  IdentifiabilityResult res;
  for (int v : ex.topo) {
    if (v == ex.s) continue;
    const auto& f = ex.need[v];
    if (!f.rho && !f.sprime) continue;
    res.requirements.push_back(
        {dag.nodes()[v].name, f.rho, f.sprime, ex.reaches_s[v]});
    if (res.identified && v != ex.y && f.rho && f.sprime && ex.reaches_s[v]) {
      res.identified = false;
      res.witness = dag.nodes()[v].name;
    }
  }
  return res;
}

CausalPartition partition(const Dag& dag, const PathSet& rho) {
  IdentifiabilityResult id = check_identifiability(dag, rho);
  if (!id.identified) {
    throw Error(ErrorCode::not_identified, "recanting witness: " + id.witness);
  }
  Expansion ex = expand(dag, rho);

  CausalPartition part;
  part.sensitive = dag.nodes()[ex.s].name;
  part.outcome = dag.nodes()[ex.y].name;
  part.s_y = rho.contains(part.sensitive, part.outcome) ? 1 : 0;

  auto in_rho = [&](int from, int to) {
    return rho.contains(dag.nodes()[from].name, dag.nodes()[to].name);
  };

  for (int v : ex.topo) {
    if (v == ex.s) continue;
    const std::string& name = dag.nodes()[v].name;
    if (v == ex.y) continue;  // appended to l_rho below
    if (!ex.on_path[v]) {
      part.x_vars.push_back(name);
      continue;
    }
    // the S-assignment the node's own structural equation receives: 1 only
    // when its rho-version is demanded and its direct S edge is in rho.
    // Nodes without a direct S parent have an S-free conditional; they sit
    // on the outcome's side of the split by convention.
    bool has_s_parent = dag.has_edge(ex.s, v);
    int assignment = has_s_parent ? ((ex.need[v].rho && in_rho(ex.s, v)) ? 1 : 0)
                                  : part.s_y;
    if (assignment != part.s_y) {
      part.m_rho.push_back(name);
    } else {
      part.l_rho.push_back(name);
    }
  }
  part.l_rho.push_back(part.outcome);
  return part;
}

}  // namespace fairpse
