#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <utility>
#include <vector>

namespace fairpse {

enum class NodeRole { sensitive, covariate, mediator, outcome };

struct DagNode {
  std::string name;
  NodeRole role;
};

// Directed graph over named nodes. Construction never rejects; structural
// problems are surfaced by validate_dag so a CLI can report all of them.
// Immutable after construction.
class Dag {
 public:
  Dag(std::vector<DagNode> nodes, std::vector<std::pair<std::string, std::string>> edges);

  static Dag from_json(const nlohmann::json& j);

  const std::vector<DagNode>& nodes() const { return nodes_; }
  const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }

  int node_index(const std::string& name) const;  // -1 when absent
  bool has_edge(int from, int to) const;
  const std::vector<int>& parents(int v) const { return parents_[v]; }
  const std::vector<int>& children(int v) const { return children_[v]; }

  int sensitive_index() const;  // -1 unless exactly one sensitive node
  int outcome_index() const;

  // nodes reachable from v by directed edges (v excluded)
  std::vector<bool> descendants(int v) const;
  std::vector<bool> ancestors(int v) const;
  bool topological_order(std::vector<int>& order) const;  // false on a cycle

 private:
  std::vector<DagNode> nodes_;
  std::vector<std::pair<std::string, std::string>> edges_;  // as declared
  std::vector<std::pair<int, int>> resolved_edges_;         // both endpoints declared
  std::vector<std::vector<int>> parents_, children_;
};

// Unfair pathway set as a set of directed edges; a causal path S->...->Y is
// in rho iff all of its edges are marked.
struct PathSet {
  std::vector<std::pair<std::string, std::string>> rho;

  static PathSet from_json(const nlohmann::json& j);
  bool contains(const std::string& from, const std::string& to) const;
};

struct ValidationIssue {
  std::string code;     // "cycle", "missing_sensitive", ...
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

ValidationReport validate_dag(const Dag& dag);

// Counterfactual versions of a node demanded by the recursive expansion of
// the outcome counterfactual: the rho-version takes rho-parents in their
// rho-versions and everything else at the reference assignment; the
// s'-version is the plain reference-world counterfactual.
struct VersionRequirement {
  std::string node;
  bool needs_rho_version = false;
  bool needs_sprime_version = false;
  // true iff a directed path from S made entirely of rho edges reaches the
  // node, i.e. the two versions structurally differ
  bool rho_version_reaches_s = false;
};

struct IdentifiabilityResult {
  bool identified = true;
  std::string witness;  // first recanting witness in topological order
  std::vector<VersionRequirement> requirements;
};

// Derived decomposition (X, S, M_rho, L_rho, s_y) that the estimation
// formulas consume. Node lists are in topological order; l_rho contains Y.
struct CausalPartition {
  std::vector<std::string> x_vars;
  std::string sensitive;
  std::string outcome;
  int s_y = 1;
  std::vector<std::string> m_rho;
  std::vector<std::string> l_rho;
};

// Identifiability check: propagates version requirements from Y
// and flags a recanting witness when both versions of a node are required
// and structurally differ. Throws invalid_path_set when rho has an edge off
// every S->Y path, bad_spec when the dag itself is invalid.
IdentifiabilityResult check_identifiability(const Dag& dag, const PathSet& rho);

// Throws not_identified when a recanting witness exists.
CausalPartition partition(const Dag& dag, const PathSet& rho);

}  // namespace fairpse
