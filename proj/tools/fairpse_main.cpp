#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "fairpse/adjust.hpp"
#include "fairpse/dag.hpp"
#include "fairpse/dataset.hpp"
#include "fairpse/errors.hpp"
#include "fairpse/nuisance.hpp"
#include "fairpse/pse.hpp"
#include "fairpse/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fairpse;

namespace {

// exit codes: 0 ok, 1 constraint not identified / too many failed cells,
// 2 parse or graph validation, 3 data or schema, 4 fit non-convergence,
// 5 degenerate variance
int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::parse:
    case ErrorCode::invalid_path_set:
    case ErrorCode::not_identified:
      return 2;
    case ErrorCode::not_converged:
      return 4;
    case ErrorCode::degenerate_variance:
      return 5;
    default:
      return 3;
  }
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::data, "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::parse, path + ": " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::data, "cannot write " + path);
  out << text;
}

struct GraphInput {
  Dag dag;
  PathSet rho;
};

GraphInput load_graph(const std::string& path) {
  json j = load_json(path);
  try {
    Dag dag = Dag::from_json(j);
    PathSet rho = j.contains("rho") ? PathSet::from_json(j.at("rho")) : PathSet{};
    return GraphInput{std::move(dag), std::move(rho)};
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::parse, path + ": " + e.what());
  }
}

json partition_json(const CausalPartition& p) {
  return json{{"x_vars", p.x_vars}, {"sensitive", p.sensitive}, {"outcome", p.outcome},
              {"s_y", p.s_y},       {"m_rho", p.m_rho},         {"l_rho", p.l_rho}};
}

FeatureSpec spec_from_json_or(const json& cfg, const char* key, std::vector<std::string> fallback) {
  if (cfg.contains("features") && cfg.at("features").contains(key)) {
    return FeatureSpec::from_terms(cfg.at("features").at(key).get<std::vector<std::string>>());
  }
  return FeatureSpec::from_terms(std::move(fallback));
}

std::vector<std::string> default_x_terms(const Dataset& data) {
  return data.x_columns();
}

int cmd_check_id(const std::string& graph_path) {
  GraphInput g = load_graph(graph_path);
  auto report = validate_dag(g.dag);
  if (!report.ok()) {
    for (const auto& issue : report.issues) {
      std::cerr << "invalid graph [" << issue.code << "]: " << issue.message << "\n";
    }
    return 2;
  }
  IdentifiabilityResult id = check_identifiability(g.dag, g.rho);
  if (!id.identified) {
    std::cout << "RecantingWitness(" << id.witness << ")\n";
    return 1;
  }
  CausalPartition part = partition(g.dag, g.rho);
  std::cout << "Identified\n";
  std::cout << partition_json(part).dump(2) << "\n";
  return 0;
}

// dataset columns must cover the graph's sensitive/mediator/outcome nodes;
// covariate nodes may stand for a group of x columns
void check_columns(const Dataset& data, const Dag& dag) {
  for (const auto& node : dag.nodes()) {
    if (node.role == NodeRole::covariate) continue;
    if (!data.has_column(node.name)) {
      throw Error(ErrorCode::data, "graph node '" + node.name + "' has no dataset column");
    }
  }
}

struct FitOptions {
  std::string method = "plugin";
  std::string risk = "mse";
  double bound = 0.0;
  std::uint64_t seed = 1;
  double clip_eps = kDefaultClipEps;
  int lambda_grid = 2001;
  double lambda_tol = 1e-6;
  bool allow_nonconverged = false;
};

int cmd_fit_adjust(const std::string& data_path, const std::string& graph_path,
                   const std::string& config_path, const std::string& out_dir,
                   FitOptions opt, const std::vector<std::string>& explicit_flags) {
  Dataset data = Dataset::read_csv(data_path);
  GraphInput g = load_graph(graph_path);
  auto report = validate_dag(g.dag);
  if (!report.ok()) {
    for (const auto& issue : report.issues) {
      std::cerr << "invalid graph [" << issue.code << "]: " << issue.message << "\n";
    }
    return 2;
  }
  check_columns(data, g.dag);
  CausalPartition part = partition(g.dag, g.rho);  // throws when not identified
  Scenario scenario = Scenario::from_partition(part);

  json cfg = config_path.empty() ? json::object() : load_json(config_path);
  auto flag_given = [&](const std::string& name) {
    return std::find(explicit_flags.begin(), explicit_flags.end(), name) != explicit_flags.end();
  };
  // precedence: explicit flags > config file > defaults
  if (!flag_given("--method") && cfg.contains("method")) opt.method = cfg["method"].get<std::string>();
  if (!flag_given("--risk") && cfg.contains("risk")) opt.risk = cfg["risk"].get<std::string>();
  if (!flag_given("--bound") && cfg.contains("bound")) opt.bound = cfg["bound"].get<double>();
  if (!flag_given("--seed") && cfg.contains("seed")) opt.seed = cfg["seed"].get<std::uint64_t>();
  if (!flag_given("--clip-eps") && cfg.contains("clip_eps")) opt.clip_eps = cfg["clip_eps"].get<double>();
  if (!flag_given("--lambda-grid") && cfg.contains("lambda_grid")) opt.lambda_grid = cfg["lambda_grid"].get<int>();
  if (cfg.contains("lambda_tol")) opt.lambda_tol = cfg["lambda_tol"].get<double>();

  NuisanceConfig ncfg;
  auto x_terms = default_x_terms(data);
  auto base = [&](std::vector<std::string> head) {
    head.insert(head.end(), x_terms.begin(), x_terms.end());
    return head;
  };
  bool has_m = data.has_column("m"), has_l = data.has_column("l");
  std::vector<std::string> psi_head{"1", "s"};
  if (has_m) psi_head.push_back("m");
  if (has_l) psi_head.push_back("l");
  ncfg.psi_spec = spec_from_json_or(cfg, "psi", base(psi_head));
  ncfg.pi_spec = spec_from_json_or(cfg, "pi", base({"1"}));
  if (has_m) ncfg.fm_spec = spec_from_json_or(cfg, "f_m", base({"1", "s"}));
  if (has_l) ncfg.fl_spec = spec_from_json_or(cfg, "f_l", base({"1", "s", "m"}));
  ncfg.psi_family = cfg.value("psi_family", std::string("gaussian")) == "binomial"
                        ? Family::binomial
                        : Family::gaussian;
  if (opt.risk != "mse") ncfg.psi_family = Family::binomial;
  if (cfg.contains("l1")) {
    const auto& l1 = cfg.at("l1");
    ncfg.l1_psi = l1.value("psi", 0.0);
    ncfg.l1_pi = l1.value("pi", 0.0);
    ncfg.l1_fm = l1.value("f_m", 0.0);
    ncfg.l1_fl = l1.value("f_l", 0.0);
  }
  if (cfg.contains("cv_grid")) ncfg.cv_grid = cfg.at("cv_grid").get<std::vector<double>>();
  ncfg.cv_folds = cfg.value("cv_folds", 10);
  ncfg.cv_seed = opt.seed;
  ncfg.max_iter = cfg.value("max_iter", 100);
  ncfg.tol = cfg.value("tol", 1e-8);
  ncfg.clip_eps = opt.clip_eps;

  NuisanceSet nuis = fit_nuisances(data, ncfg);
  if (!nuis.all_converged()) {
    std::cerr << "warning: at least one nuisance fit did not converge\n";
    if (!opt.allow_nonconverged) {
      throw Error(ErrorCode::not_converged,
                  "nuisance fit did not converge (pass --allow-nonconverged to proceed)");
    }
  }

  PseEngine engine(data, nuis, scenario);
  GradientField field = engine.gradient();
  ThetaMethod method = method_from_string(opt.method);
  ConstraintEstimate est = engine.theta(method);

  LambdaSearchConfig lcfg;
  lcfg.grid_size = opt.lambda_grid;
  lcfg.tolerance = opt.lambda_tol;

  RiskMode mode = risk_mode_from_string(opt.risk);
  FairPredictor fp;
  switch (mode) {
    case RiskMode::mse_mean_diff:
      fp = solve_mse(data, nuis, scenario, method, opt.bound);
      break;
    case RiskMode::xent_mean_diff:
      fp = solve_lambda_xent(data, nuis, scenario, method, lcfg, opt.bound);
      break;
    case RiskMode::xent_log_odds:
      fp = adjust_log_odds(data, nuis, scenario, lcfg);
      break;
  }
  if (fp.no_sign_change) {
    std::cerr << "warning: lambda search left |Theta| = " << fp.achieved_constraint
              << " above tolerance " << lcfg.tolerance << " (NoSignChange)\n";
  }

  FairPredictions train_preds = predict_fair(fp, data);

  fs::create_directories(out_dir);
  write_text((fs::path(out_dir) / "predictor.json").string(),
             fair_predictor_to_json(fp).dump(2) + "\n");

  json metrics;
  // the constraint-estimate record: {"method","theta","sigma2","n"}
  metrics["estimate"] = json{{"method", method_name(method)},
                             {"theta", est.value},
                             {"sigma2", field.sigma2},
                             {"n", data.n_rows()}};
  metrics["n"] = data.n_rows();
  metrics["scenario"] = scenario_name(scenario.tag);
  metrics["partition"] = partition_json(part);
  metrics["method"] = method_name(method);
  metrics["risk"] = risk_mode_name(mode);
  metrics["theta_n"] = est.value;
  metrics["theta_se"] = standard_error(est);
  metrics["sigma2_n"] = field.sigma2;
  metrics["sigma2_used"] = fp.sigma2_n;
  metrics["lambda_n"] = fp.lambda_n;
  metrics["bound"] = fp.bound;
  metrics["achieved_constraint"] = fp.achieved_constraint;
  metrics["no_sign_change"] = fp.no_sign_change;
  metrics["clamped"] = train_preds.clamped;
  if (mode == RiskMode::mse_mean_diff) metrics["mse_gap"] = mse_gap(est, field);
  if (mode == RiskMode::xent_log_odds) {
    metrics["epsilon_lo"] = fp.epsilon_lo;
    metrics["epsilon_hi"] = fp.epsilon_hi;
  }
  json conv;
  conv["psi"] = nuis.psi.diag.converged;
  conv["pi"] = nuis.pi.diag.converged;
  if (nuis.f_m) conv["f_m"] = nuis.f_m->diag.converged;
  if (nuis.f_l) conv["f_l"] = nuis.f_l->diag.converged;
  metrics["converged"] = conv;
  write_text((fs::path(out_dir) / "metrics.json").string(), metrics.dump(2) + "\n");

  std::cout << "theta_n=" << est.value << " sigma2_n=" << field.sigma2
            << " lambda_n=" << fp.lambda_n << " bound=" << fp.bound << "\n";
  return 0;
}

int cmd_predict(const std::string& predictor_path, const std::string& data_path,
                const std::string& out_path) {
  FairPredictor fp = fair_predictor_from_json(load_json(predictor_path));
  Dataset data = Dataset::read_csv(data_path);
  FairPredictions preds = predict_fair(fp, data);
  std::ofstream out(out_path);
  if (!out) throw Error(ErrorCode::data, "cannot write " + out_path);
  out << "prediction\n";
  char buf[64];
  for (double v : preds.values) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << "\n";
  }
  if (preds.clamped > 0) {
    std::cerr << "warning: " << preds.clamped << " predictions clamped to [0,1]\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& predictor_path, const std::string& data_path,
                 const std::string& graph_path) {
  FairPredictor fp = fair_predictor_from_json(load_json(predictor_path));
  Dataset data = Dataset::read_csv(data_path);
  FairPredictions preds = predict_fair(fp, data);

  json out;
  out["n"] = data.n_rows();
  out["mode"] = risk_mode_name(fp.mode);
  out["clamped"] = preds.clamped;
  if (data.has_column("y")) {
    const auto& y = data.column("y");
    if (fp.mode == RiskMode::mse_mean_diff) {
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        acc += (y[i] - preds.values[i]) * (y[i] - preds.values[i]);
      }
      out["risk"] = acc / static_cast<double>(y.size());
    } else {
      out["risk"] = binomial_deviance(y, preds.values) / (2.0 * static_cast<double>(y.size()));
    }
  }
  // re-evaluate the plug-in constraint of the adjusted rule on this data
  PseEngine engine(data, fp.nuisances, fp.scenario);
  PredRule rule = [&](int s, unsigned cfg, std::size_t i) {
    return fair_value(fp, engine.psi_at(s, cfg, i), engine.d_at(s, cfg, i), s, nullptr);
  };
  out["theta_reeval"] = engine.plugin_constraint_of(rule);
  if (!graph_path.empty()) {
    GraphInput g = load_graph(graph_path);
    out["identified"] = check_identifiability(g.dag, g.rho).identified;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_simulate(const std::string& plan_path, const std::string& out_dir, int threads,
                 bool timing) {
  json j = load_json(plan_path);
  SimPlan plan = SimPlan::from_json(j);
  if (threads > 0) plan.threads = threads;

  auto t0 = std::chrono::steady_clock::now();
  SimResult result = run_plan(plan);
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::size_t ok = 0;
  for (const auto& c : result.cells) {
    ok += c.ok;
    if (!c.ok) {
      std::cerr << "cell failed rep=" << c.rep << " n=" << c.n << " method="
                << method_name(c.method) << " bound=" << c.bound << ": " << c.error << "\n";
    }
  }

  fs::create_directories(out_dir);
  write_result_csv(result, (fs::path(out_dir) / "result.csv").string(), timing);
  write_summary_csv(summarize(result), (fs::path(out_dir) / "summary.csv").string());

  char line[256];
  std::snprintf(line, sizeof(line),
                "oracle %s: theta=%.6f sigma2_d=%.6f risk_psi0=%.6f risk_psistar=%.6f",
                dgp_name(plan.dgp.tag), result.oracle.theta, result.oracle.sigma2_d,
                result.oracle.risk_psi0, result.oracle.risk_psistar);
  std::cout << line << "\n";
  std::cout << "cells=" << result.cells.size() << " ok=" << ok << "\n";
  std::cerr << "wall time: " << elapsed << " s\n";

  double frac = result.cells.empty() ? 0.0
                                     : static_cast<double>(ok) / static_cast<double>(result.cells.size());
  return frac >= 0.95 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fair optimal prediction under path-specific effect constraints"};
  app.require_subcommand(1);

  std::string data_path, graph_path, config_path, plan_path, predictor_path;
  std::string out_dir = "out", out_path = "predictions.csv";
  FitOptions opt;
  int threads = 0;
  bool timing = false;

  auto* check = app.add_subcommand("check-id", "identifiability and partition of a graph + rho");
  check->add_option("--graph", graph_path, "graph JSON")->required();

  auto* fit = app.add_subcommand("fit-adjust", "fit nuisances and build the adjusted predictor");
  fit->add_option("--data", data_path, "dataset CSV")->required();
  fit->add_option("--graph", graph_path, "graph JSON")->required();
  fit->add_option("--config", config_path, "config JSON");
  fit->add_option("--out", out_dir, "output directory");
  fit->add_option("--method", opt.method, "plugin|ipw|ipw-alt|aipw");
  fit->add_option("--risk", opt.risk, "mse|xent|xent-odds");
  fit->add_option("--bound", opt.bound, "inequality bound (0 = equality)");
  fit->add_option("--seed", opt.seed, "seed");
  fit->add_option("--clip-eps", opt.clip_eps, "probability clipping");
  fit->add_option("--lambda-grid", opt.lambda_grid, "lambda grid size");
  fit->add_flag("--allow-nonconverged", opt.allow_nonconverged, "proceed on non-convergence");

  auto* pred = app.add_subcommand("predict", "apply a serialized predictor to a CSV");
  pred->add_option("--predictor", predictor_path, "predictor JSON")->required();
  pred->add_option("--data", data_path, "dataset CSV")->required();
  pred->add_option("--out", out_path, "output CSV");

  auto* eval = app.add_subcommand("evaluate", "score a serialized predictor on labeled data");
  eval->add_option("--predictor", predictor_path, "predictor JSON")->required();
  eval->add_option("--data", data_path, "dataset CSV")->required();
  eval->add_option("--graph", graph_path, "graph JSON (optional)");

  auto* sim = app.add_subcommand("simulate", "run a simulation plan");
  sim->add_option("--plan", plan_path, "plan JSON")->required();
  sim->add_option("--out", out_dir, "output directory");
  sim->add_option("--threads", threads, "worker threads (0 = all cores)");
  sim->add_flag("--timing", timing, "write measured per-cell seconds (non-reproducible)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) return cmd_check_id(graph_path);
    if (fit->parsed()) {
      std::vector<std::string> given;
      for (const auto* o : fit->get_options()) {
        if (o->count() > 0) given.push_back(o->get_name());
      }
      return cmd_fit_adjust(data_path, graph_path, config_path, out_dir, opt, given);
    }
    if (pred->parsed()) return cmd_predict(predictor_path, data_path, out_path);
    if (eval->parsed()) return cmd_evaluate(predictor_path, data_path, graph_path);
    if (sim->parsed()) return cmd_simulate(plan_path, out_dir, threads, timing);
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
