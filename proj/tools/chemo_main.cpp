// Command-line front end for the chemotherapy scheduling toolkit: roll out
// dose policies, solve the optimal-control plan, train the two RL agents,
// evaluate policies, and run the robustness / sample-efficiency experiments,
// emitting plot-ready CSV and JSON artifacts.
//
// Contract shared by every command:
//   * all numbers come from one JSON config; flags override config keys;
//   * artifacts land in --out together with exactly one manifest.json naming
//     every file produced (wall time goes to stdout, never into artifacts, so
//     reruns with identical config+seed overwrite with identical bytes);
//   * exit codes distinguish the failure class (see ExitCode below).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chemo/agents.hpp"
#include "chemo/config.hpp"
#include "chemo/csv.hpp"
#include "chemo/dynamics.hpp"
#include "chemo/env.hpp"
#include "chemo/experiments.hpp"
#include "chemo/nlp.hpp"
#include "chemo/ocp.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,    // unreadable/invalid config file or flag values
  kInfeasible = 3,     // the dose plan does not exist (or was not found)
  kDiverged = 4,       // training blew up; partial artifacts are kept
  kMissingPrereq = 5,  // a required input artifact is absent or corrupt
};

/// Failure with a chosen exit code; the message goes to stderr.
struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string fmt_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return buf;
}

std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CliError(kMissingPrereq,
                   "missing prerequisite: cannot open " + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError(kConfigError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw CliError(kConfigError, "write failed for '" + path.string() + "'");
}

/// Flags common to every command, resolved against the loaded config.
struct Context {
  std::string config_path = CHEMO_DEFAULT_CONFIG;
  std::string out_dir;    // empty -> chemo_out/<command>
  std::string case_name;  // empty -> keep the config value
  std::uint64_t seed = 0;
  chemo::RunConfig cfg;   // after resolve(): flag overrides already applied
};

void add_common_flags(CLI::App* sub, Context& ctx) {
  sub->add_option("--config", ctx.config_path, "JSON configuration file")
      ->capture_default_str();
  sub->add_option("--out", ctx.out_dir,
                  "output directory (default: chemo_out/<command>)");
  sub->add_option("--case", ctx.case_name,
                  "scenario: 'case0' (no health constraints) or 'patient'")
      ->check(CLI::IsMember({"case0", "patient"}));
  sub->add_option("--seed", ctx.seed,
                  "seed for training / Monte Carlo; recorded in the manifest");
}

/// Loads the config and folds the common flags into it.
void resolve(Context& ctx, const std::string& command) {
  try {
    ctx.cfg = chemo::load_config(ctx.config_path);
  } catch (const std::exception& e) {
    throw CliError(kConfigError, e.what());
  }
  if (!ctx.case_name.empty()) ctx.cfg.env.case_name = ctx.case_name;
  if (ctx.out_dir.empty()) ctx.out_dir = (fs::path("chemo_out") / command).string();
  fs::create_directories(ctx.out_dir);
}

int resolve_workers(const chemo::ExperimentsConfig& ex) {
  const char* env = std::getenv("CHEMO_WORKERS");
  if (env == nullptr || *env == '\0') return ex.workers;
  char* end = nullptr;
  const long w = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || w < 1)
    throw CliError(kConfigError, std::string("CHEMO_WORKERS must be a positive "
                                             "integer, got '") + env + "'");
  return static_cast<int>(w);
}

/// The single manifest: command, version, seed, scenario, produced files, and
/// the fully resolved config (so the run is reproducible from the manifest
/// alone). Keys are sorted and doubles round-trip, hence byte-stable.
void write_manifest(const Context& ctx, const std::string& command,
                    const std::vector<std::string>& files) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["seed"] = ctx.seed;
  m["case"] = ctx.cfg.env.case_name;
  m["files"] = files;
  m["config"] = json::parse(chemo::config_to_json(ctx.cfg));
  write_file(fs::path(ctx.out_dir) / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Dose-source selection shared by `simulate` and `evaluate`.

struct PolicySource {
  double dose = 0.0;
  CLI::Option* dose_opt = nullptr;
  std::string solution;
  std::string checkpoint;
};

void add_policy_flags(CLI::App* sub, PolicySource& src) {
  src.dose_opt = sub->add_option("--dose", src.dose,
                                 "constant dose rate (drug units per day)");
  sub->add_option("--solution", src.solution,
                  "open-loop plan: solution JSON produced by solve-ocp");
  sub->add_option("--checkpoint", src.checkpoint,
                  "feedback policy: agent checkpoint JSON produced by train");
}

struct PolicyChoice {
  std::string name;  // "constant", "oc", or the checkpoint's algorithm
  std::unique_ptr<chemo::Policy> policy;
};

// hold_days: the step length the caller will hold each dose for; a planned
// schedule is resampled by its mean over that window so the rollout
// administers the planned drug mass (point samples alias switching plans).
PolicyChoice load_policy(const PolicySource& src, double u_max,
                         double hold_days) {
  const int n_sources = (src.dose_opt->count() > 0) + !src.solution.empty() +
                        !src.checkpoint.empty();
  if (n_sources != 1)
    throw CliError(kConfigError,
                   "exactly one dose source is required: --dose, --solution, "
                   "or --checkpoint");
  if (src.dose_opt->count() > 0) {
    if (!std::isfinite(src.dose) || src.dose < 0.0)
      throw CliError(kConfigError, "--dose must be finite and >= 0");
    return {"constant", std::make_unique<chemo::ConstantPolicy>(src.dose)};
  }
  if (!src.solution.empty()) {
    const std::string text = read_file(src.solution, "solution file");
    try {
      const chemo::OcSolution sol = chemo::ocsolution_from_json(text);
      return {"oc", chemo::make_openloop_policy(sol, u_max, hold_days)};
    } catch (const std::exception& e) {
      throw CliError(kMissingPrereq, "corrupt solution file '" + src.solution +
                                         "': " + e.what());
    }
  }
  try {
    chemo::LoadedPolicy lp = chemo::load_checkpoint(src.checkpoint);
    return {lp.algo, std::move(lp.policy)};
  } catch (const std::exception& e) {
    throw CliError(kMissingPrereq, "cannot load checkpoint '" + src.checkpoint +
                                       "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Patient overrides shared by several commands.

void override_r1(chemo::RunConfig& cfg, double r1) {
  if (!std::isfinite(r1) || r1 < 0.0)
    throw CliError(kConfigError, "--r1 must be finite and >= 0");
  cfg.patient.r1 = r1;
}

void override_t0(chemo::RunConfig& cfg, double t0) {
  if (!std::isfinite(t0) || t0 < 0.0)
    throw CliError(kConfigError, "--t0 must be finite and >= 0");
  cfg.patient.x0.T = t0;
}

chemo::SimOptions sim_options(const chemo::EnvConfig& env) {
  chemo::SimOptions opt;
  opt.dt_days = env.dt_days;
  opt.horizon_days = env.max_steps * env.dt_days;
  opt.rk4_substeps = env.rk4_substeps;
  opt.em_substeps = env.em_substeps;
  opt.u_max = env.u_max;
  opt.cure_threshold = env.cure_threshold;
  return opt;
}

chemo::OcProblem ocp_problem(const chemo::RunConfig& cfg) {
  chemo::OcProblem prob;
  prob.params = cfg.patient;
  prob.case_name = cfg.env.case_name;
  prob.u_max = cfg.env.u_max;
  prob.health_floor_n = cfg.env.health_floor_n;
  prob.health_floor_i = cfg.env.health_floor_i;
  return prob;
}

std::string fd(double v) { return chemo::format_double(v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chemo: dose scheduling on a tumor-immune-drug model via "
               "optimal control and reinforcement learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  int exit_code = kOk;
  Context ctx;

  // ---- simulate: roll a policy forward, write the trajectory --------------
  auto* sim = app.add_subcommand(
      "simulate", "Roll out a dose policy and write the trajectory CSV");
  add_common_flags(sim, ctx);
  PolicySource sim_src;
  add_policy_flags(sim, sim_src);
  double sim_horizon = 0.0, sim_r1 = 0.0, sim_t0 = 0.0;
  auto* sim_horizon_opt =
      sim->add_option("--horizon", sim_horizon, "simulated days (default: env horizon)");
  auto* sim_r1_opt = sim->add_option("--r1", sim_r1, "override the tumor growth rate");
  auto* sim_t0_opt = sim->add_option("--t0", sim_t0, "override the initial tumor burden");
  sim->callback([&] {
    Timer timer;
    resolve(ctx, "simulate");
    if (sim_r1_opt->count()) override_r1(ctx.cfg, sim_r1);
    if (sim_t0_opt->count()) override_t0(ctx.cfg, sim_t0);
    const PolicyChoice pc = load_policy(sim_src, ctx.cfg.env.u_max, ctx.cfg.env.dt_days);
    chemo::SimOptions opt = sim_options(ctx.cfg.env);
    if (sim_horizon_opt->count()) {
      if (!std::isfinite(sim_horizon) || sim_horizon <= 0.0)
        throw CliError(kConfigError, "--horizon must be finite and > 0");
      opt.horizon_days = sim_horizon;
    }
    const chemo::Trajectory traj =
        chemo::simulate(*pc.policy, ctx.cfg.patient, ctx.cfg.patient.x0, opt);
    chemo::write_trajectory_csv(traj, (fs::path(ctx.out_dir) / "trajectory.csv").string());
    write_manifest(ctx, "simulate", {"trajectory.csv"});
    std::cout << "simulate case=" << ctx.cfg.env.case_name << " policy=" << pc.name
              << " cured=" << (traj.cured() ? "true" : "false");
    if (traj.cured()) std::cout << " cure_day=" << fd(traj.cure_time);
    std::cout << " final_T=" << fd(traj.final_T())
              << " out=" << ctx.out_dir
              << " wall_time_s=" << fmt_seconds(timer.seconds()) << "\n";
  });

  // ---- solve-ocp: plan the dose schedule by direct collocation ------------
  auto* ocp = app.add_subcommand(
      "solve-ocp", "Solve the minimum-tumor-burden dose plan");
  add_common_flags(ocp, ctx);
  double ocp_r1 = 0.0;
  int ocp_nodes = 0;
  auto* ocp_r1_opt = ocp->add_option("--r1", ocp_r1, "override the tumor growth rate");
  auto* ocp_nodes_opt =
      ocp->add_option("--nodes", ocp_nodes, "override the collocation node count");
  ocp->callback([&] {
    Timer timer;
    resolve(ctx, "solve-ocp");
    if (ocp_r1_opt->count()) override_r1(ctx.cfg, ocp_r1);
    if (ocp_nodes_opt->count()) {
      if (ocp_nodes < 2)
        throw CliError(kConfigError, "--nodes must be at least 2");
      ctx.cfg.ocp.nodes = ocp_nodes;
    }
    const chemo::OcSolution sol = chemo::solve_ocp(ocp_problem(ctx.cfg), ctx.cfg.ocp);
    write_file(fs::path(ctx.out_dir) / "solution.json", chemo::ocsolution_to_json(sol));
    chemo::write_trajectory_csv(chemo::to_trajectory(sol),
                                (fs::path(ctx.out_dir) / "trajectory.csv").string());
    write_manifest(ctx, "solve-ocp", {"solution.json", "trajectory.csv"});
    std::cout << "solve-ocp case=" << ctx.cfg.env.case_name
              << " status=" << chemo::to_string(sol.status)
              << " tf=" << fd(sol.tf) << " objective=" << fd(sol.objective)
              << " max_defect=" << fd(sol.max_defect)
              << " mesh_rounds=" << sol.mesh_rounds
              << " out=" << ctx.out_dir
              << " wall_time_s=" << fmt_seconds(timer.seconds()) << "\n";
    if (sol.status != chemo::SolveStatus::optimal) {
      std::cerr << "solve-ocp: no feasible plan (" << sol.message << ")\n";
      exit_code = kInfeasible;
    }
  });

  // ---- train: fit an agent, write checkpoint + curves ---------------------
  auto* trn = app.add_subcommand("train", "Train a dose-scheduling agent");
  add_common_flags(trn, ctx);
  std::string trn_algo;
  int trn_episodes = 0, trn_nodes = 0, trn_eval_every = -1;
  trn->add_option("--algo", trn_algo, "agent type")
      ->required()
      ->check(CLI::IsMember({"dqn", "ddpg"}));
  auto* trn_episodes_opt = trn->add_option(
      "--episodes", trn_episodes, "training episodes (default: config value)");
  auto* trn_nodes_opt = trn->add_option(
      "--nodes", trn_nodes, "dose-grid size for the discrete-action agent");
  auto* trn_eval_opt = trn->add_option(
      "--eval-every", trn_eval_every, "greedy evaluation cadence in episodes");
  trn->callback([&] {
    Timer timer;
    resolve(ctx, "train");
    if (trn_episodes_opt->count()) ctx.cfg.experiments.train_episodes = trn_episodes;
    if (ctx.cfg.experiments.train_episodes < 1)
      throw CliError(kConfigError, "--episodes must be at least 1");
    if (trn_nodes_opt->count()) {
      if (trn_nodes < 2) throw CliError(kConfigError, "--nodes must be at least 2");
      ctx.cfg.dqn.action_nodes = trn_nodes;
    }
    if (trn_eval_opt->count()) {
      if (trn_eval_every < 0)
        throw CliError(kConfigError, "--eval-every must be >= 0 (0 disables)");
      ctx.cfg.experiments.eval_every = trn_eval_every;
    }
    chemo::TrainOptions topt;
    topt.episodes = ctx.cfg.experiments.train_episodes;
    topt.seed = ctx.seed;
    topt.eval_every = ctx.cfg.experiments.eval_every;
    const chemo::TrainResult res =
        trn_algo == "dqn"
            ? chemo::train_dqn(ctx.cfg.env, ctx.cfg.patient, ctx.cfg.dqn, topt)
            : chemo::train_ddpg(ctx.cfg.env, ctx.cfg.patient, ctx.cfg.ddpg, topt);
    chemo::save_checkpoint(res, ctx.cfg.env,
                           (fs::path(ctx.out_dir) / "checkpoint.json").string());
    chemo::write_learning_curve_csv(
        res, (fs::path(ctx.out_dir) / "learning_curve.csv").string());
    chemo::write_eval_points_csv(
        res, (fs::path(ctx.out_dir) / "eval_points.csv").string());
    write_manifest(ctx, "train",
                   {"checkpoint.json", "learning_curve.csv", "eval_points.csv"});
    std::cout << "train algo=" << res.algo << " case=" << ctx.cfg.env.case_name
              << " episodes=" << res.episodes_trained
              << " diverged=" << (res.diverged ? "true" : "false");
    if (!res.evals.empty())
      std::cout << " last_eval_cost=" << fd(res.evals.back().cost)
                << " last_eval_cured=" << (res.evals.back().cured ? "true" : "false");
    std::cout << " out=" << ctx.out_dir
              << " wall_time_s=" << fmt_seconds(timer.seconds()) << "\n";
    if (res.diverged) {
      std::cerr << "train: diverged (" << res.note << "); partial curve kept\n";
      exit_code = kDiverged;
    }
  });

  // ---- evaluate: score one policy on one episode ---------------------------
  auto* evl = app.add_subcommand(
      "evaluate", "Run one deterministic episode and report cost/cure metrics");
  add_common_flags(evl, ctx);
  PolicySource evl_src;
  add_policy_flags(evl, evl_src);
  double evl_r1 = 0.0, evl_t0 = 0.0;
  auto* evl_r1_opt = evl->add_option("--r1", evl_r1, "override the tumor growth rate");
  auto* evl_t0_opt = evl->add_option("--t0", evl_t0, "override the initial tumor burden");
  evl->callback([&] {
    Timer timer;
    resolve(ctx, "evaluate");
    if (evl_r1_opt->count()) override_r1(ctx.cfg, evl_r1);
    if (evl_t0_opt->count()) override_t0(ctx.cfg, evl_t0);
    const PolicyChoice pc = load_policy(evl_src, ctx.cfg.env.u_max, ctx.cfg.env.dt_days);
    const chemo::EvalReport rep =
        chemo::evaluate(*pc.policy, ctx.cfg.env, ctx.cfg.patient, ctx.cfg.patient.x0);
    json j;
    j["policy"] = pc.name;
    j["cost"] = rep.cost;
    j["cured"] = rep.cured;
    if (rep.cured) j["days_to_cure"] = rep.days_to_cure;
    j["min_n"] = rep.min_n;
    j["min_i"] = rep.min_i;
    j["min_t"] = rep.min_t;
    j["violation_days_n"] = rep.violation_days_n;
    j["violation_days_i"] = rep.violation_days_i;
    j["steps"] = rep.steps;
    write_file(fs::path(ctx.out_dir) / "evaluation.json", j.dump(2) + "\n");
    write_manifest(ctx, "evaluate", {"evaluation.json"});
    std::cout << "evaluate policy=" << pc.name << " case=" << ctx.cfg.env.case_name
              << " cost=" << fd(rep.cost)
              << " cured=" << (rep.cured ? "true" : "false");
    if (rep.cured) std::cout << " days=" << fd(rep.days_to_cure);
    std::cout << " out=" << ctx.out_dir
              << " wall_time_s=" << fmt_seconds(timer.seconds()) << "\n";
  });

  // ---- experiment: the comparison studies ----------------------------------
  auto* exp = app.add_subcommand(
      "experiment", "Run a comparison study: r1 | t0 | mc | sampling");
  add_common_flags(exp, ctx);
  std::string exp_which;
  exp->add_option("which", exp_which, "study to run")
      ->required()
      ->check(CLI::IsMember({"r1", "t0", "mc", "sampling"}));
  std::string exp_solution, exp_dqn, exp_ddpg;
  exp->add_option("--solution", exp_solution,
                  "open-loop plan JSON from solve-ocp (r1/t0/mc studies)");
  exp->add_option("--dqn", exp_dqn, "discrete-agent checkpoint (r1/t0/mc studies)");
  exp->add_option("--ddpg", exp_ddpg, "continuous-agent checkpoint (r1/t0/mc studies)");
  double exp_g = 0.0;
  int exp_runs = 0, exp_episodes = 0, exp_eval_every = -1;
  auto* exp_g_opt = exp->add_option("--g", exp_g, "noise intensity (mc study)");
  auto* exp_runs_opt = exp->add_option("--runs", exp_runs, "ensemble size (mc study)");
  auto* exp_episodes_opt = exp->add_option(
      "--episodes", exp_episodes, "training episodes per entry (sampling study)");
  auto* exp_eval_opt = exp->add_option(
      "--eval-every", exp_eval_every, "evaluation cadence (sampling study)");
  exp->callback([&] {
    Timer timer;
    resolve(ctx, std::string("experiment-") + exp_which);
    const int workers = resolve_workers(ctx.cfg.experiments);

    if (exp_which == "sampling") {
      if (exp_episodes_opt->count()) ctx.cfg.experiments.train_episodes = exp_episodes;
      if (ctx.cfg.experiments.train_episodes < 1)
        throw CliError(kConfigError, "--episodes must be at least 1");
      if (exp_eval_opt->count()) {
        if (exp_eval_every < 0)
          throw CliError(kConfigError, "--eval-every must be >= 0 (0 disables)");
        ctx.cfg.experiments.eval_every = exp_eval_every;
      }
      chemo::TrainOptions topt;
      topt.episodes = ctx.cfg.experiments.train_episodes;
      topt.seed = ctx.seed;
      topt.eval_every = ctx.cfg.experiments.eval_every;
      const auto entries = chemo::sampling_entries(ctx.cfg.experiments);
      const auto curves = chemo::sampling_study(ctx.cfg.env, ctx.cfg.patient,
                                                ctx.cfg.dqn, ctx.cfg.ddpg,
                                                entries, topt);
      std::vector<std::string> files;
      bool any_diverged = false;
      for (const auto& c : curves) {
        const std::string name = "curve_" + c.entry.label + ".csv";
        chemo::write_eval_points_csv(c.train, (fs::path(ctx.out_dir) / name).string());
        files.push_back(name);
        any_diverged = any_diverged || c.train.diverged;
      }
      write_manifest(ctx, "experiment-sampling", files);
      std::cout << "experiment which=sampling entries=" << curves.size()
                << " episodes=" << topt.episodes << " out=" << ctx.out_dir
                << " wall_time_s=" << fmt_seconds(timer.seconds()) << "\n";
      if (any_diverged) {
        std::cerr << "experiment: at least one training diverged; curves kept\n";
        exit_code = kDiverged;
      }
      return;
    }

    // The three policy-comparison studies need all three nominal policies.
    const auto require_path = [](const std::string& path, const std::string& flag,
                                 const std::string& producer) {
      if (path.empty())
        throw CliError(kMissingPrereq, "missing prerequisite: pass " + flag +
                                           " <file> (produce it with `chemo " +
                                           producer + "`)");
    };
    require_path(exp_solution, "--solution", "solve-ocp");
    require_path(exp_dqn, "--dqn", "train --algo dqn");
    require_path(exp_ddpg, "--ddpg", "train --algo ddpg");
    const std::string sol_text = read_file(exp_solution, "solution file");
    std::unique_ptr<chemo::Policy> oc_policy;
    try {
      const chemo::OcSolution sol = chemo::ocsolution_from_json(sol_text);
      oc_policy = chemo::make_openloop_policy(sol, ctx.cfg.env.u_max,
                                              ctx.cfg.env.dt_days);
    } catch (const std::exception& e) {
      throw CliError(kMissingPrereq,
                     "corrupt solution file '" + exp_solution + "': " + e.what());
    }
    const auto load_agent = [](const std::string& path, const std::string& want) {
      try {
        chemo::LoadedPolicy lp = chemo::load_checkpoint(path);
        if (lp.algo != want)
          throw std::runtime_error("checkpoint holds a " + lp.algo +
                                   " agent, expected " + want);
        return std::move(lp.policy);
      } catch (const std::exception& e) {
        throw CliError(kMissingPrereq,
                       "cannot load checkpoint '" + path + "': " + e.what());
      }
    };
    const std::unique_ptr<chemo::Policy> dqn_policy = load_agent(exp_dqn, "dqn");
    const std::unique_ptr<chemo::Policy> ddpg_policy = load_agent(exp_ddpg, "ddpg");
    const chemo::PolicySet policies{{"oc", oc_policy.get()},
                                    {"dqn", dqn_policy.get()},
                                    {"ddpg", ddpg_policy.get()}};

    if (exp_which == "r1" || exp_which == "t0") {
      const bool is_r1 = exp_which == "r1";
      const chemo::SweepResult sweep =
          is_r1 ? chemo::r1_policy_robustness(policies, ctx.cfg.env, ctx.cfg.patient,
                                              ctx.cfg.experiments.r1_grid, workers)
                : chemo::t0_robustness(policies, ctx.cfg.env, ctx.cfg.patient,
                                       ctx.cfg.experiments.t0_grid, workers);
      const std::string name = exp_which + "_sweep.csv";
      chemo::write_sweep_csv(sweep, (fs::path(ctx.out_dir) / name).string());
      write_manifest(ctx, "experiment-" + exp_which, {name});
      int cured = 0;
      for (const auto& e : sweep.entries) cured += e.report.cured;
      std::cout << "experiment which=" << exp_which
                << " entries=" << sweep.entries.size() << " cured=" << cured
                << " out=" << ctx.out_dir
                << " wall_time_s=" << fmt_seconds(timer.seconds()) << "\n";
      return;
    }

    // exp_which == "mc"
    if (exp_g_opt->count()) {
      if (!std::isfinite(exp_g) || exp_g < 0.0)
        throw CliError(kConfigError, "--g must be finite and >= 0");
      ctx.cfg.experiments.mc_g = exp_g;
    }
    if (exp_runs_opt->count()) {
      if (exp_runs < 2) throw CliError(kConfigError, "--runs must be at least 2");
      ctx.cfg.experiments.mc_runs = exp_runs;
    }
    const chemo::MCSummary mc = chemo::stochastic_mc(
        policies, ctx.cfg.env, ctx.cfg.patient, ctx.cfg.experiments.mc_g,
        ctx.cfg.experiments.mc_runs, ctx.seed,
        ctx.cfg.experiments.mc_horizon_days, workers);
    std::vector<std::string> files{"mc_summary.csv"};
    chemo::write_mc_summary_csv(mc, (fs::path(ctx.out_dir) / files[0]).string());
    for (const auto& m : mc.methods) {
      const std::string name = "mc_runs_" + m.method + ".csv";
      chemo::write_mc_runs_csv(m, mc.t, (fs::path(ctx.out_dir) / name).string());
      files.push_back(name);
    }
    write_manifest(ctx, "experiment-mc", files);
    std::cout << "experiment which=mc g=" << fd(mc.g) << " runs=" << mc.n_runs;
    for (const auto& m : mc.methods)
      std::cout << " mean_final_T_" << m.method << "=" << fd(m.mean_final_t);
    std::cout << " out=" << ctx.out_dir
              << " wall_time_s=" << fmt_seconds(timer.seconds()) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);  // prints help/version or the parse error
    return rc == 0 ? kOk : kConfigError;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return exit_code;
}
