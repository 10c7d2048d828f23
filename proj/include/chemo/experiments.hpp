#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chemo/agents.hpp"
#include "chemo/config.hpp"
#include "chemo/dynamics.hpp"
#include "chemo/env.hpp"

namespace chemo {

/// One deterministic environment episode, summarized. The cost is exactly the
/// environment's episode cost (negated reward sum) for the identical rollout.
struct EvalReport {
  double cost = 0.0;
  bool cured = false;
  double days_to_cure = std::numeric_limits<double>::quiet_NaN();  // finite iff cured
  double min_n = std::numeric_limits<double>::infinity();
  double min_i = std::numeric_limits<double>::infinity();
  double min_t = std::numeric_limits<double>::infinity();
  double violation_days_n = 0.0;  // dt-weighted time spent below each floor
  double violation_days_i = 0.0;
  int steps = 0;
};

/// Runs one episode of `policy` from `x0` on a deterministic copy of the
/// environment (stochastic forcing off) and reports cost/cure/constraint
/// metrics.
EvalReport evaluate(const Policy& policy, const EnvConfig& env_cfg,
                    const PatientParams& params, const StateVec& x0);

/// Named policies compared side by side; pointers are borrowed.
using PolicySet = std::vector<std::pair<std::string, const Policy*>>;

struct SweepEntry {
  std::string method;
  double value = 0.0;
  EvalReport report;
};

/// Exhaustive (method x value) grid; entries are ordered value-major so the
/// table reads like the printed figure, and failures stay in as rows.
struct SweepResult {
  std::string parameter;
  std::vector<double> values;
  std::vector<SweepEntry> entries;
};

/// Evaluates the fixed nominal policies on patients whose tumor growth rate
/// was perturbed after planning; nobody is retrained or re-solved.
SweepResult r1_policy_robustness(const PolicySet& policies,
                                 const EnvConfig& env_cfg,
                                 const PatientParams& nominal,
                                 const std::vector<double>& r1_values,
                                 int workers = 1);

/// Same comparison with a perturbed initial tumor burden x0 = (1, T0, 1, 0).
SweepResult t0_robustness(const PolicySet& policies, const EnvConfig& env_cfg,
                          const PatientParams& nominal,
                          const std::vector<double>& t0_values, int workers = 1);

/// Ensemble statistics of the tumor series under stochastic forcing. The
/// mean/std arrays use the sample convention (n-1 denominator), and every
/// per-run series is retained so the summary can be recomputed exactly.
struct McMethodStats {
  std::string method;
  std::vector<std::vector<double>> runs_t;  // [run][time] tumor series
  std::vector<double> mean_t;
  std::vector<double> std_t;
  double mean_final_t = 0.0;
  double std_final_t = 0.0;
  double cured_fraction = 0.0;  // min-over-trajectory threshold rule
};

struct MCSummary {
  std::vector<double> t;  // shared time grid, dt-spaced through the horizon
  std::vector<McMethodStats> methods;
  double g = 0.0;
  int n_runs = 0;
  std::uint64_t base_seed = 0;
};

/// Rolls each policy n_runs times with independent Wiener paths; run i uses
/// the same noise stream for every method, so comparisons are paired. Fixing
/// the base seed and growing n_runs leaves earlier runs unchanged.
MCSummary stochastic_mc(const PolicySet& policies, const EnvConfig& env_cfg,
                        const PatientParams& params, double g, int n_runs,
                        std::uint64_t base_seed, double horizon_days,
                        int workers = 1);

/// One training configuration of the sample-efficiency study.
struct SamplingEntry {
  std::string label;  // e.g. "dqn10", "ddpg"
  std::string algo;   // "dqn" or "ddpg"
  int action_nodes = 0;  // dose-grid size, dqn only
};

/// The grid list from configuration: one entry per DQN dose-grid size plus
/// the continuous-action agent.
std::vector<SamplingEntry> sampling_entries(const ExperimentsConfig& cfg);

struct SamplingCurve {
  SamplingEntry entry;
  TrainResult train;  // evals carry the (episode, cost) learning curve
};

/// Trains every configuration sequentially with periodic greedy evaluations.
std::vector<SamplingCurve> sampling_study(const EnvConfig& env_cfg,
                                          const PatientParams& params,
                                          const DqnConfig& dqn_cfg,
                                          const DdpgConfig& ddpg_cfg,
                                          const std::vector<SamplingEntry>& entries,
                                          const TrainOptions& opt);

/// CSV emitters (exact-double formatting, deterministic row order).
void write_sweep_csv(const SweepResult& sweep, const std::string& path);
void write_mc_summary_csv(const MCSummary& mc, const std::string& path);
void write_mc_runs_csv(const McMethodStats& stats, const std::vector<double>& t,
                       const std::string& path);

}  // namespace chemo
