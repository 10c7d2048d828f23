#include "chemo/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "chemo/csv.hpp"

namespace chemo {

namespace {

/// Stream offset separating Monte-Carlo noise from the training stream ids.
constexpr std::uint64_t kMcStreamBase = 100;

void track_state(EvalReport& rep, const StateVec& x, const EnvConfig& cfg,
                 double dt) {
  rep.min_n = std::min(rep.min_n, x.N);
  rep.min_i = std::min(rep.min_i, x.I);
  rep.min_t = std::min(rep.min_t, x.T);
  if (x.N < cfg.health_floor_n) rep.violation_days_n += dt;
  if (x.I < cfg.health_floor_i) rep.violation_days_i += dt;
}

/// Flat (value-major) sweep over the grid; each entry owns its environment,
/// so entries are independent and may run on any schedule. Results land in
/// pre-assigned slots, keeping the output identical for any worker count.
SweepResult run_sweep(const std::string& parameter, const PolicySet& policies,
                      const EnvConfig& env_cfg, const PatientParams& nominal,
                      const std::vector<double>& values, int workers,
                      bool perturb_r1) {
  if (policies.empty())
    throw std::invalid_argument("sweep: need at least one policy");
  for (const auto& [name, policy] : policies)
    if (policy == nullptr)
      throw std::invalid_argument("sweep: null policy '" + name + "'");

  SweepResult out;
  out.parameter = parameter;
  out.values = values;
  const int m = static_cast<int>(policies.size());
  const int total = static_cast<int>(values.size()) * m;
  out.entries.resize(total);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(std::max(workers, 1))
#endif
  for (int idx = 0; idx < total; ++idx) {
    const int vi = idx / m;
    const int pi = idx % m;
    PatientParams params = nominal;
    StateVec x0 = nominal.x0;
    if (perturb_r1)
      params.r1 = values[vi];
    else
      x0 = StateVec{1.0, values[vi], 1.0, 0.0};
    SweepEntry& e = out.entries[idx];
    e.method = policies[pi].first;
    e.value = values[vi];
    e.report = evaluate(*policies[pi].second, env_cfg, params, x0);
  }
  return out;
}

bool all_equal(const std::vector<double>& v) {
  for (double x : v)
    if (x != v.front()) return false;
  return true;
}

// Constant columns short-circuit so their mean is the value itself and their
// spread is exactly zero for every ensemble size (naive summation hits both
// identities only when the size happens to divide exactly). Zero-noise
// ensembles and the shared initial sample therefore report exact statistics.
double sample_mean(const std::vector<double>& v) {
  if (all_equal(v)) return v.front();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2 || all_equal(v)) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

EvalReport evaluate(const Policy& policy, const EnvConfig& env_cfg,
                    const PatientParams& params, const StateVec& x0) {
  EnvConfig cfg = env_cfg;
  cfg.stochastic = false;  // evaluation is a deterministic rollout
  Environment env(cfg, params);
  Observation obs = env.reset(x0);
  (void)obs;

  EvalReport rep;
  track_state(rep, x0, cfg, 0.0);  // initial state counts for the minima
  std::vector<double> rewards;
  rewards.reserve(cfg.max_steps);
  while (!env.done()) {
    const double u = policy.dose(env.time_days(), env.state());
    const StepResult step = env.step(u / cfg.u_max);
    rewards.push_back(step.reward);
    track_state(rep, step.state, cfg, cfg.dt_days);
    ++rep.steps;
    if (step.status == StepStatus::cured) {
      rep.cured = true;
      rep.days_to_cure = env.time_days();
    }
  }
  rep.cost = episode_cost(rewards);
  return rep;
}

SweepResult r1_policy_robustness(const PolicySet& policies,
                                 const EnvConfig& env_cfg,
                                 const PatientParams& nominal,
                                 const std::vector<double>& r1_values,
                                 int workers) {
  return run_sweep("r1", policies, env_cfg, nominal, r1_values, workers,
                   /*perturb_r1=*/true);
}

SweepResult t0_robustness(const PolicySet& policies, const EnvConfig& env_cfg,
                          const PatientParams& nominal,
                          const std::vector<double>& t0_values, int workers) {
  return run_sweep("t0", policies, env_cfg, nominal, t0_values, workers,
                   /*perturb_r1=*/false);
}

MCSummary stochastic_mc(const PolicySet& policies, const EnvConfig& env_cfg,
                        const PatientParams& params, double g, int n_runs,
                        std::uint64_t base_seed, double horizon_days,
                        int workers) {
  if (n_runs < 2)
    throw std::invalid_argument("monte carlo: need at least 2 runs");
  if (!(g >= 0.0) || !(horizon_days > 0.0))
    throw std::invalid_argument("monte carlo: g must be >= 0 and horizon > 0");
  for (const auto& [name, policy] : policies)
    if (policy == nullptr)
      throw std::invalid_argument("monte carlo: null policy '" + name + "'");

  SimOptions opt;
  opt.dt_days = env_cfg.dt_days;
  opt.horizon_days = horizon_days;
  opt.rk4_substeps = env_cfg.rk4_substeps;
  opt.em_substeps = env_cfg.em_substeps;
  opt.u_max = env_cfg.u_max;
  opt.cure_threshold = env_cfg.cure_threshold;
  opt.stochastic = g > 0.0;  // zero forcing reduces to the deterministic run
  opt.diffusion_g = g;
  opt.seed = base_seed;

  MCSummary out;
  out.g = g;
  out.n_runs = n_runs;
  out.base_seed = base_seed;

  const int samples =
      static_cast<int>(std::floor(horizon_days / opt.dt_days + 1e-9)) + 1;
  out.t.resize(samples);
  for (int i = 0; i < samples; ++i) out.t[i] = i * opt.dt_days;

  out.methods.resize(policies.size());
  for (std::size_t pi = 0; pi < policies.size(); ++pi) {
    McMethodStats& stats = out.methods[pi];
    stats.method = policies[pi].first;
    stats.runs_t.assign(n_runs, std::vector<double>(samples, 0.0));
    std::vector<int> cured(n_runs, 0);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(std::max(workers, 1))
#endif
    for (int run = 0; run < n_runs; ++run) {
      SimOptions run_opt = opt;
      // Run i consumes the same noise stream for every method, so the
      // method comparison is paired; growing n_runs appends new streams.
      run_opt.stream = kMcStreamBase + static_cast<std::uint64_t>(run);
      const Trajectory traj =
          simulate(*policies[pi].second, params, params.x0, run_opt);
      const int have = std::min(samples, static_cast<int>(traj.t.size()));
      for (int i = 0; i < have; ++i) stats.runs_t[run][i] = traj.x[i].T;
      cured[run] = traj.cured() ? 1 : 0;
    }

    stats.mean_t.resize(samples);
    stats.std_t.resize(samples);
    std::vector<double> column(n_runs);
    for (int i = 0; i < samples; ++i) {
      for (int run = 0; run < n_runs; ++run) column[run] = stats.runs_t[run][i];
      stats.mean_t[i] = sample_mean(column);
      stats.std_t[i] = sample_std(column, stats.mean_t[i]);
    }
    stats.mean_final_t = stats.mean_t.back();
    stats.std_final_t = stats.std_t.back();
    int cured_total = 0;
    for (int c : cured) cured_total += c;
    stats.cured_fraction = static_cast<double>(cured_total) / n_runs;
  }
  return out;
}

std::vector<SamplingEntry> sampling_entries(const ExperimentsConfig& cfg) {
  std::vector<SamplingEntry> entries;
  for (int n : cfg.sampling_grids)
    entries.push_back({"dqn" + std::to_string(n), "dqn", n});
  entries.push_back({"ddpg", "ddpg", 0});
  return entries;
}

std::vector<SamplingCurve> sampling_study(const EnvConfig& env_cfg,
                                          const PatientParams& params,
                                          const DqnConfig& dqn_cfg,
                                          const DdpgConfig& ddpg_cfg,
                                          const std::vector<SamplingEntry>& entries,
                                          const TrainOptions& opt) {
  std::vector<SamplingCurve> curves;
  curves.reserve(entries.size());
  for (const SamplingEntry& e : entries) {
    SamplingCurve curve;
    curve.entry = e;
    if (e.algo == "dqn") {
      DqnConfig cfg = dqn_cfg;
      cfg.action_nodes = e.action_nodes;
      curve.train = train_dqn(env_cfg, params, cfg, opt);
    } else if (e.algo == "ddpg") {
      curve.train = train_ddpg(env_cfg, params, ddpg_cfg, opt);
    } else {
      throw std::invalid_argument("sampling study: unknown algorithm '" +
                                  e.algo + "'");
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "parameter,value,method,cost,cured,days_to_cure,min_n,min_i,min_t,"
       "violation_days_n,violation_days_i,steps\n";
  for (const SweepEntry& e : sweep.entries) {
    const EvalReport& r = e.report;
    f << sweep.parameter << ',' << format_double(e.value) << ',' << e.method
      << ',' << format_double(r.cost) << ',' << (r.cured ? 1 : 0) << ','
      << format_double(r.days_to_cure) << ',' << format_double(r.min_n) << ','
      << format_double(r.min_i) << ',' << format_double(r.min_t) << ','
      << format_double(r.violation_days_n) << ','
      << format_double(r.violation_days_i) << ',' << r.steps << '\n';
  }
  if (!f) throw std::runtime_error("failed writing " + path);
}

void write_mc_summary_csv(const MCSummary& mc, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << 't';
  for (const McMethodStats& m : mc.methods)
    f << ',' << m.method << "_mean_T," << m.method << "_std_T";
  f << '\n';
  for (std::size_t i = 0; i < mc.t.size(); ++i) {
    f << format_double(mc.t[i]);
    for (const McMethodStats& m : mc.methods)
      f << ',' << format_double(m.mean_t[i]) << ','
        << format_double(m.std_t[i]);
    f << '\n';
  }
  if (!f) throw std::runtime_error("failed writing " + path);
}

void write_mc_runs_csv(const McMethodStats& stats, const std::vector<double>& t,
                       const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << 't';
  for (std::size_t run = 0; run < stats.runs_t.size(); ++run)
    f << ",run_" << run;
  f << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    f << format_double(t[i]);
    for (const auto& series : stats.runs_t) f << ',' << format_double(series[i]);
    f << '\n';
  }
  if (!f) throw std::runtime_error("failed writing " + path);
}

}  // namespace chemo
