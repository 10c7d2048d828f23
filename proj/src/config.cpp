#include "chemo/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace chemo {

namespace {

using nlohmann::json;

const json& section(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_object())
    throw ConfigError(std::string("config: missing object section '") + name + "'");
  return *it;
}

double num(const json& sec, const char* secname, const char* key) {
  auto it = sec.find(key);
  if (it == sec.end() || !it->is_number())
    throw ConfigError(std::string("config: ") + secname + "." + key +
                      " must be a number");
  return it->get<double>();
}

int integer(const json& sec, const char* secname, const char* key) {
  auto it = sec.find(key);
  if (it == sec.end() || !it->is_number_integer())
    throw ConfigError(std::string("config: ") + secname + "." + key +
                      " must be an integer");
  return it->get<int>();
}

bool boolean(const json& sec, const char* secname, const char* key) {
  auto it = sec.find(key);
  if (it == sec.end() || !it->is_boolean())
    throw ConfigError(std::string("config: ") + secname + "." + key +
                      " must be a boolean");
  return it->get<bool>();
}

std::string str(const json& sec, const char* secname, const char* key) {
  auto it = sec.find(key);
  if (it == sec.end() || !it->is_string())
    throw ConfigError(std::string("config: ") + secname + "." + key +
                      " must be a string");
  return it->get<std::string>();
}

std::vector<double> num_list(const json& sec, const char* secname, const char* key) {
  auto it = sec.find(key);
  if (it == sec.end() || !it->is_array())
    throw ConfigError(std::string("config: ") + secname + "." + key +
                      " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : *it) {
    if (!v.is_number())
      throw ConfigError(std::string("config: ") + secname + "." + key +
                        " must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<int> int_list(const json& sec, const char* secname, const char* key) {
  auto it = sec.find(key);
  if (it == sec.end() || !it->is_array())
    throw ConfigError(std::string("config: ") + secname + "." + key +
                      " must be an array of integers");
  std::vector<int> out;
  for (const auto& v : *it) {
    if (!v.is_number_integer())
      throw ConfigError(std::string("config: ") + secname + "." + key +
                        " must contain only integers");
    out.push_back(v.get<int>());
  }
  return out;
}

StateVec state_vec(const json& sec, const char* secname, const char* key) {
  const json& o = section(sec, key);
  return StateVec{num(o, secname, "N"), num(o, secname, "T"),
                  num(o, secname, "I"), num(o, secname, "C")};
}

void require_positive(double v, const char* what) {
  if (!(v > 0)) throw ConfigError(std::string("config: ") + what + " must be > 0");
}

void require_at_least(int v, int lo, const char* what) {
  if (v < lo)
    throw ConfigError(std::string("config: ") + what + " must be >= " +
                      std::to_string(lo));
}

PatientParams parse_patient(const json& j) {
  const json& p = section(j, "patient");
  PatientParams out;
  out.r1 = num(p, "patient", "r1");
  out.r2 = num(p, "patient", "r2");
  out.b1 = num(p, "patient", "b1");
  out.b2 = num(p, "patient", "b2");
  out.c1 = num(p, "patient", "c1");
  out.c2 = num(p, "patient", "c2");
  out.c3 = num(p, "patient", "c3");
  out.c4 = num(p, "patient", "c4");
  out.a1 = num(p, "patient", "a1");
  out.a2 = num(p, "patient", "a2");
  out.a3 = num(p, "patient", "a3");
  out.d1 = num(p, "patient", "d1");
  out.d2 = num(p, "patient", "d2");
  out.s = num(p, "patient", "s");
  out.rho = num(p, "patient", "rho");
  out.alpha = num(p, "patient", "alpha");
  out.x0 = state_vec(p, "patient.x0", "x0");
  try {
    out.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return out;
}

EnvConfig parse_env(const json& j) {
  const json& e = section(j, "env");
  EnvConfig out;
  out.case_name = str(e, "env", "case");
  if (out.case_name != "case0" && out.case_name != "patient")
    throw ConfigError("config: env.case must be 'case0' or 'patient'");
  out.dt_days = num(e, "env", "dt_days");
  require_positive(out.dt_days, "env.dt_days");
  out.max_steps = integer(e, "env", "max_steps");
  require_at_least(out.max_steps, 1, "env.max_steps");
  out.cure_threshold = num(e, "env", "cure_threshold");
  require_positive(out.cure_threshold, "env.cure_threshold");
  out.u_max = num(e, "env", "u_max");
  require_positive(out.u_max, "env.u_max");
  out.norm_scales = state_vec(e, "env.norm_scales", "norm_scales");
  for (int i = 0; i < 4; ++i) require_positive(out.norm_scales[i], "env.norm_scales");
  out.rk4_substeps = integer(e, "env", "rk4_substeps");
  require_at_least(out.rk4_substeps, 1, "env.rk4_substeps");
  out.em_substeps = integer(e, "env", "em_substeps");
  require_at_least(out.em_substeps, 1, "env.em_substeps");
  out.stochastic = boolean(e, "env", "stochastic");
  out.diffusion_g = num(e, "env", "diffusion_g");
  if (out.diffusion_g < 0) throw ConfigError("config: env.diffusion_g must be >= 0");
  out.health_floor_n = num(e, "env", "health_floor_n");
  out.health_floor_i = num(e, "env", "health_floor_i");
  out.violation_penalty = num(e, "env", "violation_penalty");
  return out;
}

SolverConfig parse_solver(const json& o) {
  SolverConfig s;
  s.mu_init = num(o, "ocp.solver", "mu_init");
  s.mu_growth = num(o, "ocp.solver", "mu_growth");
  s.mu_max = num(o, "ocp.solver", "mu_max");
  s.feas_tol = num(o, "ocp.solver", "feas_tol");
  s.opt_tol = num(o, "ocp.solver", "opt_tol");
  s.omega_init = num(o, "ocp.solver", "omega_init");
  s.omega_shrink = num(o, "ocp.solver", "omega_shrink");
  s.omega_min = num(o, "ocp.solver", "omega_min");
  s.max_outer = integer(o, "ocp.solver", "max_outer");
  s.max_inner = integer(o, "ocp.solver", "max_inner");
  s.lbfgs_memory = integer(o, "ocp.solver", "lbfgs_memory");
  s.stall_outer_limit = integer(o, "ocp.solver", "stall_outer_limit");
  s.stall_improvement = num(o, "ocp.solver", "stall_improvement");
  if (s.mu_growth <= 1) throw ConfigError("config: ocp.solver.mu_growth must be > 1");
  require_positive(s.feas_tol, "ocp.solver.feas_tol");
  require_positive(s.opt_tol, "ocp.solver.opt_tol");
  require_at_least(s.lbfgs_memory, 1, "ocp.solver.lbfgs_memory");
  return s;
}

OcpConfig parse_ocp(const json& j) {
  const json& o = section(j, "ocp");
  OcpConfig out;
  out.nodes = integer(o, "ocp", "nodes");
  require_at_least(out.nodes, 2, "ocp.nodes");
  out.defect_tol = num(o, "ocp", "defect_tol");
  require_positive(out.defect_tol, "ocp.defect_tol");
  out.path_tol = num(o, "ocp", "path_tol");
  out.terminal_tumor = num(o, "ocp", "terminal_tumor");
  require_positive(out.terminal_tumor, "ocp.terminal_tumor");
  out.tf_init = num(o, "ocp", "tf_init");
  out.tf_min = num(o, "ocp", "tf_min");
  out.tf_max = num(o, "ocp", "tf_max");
  if (!(out.tf_min > 0) || !(out.tf_max > out.tf_min))
    throw ConfigError("config: require 0 < ocp.tf_min < ocp.tf_max");
  if (!(out.tf_init >= out.tf_min && out.tf_init <= out.tf_max))
    throw ConfigError("config: ocp.tf_init must lie in [tf_min, tf_max]");
  out.tf_weight = num(o, "ocp", "tf_weight");
  if (!(out.tf_weight >= 0))
    throw ConfigError("config: ocp.tf_weight must be >= 0");
  out.obj_scale = num(o, "ocp", "obj_scale");
  if (!(out.obj_scale > 0))
    throw ConfigError("config: ocp.obj_scale must be > 0");
  out.u_init = num(o, "ocp", "u_init");
  out.state_upper = num(o, "ocp", "state_upper");
  require_positive(out.state_upper, "ocp.state_upper");
  out.max_mesh_rounds = integer(o, "ocp", "max_mesh_rounds");
  out.mesh_error_samples = num_list(o, "ocp", "mesh_error_samples");
  for (double v : out.mesh_error_samples)
    if (!(v > 0 && v < 1))
      throw ConfigError("config: ocp.mesh_error_samples must lie in (0,1)");
  out.solver = parse_solver(section(o, "solver"));
  return out;
}

DqnConfig parse_dqn(const json& j) {
  const json& d = section(j, "dqn");
  DqnConfig out;
  out.action_nodes = integer(d, "dqn", "action_nodes");
  require_at_least(out.action_nodes, 2, "dqn.action_nodes");
  out.gamma = num(d, "dqn", "gamma");
  if (!(out.gamma >= 0 && out.gamma <= 1))
    throw ConfigError("config: dqn.gamma must be in [0,1]");
  out.hidden_layers = integer(d, "dqn", "hidden_layers");
  require_at_least(out.hidden_layers, 1, "dqn.hidden_layers");
  out.hidden_units = integer(d, "dqn", "hidden_units");
  require_at_least(out.hidden_units, 1, "dqn.hidden_units");
  out.learning_rate = num(d, "dqn", "learning_rate");
  require_positive(out.learning_rate, "dqn.learning_rate");
  out.batch_size = integer(d, "dqn", "batch_size");
  require_at_least(out.batch_size, 1, "dqn.batch_size");
  out.buffer_capacity = integer(d, "dqn", "buffer_capacity");
  require_at_least(out.buffer_capacity, 1, "dqn.buffer_capacity");
  out.replay_start = integer(d, "dqn", "replay_start");
  require_at_least(out.replay_start, 1, "dqn.replay_start");
  out.target_sync_period = integer(d, "dqn", "target_sync_period");
  require_at_least(out.target_sync_period, 1, "dqn.target_sync_period");
  out.epsilon_start = num(d, "dqn", "epsilon_start");
  out.epsilon_end = num(d, "dqn", "epsilon_end");
  out.epsilon_decay_steps = integer(d, "dqn", "epsilon_decay_steps");
  require_at_least(out.epsilon_decay_steps, 1, "dqn.epsilon_decay_steps");
  out.grad_chunks = integer(d, "dqn", "grad_chunks");
  require_at_least(out.grad_chunks, 1, "dqn.grad_chunks");
  return out;
}

DdpgConfig parse_ddpg(const json& j) {
  const json& d = section(j, "ddpg");
  DdpgConfig out;
  out.gamma = num(d, "ddpg", "gamma");
  if (!(out.gamma >= 0 && out.gamma <= 1))
    throw ConfigError("config: ddpg.gamma must be in [0,1]");
  out.hidden_layers = integer(d, "ddpg", "hidden_layers");
  require_at_least(out.hidden_layers, 1, "ddpg.hidden_layers");
  out.hidden_units = integer(d, "ddpg", "hidden_units");
  require_at_least(out.hidden_units, 1, "ddpg.hidden_units");
  out.actor_lr = num(d, "ddpg", "actor_lr");
  require_positive(out.actor_lr, "ddpg.actor_lr");
  out.critic_lr = num(d, "ddpg", "critic_lr");
  require_positive(out.critic_lr, "ddpg.critic_lr");
  out.tau = num(d, "ddpg", "tau");
  if (!(out.tau > 0 && out.tau <= 1))
    throw ConfigError("config: ddpg.tau must be in (0,1]");
  out.batch_size = integer(d, "ddpg", "batch_size");
  require_at_least(out.batch_size, 1, "ddpg.batch_size");
  out.buffer_capacity = integer(d, "ddpg", "buffer_capacity");
  require_at_least(out.buffer_capacity, 1, "ddpg.buffer_capacity");
  out.replay_start = integer(d, "ddpg", "replay_start");
  require_at_least(out.replay_start, 1, "ddpg.replay_start");
  out.noise_sigma_start = num(d, "ddpg", "noise_sigma_start");
  out.noise_sigma_end = num(d, "ddpg", "noise_sigma_end");
  out.noise_decay_steps = integer(d, "ddpg", "noise_decay_steps");
  require_at_least(out.noise_decay_steps, 1, "ddpg.noise_decay_steps");
  out.grad_chunks = integer(d, "ddpg", "grad_chunks");
  require_at_least(out.grad_chunks, 1, "ddpg.grad_chunks");
  return out;
}

ExperimentsConfig parse_experiments(const json& j) {
  const json& e = section(j, "experiments");
  ExperimentsConfig out;
  out.train_seeds = integer(e, "experiments", "train_seeds");
  require_at_least(out.train_seeds, 1, "experiments.train_seeds");
  out.train_episodes = integer(e, "experiments", "train_episodes");
  require_at_least(out.train_episodes, 1, "experiments.train_episodes");
  out.case0_episodes = integer(e, "experiments", "case0_episodes");
  require_at_least(out.case0_episodes, 1, "experiments.case0_episodes");
  out.eval_every = integer(e, "experiments", "eval_every");
  require_at_least(out.eval_every, 1, "experiments.eval_every");
  out.r1_grid = num_list(e, "experiments", "r1_grid");
  out.t0_grid = num_list(e, "experiments", "t0_grid");
  out.feasibility_r1_grid = num_list(e, "experiments", "feasibility_r1_grid");
  out.mc_runs = integer(e, "experiments", "mc_runs");
  require_at_least(out.mc_runs, 1, "experiments.mc_runs");
  out.mc_g = num(e, "experiments", "mc_g");
  if (out.mc_g < 0) throw ConfigError("config: experiments.mc_g must be >= 0");
  out.mc_horizon_days = num(e, "experiments", "mc_horizon_days");
  require_positive(out.mc_horizon_days, "experiments.mc_horizon_days");
  out.sampling_grids = int_list(e, "experiments", "sampling_grids");
  out.workers = integer(e, "experiments", "workers");
  require_at_least(out.workers, 1, "experiments.workers");
  return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  RunConfig cfg;
  cfg.patient = parse_patient(j);
  cfg.env = parse_env(j);
  cfg.ocp = parse_ocp(j);
  cfg.dqn = parse_dqn(j);
  cfg.ddpg = parse_ddpg(j);
  cfg.experiments = parse_experiments(j);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  const PatientParams& p = cfg.patient;
  j["patient"] = {{"r1", p.r1},   {"r2", p.r2},     {"b1", p.b1},
                  {"b2", p.b2},   {"c1", p.c1},     {"c2", p.c2},
                  {"c3", p.c3},   {"c4", p.c4},     {"a1", p.a1},
                  {"a2", p.a2},   {"a3", p.a3},     {"d1", p.d1},
                  {"d2", p.d2},   {"s", p.s},       {"rho", p.rho},
                  {"alpha", p.alpha},
                  {"x0", {{"N", p.x0.N}, {"T", p.x0.T}, {"I", p.x0.I}, {"C", p.x0.C}}}};
  const EnvConfig& e = cfg.env;
  j["env"] = {{"case", e.case_name},
              {"dt_days", e.dt_days},
              {"max_steps", e.max_steps},
              {"cure_threshold", e.cure_threshold},
              {"u_max", e.u_max},
              {"norm_scales",
               {{"N", e.norm_scales.N}, {"T", e.norm_scales.T},
                {"I", e.norm_scales.I}, {"C", e.norm_scales.C}}},
              {"rk4_substeps", e.rk4_substeps},
              {"em_substeps", e.em_substeps},
              {"stochastic", e.stochastic},
              {"diffusion_g", e.diffusion_g},
              {"health_floor_n", e.health_floor_n},
              {"health_floor_i", e.health_floor_i},
              {"violation_penalty", e.violation_penalty}};
  const OcpConfig& o = cfg.ocp;
  j["ocp"] = {{"nodes", o.nodes},
              {"defect_tol", o.defect_tol},
              {"path_tol", o.path_tol},
              {"terminal_tumor", o.terminal_tumor},
              {"tf_init", o.tf_init},
              {"tf_min", o.tf_min},
              {"tf_max", o.tf_max},
              {"tf_weight", o.tf_weight},
              {"obj_scale", o.obj_scale},
              {"u_init", o.u_init},
              {"state_upper", o.state_upper},
              {"max_mesh_rounds", o.max_mesh_rounds},
              {"mesh_error_samples", o.mesh_error_samples},
              {"solver",
               {{"mu_init", o.solver.mu_init},
                {"mu_growth", o.solver.mu_growth},
                {"mu_max", o.solver.mu_max},
                {"feas_tol", o.solver.feas_tol},
                {"opt_tol", o.solver.opt_tol},
                {"omega_init", o.solver.omega_init},
                {"omega_shrink", o.solver.omega_shrink},
                {"omega_min", o.solver.omega_min},
                {"max_outer", o.solver.max_outer},
                {"max_inner", o.solver.max_inner},
                {"lbfgs_memory", o.solver.lbfgs_memory},
                {"stall_outer_limit", o.solver.stall_outer_limit},
                {"stall_improvement", o.solver.stall_improvement}}}};
  const DqnConfig& q = cfg.dqn;
  j["dqn"] = {{"action_nodes", q.action_nodes},
              {"gamma", q.gamma},
              {"hidden_layers", q.hidden_layers},
              {"hidden_units", q.hidden_units},
              {"learning_rate", q.learning_rate},
              {"batch_size", q.batch_size},
              {"buffer_capacity", q.buffer_capacity},
              {"replay_start", q.replay_start},
              {"target_sync_period", q.target_sync_period},
              {"epsilon_start", q.epsilon_start},
              {"epsilon_end", q.epsilon_end},
              {"epsilon_decay_steps", q.epsilon_decay_steps},
              {"grad_chunks", q.grad_chunks}};
  const DdpgConfig& g = cfg.ddpg;
  j["ddpg"] = {{"gamma", g.gamma},
               {"hidden_layers", g.hidden_layers},
               {"hidden_units", g.hidden_units},
               {"actor_lr", g.actor_lr},
               {"critic_lr", g.critic_lr},
               {"tau", g.tau},
               {"batch_size", g.batch_size},
               {"buffer_capacity", g.buffer_capacity},
               {"replay_start", g.replay_start},
               {"noise_sigma_start", g.noise_sigma_start},
               {"noise_sigma_end", g.noise_sigma_end},
               {"noise_decay_steps", g.noise_decay_steps},
               {"grad_chunks", g.grad_chunks}};
  const ExperimentsConfig& x = cfg.experiments;
  j["experiments"] = {{"train_seeds", x.train_seeds},
                      {"train_episodes", x.train_episodes},
                      {"case0_episodes", x.case0_episodes},
                      {"eval_every", x.eval_every},
                      {"r1_grid", x.r1_grid},
                      {"t0_grid", x.t0_grid},
                      {"feasibility_r1_grid", x.feasibility_r1_grid},
                      {"mc_runs", x.mc_runs},
                      {"mc_g", x.mc_g},
                      {"mc_horizon_days", x.mc_horizon_days},
                      {"sampling_grids", x.sampling_grids},
                      {"workers", x.workers}};
  return j.dump(2);
}

}  // namespace chemo
