#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "chemo/state.hpp"

namespace chemo {

struct EnvConfig {
  std::string case_name = "patient";  // "case0" or "patient"
  double dt_days = 0.3;
  int max_steps = 500;
  double cure_threshold = 1e-2;
  double u_max = 10.0;
  StateVec norm_scales{2.0, 5.0, 2.0, 10.0};
  int rk4_substeps = 10;
  int em_substeps = 30;
  bool stochastic = false;
  double diffusion_g = 0.0;
  double health_floor_n = 0.4;
  double health_floor_i = 0.4;
  double violation_penalty = 0.5;
};

struct SolverConfig {
  double mu_init = 10.0;
  double mu_growth = 6.0;
  double mu_max = 1e8;
  double feas_tol = 1e-7;
  double opt_tol = 1e-7;
  double omega_init = 1e-3;
  double omega_shrink = 0.2;
  double omega_min = 1e-9;
  int max_outer = 120;
  int max_inner = 600;
  int lbfgs_memory = 12;
  int stall_outer_limit = 50;
  double stall_improvement = 0.1;
};

struct OcpConfig {
  int nodes = 200;
  double defect_tol = 1e-2;
  double path_tol = 1e-2;
  double terminal_tumor = 1e-2;
  double tf_init = 20.0;
  double tf_min = 1.0;
  double tf_max = 200.0;
  double tf_weight = 1e-3;  // breaks the near-flat tail indifference in tf
  double obj_scale = 1.0;   // constant cost multiplier; the argmin is invariant
  double u_init = 5.0;
  double state_upper = 50.0;
  int max_mesh_rounds = 5;
  std::vector<double> mesh_error_samples{0.25, 0.75};
  SolverConfig solver;
};

struct DqnConfig {
  int action_nodes = 10;
  double gamma = 0.99;
  int hidden_layers = 2;
  int hidden_units = 100;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int buffer_capacity = 100000;
  int replay_start = 1000;
  int target_sync_period = 500;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_steps = 50000;
  int grad_chunks = 4;
};

struct DdpgConfig {
  double gamma = 0.995;
  int hidden_layers = 3;
  int hidden_units = 300;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double tau = 0.005;
  int batch_size = 64;
  int buffer_capacity = 100000;
  int replay_start = 5000;
  double noise_sigma_start = 0.2;
  double noise_sigma_end = 0.02;
  int noise_decay_steps = 50000;
  int grad_chunks = 4;
};

struct ExperimentsConfig {
  int train_seeds = 3;
  int train_episodes = 1500;
  int case0_episodes = 500;
  int eval_every = 100;
  std::vector<double> r1_grid{1.3, 1.4, 1.5, 1.55, 1.6, 1.7};
  std::vector<double> t0_grid{0.7, 1.0, 2.0, 3.0, 3.5, 4.0, 5.0};
  std::vector<double> feasibility_r1_grid{1.5, 1.6, 1.7, 1.8};
  int mc_runs = 100;
  double mc_g = 0.05;
  double mc_horizon_days = 30.0;
  std::vector<int> sampling_grids{7, 10, 20, 30, 40, 50, 60};
  int workers = 1;
};

struct RunConfig {
  PatientParams patient;
  EnvConfig env;
  OcpConfig ocp;
  DqnConfig dqn;
  DdpgConfig ddpg;
  ExperimentsConfig experiments;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse + validate. Throws ConfigError with the offending key in the message.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Deterministic (sorted-key) JSON echo of a loaded config, for manifests.
std::string config_to_json(const RunConfig& cfg);

}  // namespace chemo
