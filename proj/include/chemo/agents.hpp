#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "chemo/config.hpp"
#include "chemo/dynamics.hpp"
#include "chemo/env.hpp"
#include "chemo/net.hpp"
#include "chemo/replay.hpp"

namespace chemo {

/// n dose levels equally spaced on [0, u_max], endpoints included.
std::vector<double> action_grid(int n, double u_max);

/// Linear schedule: start -> end over decay_steps, flat afterwards.
double linear_schedule(double start, double end, int decay_steps, int step);

/// Greedy argmax over a Q row; ties resolve to the lowest index.
int argmax_lowest(const Eigen::RowVectorXd& q);

/// Q-network feedback policy on the dose grid.
class DqnPolicy final : public Policy {
 public:
  DqnPolicy(Net q, std::vector<double> grid, StateVec scales);
  double dose(double t_days, const StateVec& x) const override;
  int select(const Observation& o) const;

 private:
  Net q_;
  std::vector<double> grid_;
  StateVec scales_;
};

/// Deterministic actor policy; dose = u_max * actor(obs).
class DdpgPolicy final : public Policy {
 public:
  DdpgPolicy(Net actor, StateVec scales, double u_max);
  double dose(double t_days, const StateVec& x) const override;
  double act(const Observation& o) const;  // normalized [0,1]

 private:
  Net actor_;
  StateVec scales_;
  double u_max_;
};

/// One TD minibatch step; returns (loss, mean max-Q over the batch).
/// Rewards in the buffer are already learner-scaled.
std::pair<double, double> dqn_update(Net& q, const Net& q_target, Adam& opt,
                                     const ReplayBuffer& buf, RngStream& sampler,
                                     const DqnConfig& cfg);

/// One critic + actor step per the deterministic policy gradient; soft-updates
/// both targets. Returns (critic loss, mean critic value at the actor action).
std::pair<double, double> ddpg_update(Net& actor, Net& actor_target, Net& critic,
                                      Net& critic_target, Adam& actor_opt,
                                      Adam& critic_opt, const ReplayBuffer& buf,
                                      RngStream& sampler, const DdpgConfig& cfg);

struct EpisodeLog {
  int episode = 0;
  double return_raw = 0.0;  // sum of env rewards (unscaled)
  int steps = 0;
  bool cured = false;
  double mean_loss = 0.0;   // mean TD/critic loss over the episode's updates
  double mean_q = 0.0;
  double explore = 0.0;     // epsilon (dqn) or noise sigma (ddpg) at episode end
};

struct EvalPoint {
  int episode = 0;
  double cost = 0.0;
  bool cured = false;
};

struct TrainResult {
  std::string algo;  // "dqn" or "ddpg"
  std::vector<EpisodeLog> episodes;
  std::vector<EvalPoint> evals;
  bool diverged = false;
  std::string note;
  Net primary;                     // q-net (dqn) / actor (ddpg)
  Net secondary;                   // target q (dqn) / critic (ddpg)
  std::vector<double> dose_grid;   // dqn only
  std::uint64_t seed = 0;
  int episodes_trained = 0;
};

struct TrainOptions {
  int episodes = 1500;
  std::uint64_t seed = 0;
  int eval_every = 0;  // 0 disables periodic greedy evaluations
};

/// Sequential training loops (determinism requires a fixed update order).
/// Greedy evaluations run on a deterministic copy of the environment.
TrainResult train_dqn(const EnvConfig& env_cfg, const PatientParams& params,
                      const DqnConfig& cfg, const TrainOptions& opt);
TrainResult train_ddpg(const EnvConfig& env_cfg, const PatientParams& params,
                       const DdpgConfig& cfg, const TrainOptions& opt);

/// The trained greedy policy as a dose source.
std::unique_ptr<Policy> make_policy(const TrainResult& result, const EnvConfig& env_cfg);

/// Exact-double JSON checkpoint carrying everything needed to rebuild the
/// greedy policy (nets, dose grid, normalization scales, dose range).
void save_checkpoint(const TrainResult& result, const EnvConfig& env_cfg,
                     const std::string& path);

struct LoadedPolicy {
  std::string algo;
  std::unique_ptr<Policy> policy;
};
LoadedPolicy load_checkpoint(const std::string& path);

/// Per-episode log and periodic-eval CSVs.
void write_learning_curve_csv(const TrainResult& result, const std::string& path);
void write_eval_points_csv(const TrainResult& result, const std::string& path);

}  // namespace chemo
