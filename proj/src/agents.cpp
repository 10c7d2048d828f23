#include "chemo/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "chemo/csv.hpp"

namespace chemo {

namespace {

// Fixed stream ids so every consumer of the user seed is independent.
constexpr std::uint64_t kStreamInit = 11;
constexpr std::uint64_t kStreamExplore = 12;
constexpr std::uint64_t kStreamSample = 13;
constexpr std::uint64_t kStreamEnv = 14;

constexpr double kFinalLayerScale = 3e-3;

Eigen::RowVectorXd obs_row(const Observation& o) {
  Eigen::RowVectorXd r(4);
  for (int i = 0; i < 4; ++i) r(i) = o[i];
  return r;
}

std::vector<int> hidden_widths(int layers, int units) {
  return std::vector<int>(layers, units);
}

struct UpdateStats {
  double loss_sum = 0.0;
  double q_sum = 0.0;
  int count = 0;
  void add(double loss, double q) {
    loss_sum += loss;
    q_sum += q;
    ++count;
  }
  double mean_loss() const { return count ? loss_sum / count : 0.0; }
  double mean_q() const { return count ? q_sum / count : 0.0; }
};

EvalPoint greedy_eval(const EnvConfig& env_cfg, const PatientParams& params,
                      const Policy& pol, int episode) {
  EnvConfig ec = env_cfg;
  ec.stochastic = false;
  Environment env(ec, params);
  env.reset();
  std::vector<double> rewards;
  bool cured = false;
  while (!env.done()) {
    const double u = pol.dose(env.time_days(), env.state());
    const StepResult r = env.step(u / ec.u_max);
    rewards.push_back(r.reward);
    cured = r.status == StepStatus::cured;
  }
  return {episode, episode_cost(rewards), cured};
}

}  // namespace

ReplayBuffer::ReplayBuffer(int capacity) {
  if (capacity < 1) throw std::invalid_argument("replay: capacity must be >= 1");
  storage_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  storage_[write_] = t;
  write_ = (write_ + 1) % static_cast<int>(storage_.size());
  count_ = std::min(count_ + 1, static_cast<int>(storage_.size()));
}

const Transition& ReplayBuffer::at(int i) const {
  if (i < 0 || i >= count_) throw std::out_of_range("replay: index out of range");
  const int cap = static_cast<int>(storage_.size());
  const int oldest = count_ < cap ? 0 : write_;
  return storage_[(oldest + i) % cap];
}

std::vector<Transition> ReplayBuffer::sample(int batch, RngStream& rng) const {
  if (count_ == 0) throw std::logic_error("replay: sampling from an empty buffer");
  std::vector<Transition> out;
  out.reserve(batch);
  for (int i = 0; i < batch; ++i) out.push_back(at(rng.uniform_int(count_)));
  return out;
}

std::vector<double> action_grid(int n, double u_max) {
  if (n < 2) throw std::invalid_argument("action_grid: need at least 2 nodes");
  if (!(u_max > 0)) throw std::invalid_argument("action_grid: u_max must be > 0");
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = u_max * i / (n - 1);
  return grid;
}

double linear_schedule(double start, double end, int decay_steps, int step) {
  if (step >= decay_steps) return end;
  if (step <= 0) return start;
  return start + (end - start) * (static_cast<double>(step) / decay_steps);
}

int argmax_lowest(const Eigen::RowVectorXd& q) {
  int best = 0;
  for (int i = 1; i < q.size(); ++i)
    if (q(i) > q(best)) best = i;
  return best;
}

DqnPolicy::DqnPolicy(Net q, std::vector<double> grid, StateVec scales)
    : q_(std::move(q)), grid_(std::move(grid)), scales_(scales) {
  if (q_.output_dim() != static_cast<int>(grid_.size()))
    throw std::invalid_argument("dqn policy: grid size does not match q outputs");
}

int DqnPolicy::select(const Observation& o) const {
  const Eigen::MatrixXd out = forward_serial(q_, obs_row(o));
  return argmax_lowest(out.row(0));
}

double DqnPolicy::dose(double, const StateVec& x) const {
  return grid_[select(observe(x, scales_))];
}

DdpgPolicy::DdpgPolicy(Net actor, StateVec scales, double u_max)
    : actor_(std::move(actor)), scales_(scales), u_max_(u_max) {
  if (actor_.output_dim() != 1)
    throw std::invalid_argument("ddpg policy: actor must have one output");
}

double DdpgPolicy::act(const Observation& o) const {
  return forward_serial(actor_, obs_row(o))(0, 0);
}

double DdpgPolicy::dose(double, const StateVec& x) const {
  return u_max_ * act(observe(x, scales_));
}

std::pair<double, double> dqn_update(Net& q, const Net& q_target, Adam& opt,
                                     const ReplayBuffer& buf, RngStream& sampler,
                                     const DqnConfig& cfg) {
  const int B = cfg.batch_size;
  const auto batch = buf.sample(B, sampler);
  const int n_actions = q.output_dim();

  Eigen::MatrixXd S(B, 4), S2(B, 4);
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < 4; ++j) {
      S(i, j) = batch[i].s[j];
      S2(i, j) = batch[i].s2[j];
    }

  const Eigen::MatrixXd Qt = forward(q_target, S2, nullptr, cfg.grad_chunks);
  FwdCache cache;
  const Eigen::MatrixXd Q = forward(q, S, &cache, cfg.grad_chunks);

  Eigen::MatrixXd dOut = Eigen::MatrixXd::Zero(B, n_actions);
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    const int a = static_cast<int>(batch[i].a);
    if (a < 0 || a >= n_actions)
      throw std::logic_error("dqn: stored action index out of range");
    double y = batch[i].r;
    if (!batch[i].terminal) y += cfg.gamma * Qt.row(i).maxCoeff();
    const double diff = Q(i, a) - y;
    loss += diff * diff;
    dOut(i, a) = 2.0 * diff / B;
  }
  loss /= B;

  const Grads g = backward(q, cache, dOut, nullptr, cfg.grad_chunks);
  opt.step(q, g);
  return {loss, Q.rowwise().maxCoeff().mean()};
}

std::pair<double, double> ddpg_update(Net& actor, Net& actor_target, Net& critic,
                                      Net& critic_target, Adam& actor_opt,
                                      Adam& critic_opt, const ReplayBuffer& buf,
                                      RngStream& sampler, const DdpgConfig& cfg) {
  const int B = cfg.batch_size;
  const auto batch = buf.sample(B, sampler);

  Eigen::MatrixXd S(B, 4), S2(B, 4), A(B, 1);
  Eigen::VectorXd r(B);
  Eigen::VectorXd not_terminal(B);
  for (int i = 0; i < B; ++i) {
    for (int j = 0; j < 4; ++j) {
      S(i, j) = batch[i].s[j];
      S2(i, j) = batch[i].s2[j];
    }
    A(i, 0) = batch[i].a;
    r(i) = batch[i].r;
    not_terminal(i) = batch[i].terminal ? 0.0 : 1.0;
  }

  // Critic regression toward the bootstrapped target.
  const Eigen::MatrixXd A2 = forward(actor_target, S2, nullptr, cfg.grad_chunks);
  Eigen::MatrixXd SA2(B, 5);
  SA2 << S2, A2;
  const Eigen::MatrixXd Q2 = forward(critic_target, SA2, nullptr, cfg.grad_chunks);
  const Eigen::VectorXd y =
      r + cfg.gamma * not_terminal.cwiseProduct(Q2.col(0));

  Eigen::MatrixXd SA(B, 5);
  SA << S, A;
  FwdCache critic_cache;
  const Eigen::MatrixXd Q = forward(critic, SA, &critic_cache, cfg.grad_chunks);
  const Eigen::VectorXd diff = Q.col(0) - y;
  const double critic_loss = diff.squaredNorm() / B;
  const Grads gc = backward(critic, critic_cache, (2.0 / B) * diff,
                            nullptr, cfg.grad_chunks);
  critic_opt.step(critic, gc);

  // Actor ascends the critic: dJ/dtheta = dQ/da * da/dtheta (mean over batch).
  FwdCache actor_cache;
  const Eigen::MatrixXd Ap = forward(actor, S, &actor_cache, cfg.grad_chunks);
  Eigen::MatrixXd SAp(B, 5);
  SAp << S, Ap;
  FwdCache qcache;
  const Eigen::MatrixXd Qp = forward(critic, SAp, &qcache, cfg.grad_chunks);
  Eigen::MatrixXd dSA;
  backward(critic, qcache, Eigen::MatrixXd::Constant(B, 1, -1.0 / B), &dSA,
           cfg.grad_chunks, /*with_param_grads=*/false);
  const Grads ga =
      backward(actor, actor_cache, dSA.col(4), nullptr, cfg.grad_chunks);
  actor_opt.step(actor, ga);

  blend_towards(critic_target, critic, cfg.tau);
  blend_towards(actor_target, actor, cfg.tau);
  return {critic_loss, Qp.col(0).mean()};
}

TrainResult train_dqn(const EnvConfig& env_cfg, const PatientParams& params,
                      const DqnConfig& cfg, const TrainOptions& opt) {
  RngStream init_rng(opt.seed, kStreamInit);
  RngStream explore(opt.seed, kStreamExplore);
  RngStream sampler(opt.seed, kStreamSample);
  Environment env(env_cfg, params, opt.seed, kStreamEnv);

  TrainResult res;
  res.algo = "dqn";
  res.seed = opt.seed;
  res.dose_grid = action_grid(cfg.action_nodes, env_cfg.u_max);
  Net q = Net::make(4, hidden_widths(cfg.hidden_layers, cfg.hidden_units),
                    cfg.action_nodes, Head::linear, init_rng, kFinalLayerScale);
  Net qt = q;
  Adam adam;
  adam.lr = cfg.learning_rate;
  adam.init(q);
  ReplayBuffer buf(cfg.buffer_capacity);
  const int learn_after = std::max(cfg.replay_start, cfg.batch_size);

  int total_steps = 0, updates = 0;
  for (int ep = 0; ep < opt.episodes; ++ep) {
    Observation obs = env.reset();
    EpisodeLog log;
    log.episode = ep;
    UpdateStats stats;
    while (true) {
      int a;
      if (buf.size() < learn_after) {
        a = explore.uniform_int(cfg.action_nodes);
      } else {
        const double eps = linear_schedule(cfg.epsilon_start, cfg.epsilon_end,
                                           cfg.epsilon_decay_steps, total_steps);
        if (explore.uniform() < eps) {
          a = explore.uniform_int(cfg.action_nodes);
        } else {
          const Eigen::MatrixXd out = forward(q, obs_row(obs), nullptr, 1);
          if (!out.allFinite()) {
            res.diverged = true;
            res.note = "dqn: non-finite action values at step " +
                       std::to_string(total_steps);
            break;
          }
          a = argmax_lowest(out.row(0));
        }
      }

      const StepResult sr = env.step(a, res.dose_grid);
      ++total_steps;
      buf.push({obs, sr.obs, static_cast<double>(a), sr.reward / env_cfg.dt_days,
                sr.status == StepStatus::cured});
      log.return_raw += sr.reward;
      ++log.steps;
      obs = sr.obs;

      if (buf.size() >= learn_after) {
        const auto [loss, mean_q] = dqn_update(q, qt, adam, buf, sampler, cfg);
        if (!std::isfinite(loss)) {
          res.diverged = true;
          res.note = "dqn: non-finite TD loss at update " + std::to_string(updates);
          break;
        }
        ++updates;
        stats.add(loss, mean_q);
        if (updates % cfg.target_sync_period == 0) blend_towards(qt, q, 1.0);
      }

      if (sr.done) {
        log.cured = sr.status == StepStatus::cured;
        break;
      }
    }
    log.mean_loss = stats.mean_loss();
    log.mean_q = stats.mean_q();
    log.explore = linear_schedule(cfg.epsilon_start, cfg.epsilon_end,
                                  cfg.epsilon_decay_steps, total_steps);
    res.episodes.push_back(log);
    res.episodes_trained = ep + 1;
    if (res.diverged) break;
    if (!q.finite()) {
      res.diverged = true;
      res.note = "dqn: non-finite parameters after episode " + std::to_string(ep);
      break;
    }
    if (opt.eval_every > 0 && (ep + 1) % opt.eval_every == 0) {
      const DqnPolicy pol(q, res.dose_grid, env_cfg.norm_scales);
      res.evals.push_back(greedy_eval(env_cfg, params, pol, ep + 1));
    }
  }
  res.primary = std::move(q);
  res.secondary = std::move(qt);
  return res;
}

TrainResult train_ddpg(const EnvConfig& env_cfg, const PatientParams& params,
                       const DdpgConfig& cfg, const TrainOptions& opt) {
  RngStream init_rng(opt.seed, kStreamInit);
  RngStream explore(opt.seed, kStreamExplore);
  RngStream sampler(opt.seed, kStreamSample);
  Environment env(env_cfg, params, opt.seed, kStreamEnv);

  TrainResult res;
  res.algo = "ddpg";
  res.seed = opt.seed;
  const auto widths = hidden_widths(cfg.hidden_layers, cfg.hidden_units);
  Net actor = Net::make(4, widths, 1, Head::sigmoid, init_rng, kFinalLayerScale);
  Net critic = Net::make(5, widths, 1, Head::linear, init_rng, kFinalLayerScale);
  Net actor_t = actor, critic_t = critic;
  Adam actor_opt, critic_opt;
  actor_opt.lr = cfg.actor_lr;
  critic_opt.lr = cfg.critic_lr;
  actor_opt.init(actor);
  critic_opt.init(critic);
  ReplayBuffer buf(cfg.buffer_capacity);
  const int learn_after = std::max(cfg.replay_start, cfg.batch_size);

  int total_steps = 0;
  long long updates = 0;
  for (int ep = 0; ep < opt.episodes; ++ep) {
    Observation obs = env.reset();
    EpisodeLog log;
    log.episode = ep;
    UpdateStats stats;
    while (true) {
      double a;
      if (buf.size() < learn_after) {
        a = explore.uniform();
      } else {
        const double sigma = linear_schedule(cfg.noise_sigma_start, cfg.noise_sigma_end,
                                             cfg.noise_decay_steps, total_steps);
        const double mean = forward(actor, obs_row(obs), nullptr, 1)(0, 0);
        if (!std::isfinite(mean)) {
          res.diverged = true;
          res.note = "ddpg: non-finite actor output at step " +
                     std::to_string(total_steps);
          break;
        }
        a = std::clamp(mean + sigma * explore.normal(), 0.0, 1.0);
      }

      const StepResult sr = env.step(a);
      ++total_steps;
      buf.push({obs, sr.obs, a, sr.reward / env_cfg.dt_days,
                sr.status == StepStatus::cured});
      log.return_raw += sr.reward;
      ++log.steps;
      obs = sr.obs;

      if (buf.size() >= learn_after) {
        const auto [loss, mean_q] = ddpg_update(actor, actor_t, critic, critic_t,
                                                actor_opt, critic_opt, buf, sampler,
                                                cfg);
        if (!std::isfinite(loss)) {
          res.diverged = true;
          res.note = "ddpg: non-finite critic loss at update " + std::to_string(updates);
          break;
        }
        ++updates;
        stats.add(loss, mean_q);
      }

      if (sr.done) {
        log.cured = sr.status == StepStatus::cured;
        break;
      }
    }
    log.mean_loss = stats.mean_loss();
    log.mean_q = stats.mean_q();
    log.explore = linear_schedule(cfg.noise_sigma_start, cfg.noise_sigma_end,
                                  cfg.noise_decay_steps, total_steps);
    res.episodes.push_back(log);
    res.episodes_trained = ep + 1;
    if (res.diverged) break;
    if (!actor.finite() || !critic.finite()) {
      res.diverged = true;
      res.note = "ddpg: non-finite parameters after episode " + std::to_string(ep);
      break;
    }
    if (opt.eval_every > 0 && (ep + 1) % opt.eval_every == 0) {
      const DdpgPolicy pol(actor, env_cfg.norm_scales, env_cfg.u_max);
      res.evals.push_back(greedy_eval(env_cfg, params, pol, ep + 1));
    }
  }
  res.primary = std::move(actor);
  res.secondary = std::move(critic);
  return res;
}

std::unique_ptr<Policy> make_policy(const TrainResult& result, const EnvConfig& env_cfg) {
  if (result.algo == "dqn")
    return std::make_unique<DqnPolicy>(result.primary, result.dose_grid,
                                       env_cfg.norm_scales);
  if (result.algo == "ddpg")
    return std::make_unique<DdpgPolicy>(result.primary, env_cfg.norm_scales,
                                        env_cfg.u_max);
  throw std::invalid_argument("make_policy: unknown algo '" + result.algo + "'");
}

void save_checkpoint(const TrainResult& result, const EnvConfig& env_cfg,
                     const std::string& path) {
  nlohmann::json j;
  j["algo"] = result.algo;
  j["u_max"] = env_cfg.u_max;
  j["norm_scales"] = {{"N", env_cfg.norm_scales.N},
                      {"T", env_cfg.norm_scales.T},
                      {"I", env_cfg.norm_scales.I},
                      {"C", env_cfg.norm_scales.C}};
  j["seed"] = result.seed;
  j["episodes"] = result.episodes_trained;
  j["primary"] = nlohmann::json::parse(net_to_json(result.primary));
  j["secondary"] = nlohmann::json::parse(net_to_json(result.secondary));
  if (result.algo == "dqn") j["dose_grid"] = result.dose_grid;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

LoadedPolicy load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint: bad JSON in " + path + ": " + e.what());
  }
  LoadedPolicy out;
  out.algo = j.at("algo").get<std::string>();
  const StateVec scales{j.at("norm_scales").at("N").get<double>(),
                        j.at("norm_scales").at("T").get<double>(),
                        j.at("norm_scales").at("I").get<double>(),
                        j.at("norm_scales").at("C").get<double>()};
  const double u_max = j.at("u_max").get<double>();
  Net primary = net_from_json(j.at("primary").dump());
  if (out.algo == "dqn") {
    std::vector<double> grid = j.at("dose_grid").get<std::vector<double>>();
    out.policy = std::make_unique<DqnPolicy>(std::move(primary), std::move(grid), scales);
  } else if (out.algo == "ddpg") {
    out.policy = std::make_unique<DdpgPolicy>(std::move(primary), scales, u_max);
  } else {
    throw std::runtime_error("checkpoint: unknown algo '" + out.algo + "' in " + path);
  }
  return out;
}

void write_learning_curve_csv(const TrainResult& result, const std::string& path) {
  Table tab;
  tab.header = {"episode", "return", "steps", "cured", "mean_loss", "mean_q", "explore"};
  for (const auto& e : result.episodes)
    tab.rows.push_back({static_cast<double>(e.episode), e.return_raw,
                        static_cast<double>(e.steps), e.cured ? 1.0 : 0.0,
                        e.mean_loss, e.mean_q, e.explore});
  write_table_csv(tab, path);
}

void write_eval_points_csv(const TrainResult& result, const std::string& path) {
  Table tab;
  tab.header = {"episode", "cost", "cured"};
  for (const auto& e : result.evals)
    tab.rows.push_back({static_cast<double>(e.episode), e.cost, e.cured ? 1.0 : 0.0});
  write_table_csv(tab, path);
}

}  // namespace chemo
