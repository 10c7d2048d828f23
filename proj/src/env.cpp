#include "chemo/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chemo {

Observation observe(const StateVec& x, const StateVec& scales) {
  Observation o;
  for (int i = 0; i < 4; ++i) o[i] = std::clamp(x[i] / scales[i], 0.0, 1.0);
  return o;
}

double reward_case0(const StateVec& x_next, const EnvConfig& cfg) {
  return cfg.dt_days * (-x_next.T);
}

double reward_patient(const StateVec& x_next, const EnvConfig& cfg) {
  const double pen_n = x_next.N < cfg.health_floor_n ? cfg.violation_penalty : 0.0;
  const double pen_i = x_next.I < cfg.health_floor_i ? cfg.violation_penalty : 0.0;
  return cfg.dt_days * (-x_next.T - pen_n - pen_i);
}

double episode_cost(std::span<const double> rewards) {
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return -sum;
}

Environment::Environment(const EnvConfig& cfg, const PatientParams& params,
                         std::uint64_t seed, std::uint64_t stream)
    : cfg_(cfg), params_(params), rng_(seed, stream) {
  params_.validate();
  if (!(cfg_.dt_days > 0) || cfg_.max_steps < 1 || !(cfg_.u_max > 0))
    throw std::invalid_argument("environment: invalid dt/max_steps/u_max");
}

Observation Environment::reset() { return reset(params_.x0); }

Observation Environment::reset(const StateVec& x0) {
  if (!x0.finite() || x0.N < 0 || x0.T < 0 || x0.I < 0 || x0.C < 0)
    throw std::invalid_argument("environment: x0 must be finite and nonnegative");
  state_ = x0;
  steps_ = 0;
  done_ = false;
  const Observation o = observe(state_, cfg_.norm_scales);
  obs_clipped_ = false;
  for (int i = 0; i < 4; ++i)
    if (state_[i] / cfg_.norm_scales[i] > 1.0) obs_clipped_ = true;
  return o;
}

StepResult Environment::step(double action) {
  if (!std::isfinite(action))
    throw std::invalid_argument("environment: non-finite action");
  const double clipped = std::clamp(action, 0.0, 1.0);
  return step_dose(clipped * cfg_.u_max, clipped != action);
}

StepResult Environment::step(int index, const std::vector<double>& dose_grid) {
  if (index < 0 || static_cast<size_t>(index) >= dose_grid.size())
    throw std::out_of_range("environment: discrete action index out of range");
  return step_dose(std::clamp(dose_grid[index], 0.0, cfg_.u_max), false);
}

StepResult Environment::step_dose(double dose, bool action_clipped) {
  if (done_)
    throw std::logic_error("environment: step() called on a finished episode");

  const int substeps = cfg_.stochastic ? cfg_.em_substeps : cfg_.rk4_substeps;
  const double h = cfg_.dt_days / substeps;
  for (int i = 0; i < substeps; ++i) {
    state_ = cfg_.stochastic
                 ? euler_maruyama_step(state_, dose, h, cfg_.diffusion_g,
                                       rng_.normal(), params_)
                 : rk4_step(state_, dose, h, params_);
  }
  ++steps_;

  StepResult res;
  res.state = state_;
  res.dose = dose;
  res.action_clipped = action_clipped;
  res.obs = observe(state_, cfg_.norm_scales);
  for (int i = 0; i < 4; ++i)
    if (state_[i] / cfg_.norm_scales[i] > 1.0) res.obs_clipped = true;
  obs_clipped_ = res.obs_clipped;
  res.violated_n = state_.N < cfg_.health_floor_n;
  res.violated_i = state_.I < cfg_.health_floor_i;
  res.reward = cfg_.case_name == "case0" ? reward_case0(state_, cfg_)
                                         : reward_patient(state_, cfg_);

  if (state_.T <= cfg_.cure_threshold) {
    res.status = StepStatus::cured;
    res.done = true;
  } else if (steps_ >= cfg_.max_steps) {
    res.status = StepStatus::truncated;
    res.done = true;
  } else {
    res.status = StepStatus::running;
  }
  done_ = res.done;
  return res;
}

}  // namespace chemo
