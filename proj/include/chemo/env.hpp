#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "chemo/config.hpp"
#include "chemo/dynamics.hpp"
#include "chemo/rng.hpp"

namespace chemo {

/// Normalized, clipped view of the state: clamp(x_i / scale_i, 0, 1).
using Observation = std::array<double, 4>;

Observation observe(const StateVec& x, const StateVec& scales);

/// dt-weighted running cost rewards evaluated at the post-step state.
double reward_case0(const StateVec& x_next, const EnvConfig& cfg);
double reward_patient(const StateVec& x_next, const EnvConfig& cfg);

/// Cost of an episode is the negated reward sum (left-to-right accumulation).
double episode_cost(std::span<const double> rewards);

enum class StepStatus { running, cured, truncated };

struct StepResult {
  Observation obs{};
  double reward = 0.0;
  bool done = false;
  StepStatus status = StepStatus::running;
  StateVec state;        // raw post-step state
  double dose = 0.0;     // applied dose rate in [0, u_max]
  bool action_clipped = false;
  bool obs_clipped = false;
  bool violated_n = false;  // N below its health floor at the post state
  bool violated_i = false;  // I below its health floor at the post state
};

/// One control interval per step; integration matches simulate() bit for bit
/// (RK4 substeps deterministically, Euler–Maruyama substeps stochastically).
/// Only cure terminates an episode early; hitting max_steps truncates it.
class Environment {
 public:
  Environment(const EnvConfig& cfg, const PatientParams& params,
              std::uint64_t seed = 0, std::uint64_t stream = 0);

  Observation reset();
  Observation reset(const StateVec& x0);

  /// action is a normalized dose in [0,1]; out-of-range input is saturated
  /// and flagged. Throws std::logic_error if the episode is over.
  StepResult step(double action);

  /// Convenience for discrete agents: applies dose_grid[index].
  StepResult step(int index, const std::vector<double>& dose_grid);

  const StateVec& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  const PatientParams& params() const { return params_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  double time_days() const { return steps_ * cfg_.dt_days; }
  bool last_obs_clipped() const { return obs_clipped_; }

 private:
  StepResult step_dose(double dose, bool action_clipped);

  EnvConfig cfg_;
  PatientParams params_;
  RngStream rng_;
  StateVec state_;
  int steps_ = 0;
  bool done_ = true;  // require reset() before first step
  bool obs_clipped_ = false;
};

}  // namespace chemo
