#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chemo/config.hpp"
#include "chemo/dynamics.hpp"
#include "chemo/env.hpp"
#include "chemo/rng.hpp"

using namespace chemo;

namespace {
RunConfig cfg() { return load_config(CHEMO_DEFAULT_CONFIG); }
}  // namespace

TEST_CASE("observation normalizes and clips componentwise") {
  const StateVec scales{2.0, 5.0, 2.0, 10.0};
  const Observation o = observe({1.0, 0.7, 1.0, 0.0}, scales);
  CHECK(o[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(o[1] == doctest::Approx(0.14).epsilon(1e-15));
  CHECK(o[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(o[3] == 0.0);

  const Observation c = observe({5.0, 12.0, 1.0, 0.0}, scales);
  CHECK(c[0] == 1.0);
  CHECK(c[1] == 1.0);
}

TEST_CASE("rewards match hand-evaluated values") {
  auto c = cfg().env;
  REQUIRE(c.dt_days == 0.3);
  CHECK(reward_case0({1.0, 0.6, 1.0, 0.0}, c) == doctest::Approx(-0.18).epsilon(1e-15));
  // I = 0.3 < 0.4 incurs one penalty of 0.5: 0.3 * (-0.6 - 0.5) = -0.33.
  CHECK(reward_patient({0.5, 0.6, 0.3, 0.0}, c) ==
        doctest::Approx(-0.33).epsilon(1e-15));
  // Both floors violated: 0.3 * (-0.6 - 0.5 - 0.5) = -0.48.
  CHECK(reward_patient({0.1, 0.6, 0.3, 0.0}, c) ==
        doctest::Approx(-0.48).epsilon(1e-15));
}

TEST_CASE("patient reward equals case0 reward whenever health floors hold") {
  auto c = cfg().env;
  RngStream rng(5, 0);
  for (int i = 0; i < 200; ++i) {
    const StateVec x{rng.uniform(0.4, 2.0), rng.uniform(0.0, 3.0),
                     rng.uniform(0.4, 2.0), rng.uniform(0.0, 10.0)};
    CHECK(reward_patient(x, c) == reward_case0(x, c));
  }
}

TEST_CASE("episode cost is the negated reward sum") {
  const double rewards[] = {-0.1, -0.2, -0.3};
  CHECK(episode_cost(rewards) == doctest::Approx(0.6).epsilon(1e-15));
  double manual = 0.0;
  for (double r : rewards) manual += r;
  CHECK(episode_cost(rewards) == -manual);
  CHECK(episode_cost(std::span<const double>{}) == 0.0);
}

TEST_CASE("step denormalizes actions onto the dose range") {
  const auto c = cfg();
  Environment env(c.env, c.patient);
  env.reset();
  CHECK(env.step(1.0).dose == 10.0);
  Environment env2(c.env, c.patient);
  env2.reset();
  CHECK(env2.step(0.5).dose == 5.0);
}

TEST_CASE("out-of-range actions saturate and flag") {
  const auto c = cfg();
  Environment env(c.env, c.patient);
  env.reset();
  const StepResult r = env.step(1.7);
  CHECK(r.action_clipped);
  CHECK(r.dose == 10.0);
  Environment env2(c.env, c.patient);
  env2.reset();
  const StepResult r2 = env2.step(-0.2);
  CHECK(r2.action_clipped);
  CHECK(r2.dose == 0.0);
  CHECK_THROWS_AS(env2.step(std::nan("")), std::invalid_argument);
}

TEST_CASE("environment rollout matches simulate bit for bit") {
  const auto c = cfg();
  Environment env(c.env, c.patient);
  env.reset();
  const int n = 20;
  std::vector<StateVec> env_states;
  for (int i = 0; i < n; ++i) env_states.push_back(env.step(0.22).state);

  SimOptions opt;
  opt.dt_days = c.env.dt_days;
  opt.horizon_days = n * c.env.dt_days;
  opt.rk4_substeps = c.env.rk4_substeps;
  opt.u_max = c.env.u_max;
  opt.cure_threshold = c.env.cure_threshold;
  const Trajectory traj = simulate(ConstantPolicy(2.2), c.patient, c.patient.x0, opt);
  REQUIRE(traj.x.size() == static_cast<size_t>(n + 1));
  for (int i = 0; i < n; ++i) CHECK(env_states[i] == traj.x[i + 1]);
}

TEST_CASE("cure terminates the episode with cured status") {
  const auto c = cfg();
  Environment env(c.env, c.patient);
  env.reset({1.0, 0.011, 1.0, 5.0});
  StepResult r = env.step(1.0);
  CHECK(r.done);
  CHECK(r.status == StepStatus::cured);
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(0.5), std::logic_error);
}

TEST_CASE("constraint violation does not terminate; max_steps truncates") {
  auto c = cfg();
  c.env.max_steps = 4;
  Environment env(c.env, c.patient);
  env.reset();
  // Full dosing suppresses I below its floor well before cure from x0.
  StepResult r{};
  int steps = 0;
  while (!env.done()) {
    r = env.step(1.0);
    ++steps;
    if (steps < 4) CHECK(r.status == StepStatus::running);
  }
  CHECK(steps == 4);
  CHECK(r.status == StepStatus::truncated);
}

TEST_CASE("violation flags and penalties appear together") {
  const auto c = cfg();
  Environment env(c.env, c.patient);
  env.reset({1.0, 1.0, 0.41, 9.0});
  // High drug load pushes I below 0.4 within one interval.
  const StepResult r = env.step(1.0);
  CHECK(r.violated_i);
  CHECK(r.reward == doctest::Approx(c.env.dt_days * (-r.state.T - 0.5)).epsilon(1e-12));
}

TEST_CASE("reset validates the initial state and flags clipped observations") {
  const auto c = cfg();
  Environment env(c.env, c.patient);
  CHECK_THROWS_AS(env.reset({-0.1, 0.7, 1.0, 0.0}), std::invalid_argument);
  const Observation o = env.reset({1.0, 12.0, 1.0, 0.0});
  CHECK(o[1] == 1.0);
  CHECK(env.last_obs_clipped());
}

TEST_CASE("discrete steps map grid indices to doses") {
  const auto c = cfg();
  Environment env(c.env, c.patient);
  env.reset();
  const std::vector<double> grid{0.0, 5.0, 10.0};
  const StepResult r = env.step(2, grid);
  CHECK(r.dose == 10.0);
  CHECK_THROWS_AS(env.step(3, grid), std::out_of_range);
}

TEST_CASE("deterministic episodes replay identically") {
  const auto c = cfg();
  Environment a(c.env, c.patient), b(c.env, c.patient);
  a.reset();
  b.reset();
  for (int i = 0; i < 30; ++i) {
    const double act = 0.03 * (i % 10);
    CHECK(a.step(act).state == b.step(act).state);
  }
}

TEST_CASE("stochastic episodes replay identically for equal seeds only") {
  auto c = cfg();
  c.env.stochastic = true;
  c.env.diffusion_g = 0.05;
  Environment a(c.env, c.patient, 42, 0), b(c.env, c.patient, 42, 0),
      other(c.env, c.patient, 43, 0);
  a.reset();
  b.reset();
  other.reset();
  bool all_equal = true, any_diff_other = false;
  for (int i = 0; i < 15; ++i) {
    const StateVec sa = a.step(0.3).state;
    if (!(sa == b.step(0.3).state)) all_equal = false;
    if (!(sa == other.step(0.3).state)) any_diff_other = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_other);
}

TEST_CASE("episode cost identity holds over a full environment episode") {
  const auto c = cfg();
  Environment env(c.env, c.patient);
  env.reset();
  std::vector<double> rewards;
  double neg_running = 0.0;
  while (!env.done()) {
    const StepResult r = env.step(1.0);
    rewards.push_back(r.reward);
    neg_running += r.reward;
  }
  CHECK(episode_cost(rewards) == -neg_running);
  CHECK(episode_cost(rewards) > 0.0);  // tumor burden accumulates positive cost
}
