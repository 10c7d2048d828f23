#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "chemo/config.hpp"
#include "chemo/csv.hpp"
#include "chemo/dynamics.hpp"
#include "chemo/rng.hpp"

using namespace chemo;

namespace {

PatientParams nominal() {
  return load_config(CHEMO_DEFAULT_CONFIG).patient;
}

// Parameters that zero the entire drift field except the drug equation:
// only decay/influx constants that must stay positive are kept at 1.
PatientParams inert() {
  PatientParams p;
  p.b1 = p.b2 = p.d2 = p.alpha = 1.0;
  p.x0 = {0, 0, 0, 0};
  return p;
}

}  // namespace

TEST_CASE("drift matches hand-evaluated rates at the nominal initial state") {
  const auto p = nominal();
  const StateVec x{1.0, 0.7, 1.0, 0.0};
  const StateVec f = drift(x, 10.0, p);
  // Hand evaluation: dN = 1*1*0 - 0.7 - 0 = -0.7
  //                  dT = 1.5*0.7*0.3 - 0.5*0.7 - 0.7 - 0 = -0.735
  //                  dI = 0.33 + 0.01*0.7/1.0 - 0.7 - 0.2 - 0 = -0.563
  //                  dC = -0 + 10 = 10
  CHECK(f.N == doctest::Approx(-0.7).epsilon(1e-14));
  CHECK(f.T == doctest::Approx(-0.735).epsilon(1e-14));
  CHECK(f.I == doctest::Approx(-0.563).epsilon(1e-14));
  CHECK(f.C == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("drift at the origin reduces to the constant immune influx") {
  const auto p = nominal();
  const StateVec f = drift({0, 0, 0, 0}, 0.0, p);
  CHECK(f.N == 0.0);
  CHECK(f.T == 0.0);
  CHECK(f.I == doctest::Approx(0.33).epsilon(1e-15));
  CHECK(f.C == 0.0);
}

TEST_CASE("drift rejects non-finite input with a diagnostic") {
  const auto p = nominal();
  CHECK_THROWS_AS(drift({std::nan(""), 0, 0, 0}, 0.0, p), std::invalid_argument);
  CHECK_THROWS_AS(drift({0, 0, 0, 0}, std::numeric_limits<double>::infinity(), p),
                  std::invalid_argument);
}

TEST_CASE("analytic jacobian matches central finite differences") {
  const auto p = nominal();
  RngStream rng(42, 7);
  for (int trial = 0; trial < 20; ++trial) {
    StateVec x{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0),
               rng.uniform(0.0, 8.0)};
    const double u = rng.uniform(0.0, 10.0);
    double A[4][4], B[4];
    drift_jacobian(x, u, p, A, B);
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
      StateVec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const StateVec fp = drift(xp, u, p), fm = drift(xm, u, p);
      for (int i = 0; i < 4; ++i) {
        const double fd = (fp[i] - fm[i]) / (2 * h);
        CHECK(A[i][j] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      }
    }
    const StateVec fup = drift(x, u + h, p), fum = drift(x, u - h, p);
    for (int i = 0; i < 4; ++i)
      CHECK(B[i] == doctest::Approx((fup[i] - fum[i]) / (2 * h)).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("weighted drift hessian matches differenced jacobian rows") {
  const auto p = nominal();
  RngStream rng(43, 9);
  for (int trial = 0; trial < 20; ++trial) {
    StateVec x{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0),
               rng.uniform(0.0, 8.0)};
    const double u = rng.uniform(0.0, 10.0);
    const double w[4] = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                         rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    double M[4][4];
    drift_weighted_hessian(x, p, w, M);
    // Symmetry is part of the contract.
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) CHECK(M[a][b] == M[b][a]);
    // Central difference of the weighted jacobian rows: d/dx_b of
    // sum_i w_i A[i][a] equals M[a][b].
    const double h = 1e-6;
    for (int b = 0; b < 4; ++b) {
      StateVec xp = x, xm = x;
      xp[b] += h;
      xm[b] -= h;
      double Ap[4][4], Am[4][4], Bp[4], Bm[4];
      drift_jacobian(xp, u, p, Ap, Bp);
      drift_jacobian(xm, u, p, Am, Bm);
      for (int a = 0; a < 4; ++a) {
        double fd = 0.0;
        for (int i = 0; i < 4; ++i) fd += w[i] * (Ap[i][a] - Am[i][a]) / (2 * h);
        CHECK(M[a][b] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      }
      // The dose column of the jacobian is state-independent.
      for (int i = 0; i < 4; ++i) CHECK(Bp[i] == Bm[i]);
    }
  }
}

TEST_CASE("rk4 step leaves a zero-drift state bit-identical") {
  const auto p = inert();
  const StateVec x{1.25, 0.5, 2.0, 0.0};
  const StateVec y = rk4_step(x, 0.0, 0.3, p);
  CHECK(y == x);
}

TEST_CASE("rk4 step reproduces the closed-form linear drug subsystem") {
  // Only dC = -d2 C + u is active; C(t) = u/d2 + (C0 - u/d2) exp(-d2 t).
  auto p = inert();
  const double u = 3.0, dt = 0.1, C0 = 2.0;
  const StateVec y = rk4_step({0, 0, 0, C0}, u, dt, p);
  const double exact = u / p.d2 + (C0 - u / p.d2) * std::exp(-p.d2 * dt);
  // Local truncation of RK4 on exp decay: |poly4(-dt) - exp(-dt)| ~ dt^5/120.
  CHECK(std::abs(y.C - exact) < 2e-7);
  CHECK(std::abs(y.C - exact) > 1e-9);  // genuinely integrated, not closed-form
  CHECK(y.N == 0.0);
  CHECK(y.T == 0.0);
  CHECK(y.I == 0.0);
}

TEST_CASE("rk4 shows fourth-order global convergence on the full model") {
  const auto p = nominal();
  const StateVec x0 = p.x0;
  const double horizon = 3.0, u = 10.0;
  auto integrate = [&](int n) {
    StateVec x = x0;
    const double h = horizon / n;
    for (int i = 0; i < n; ++i) x = rk4_step(x, u, h, p);
    return x;
  };
  const StateVec ref = integrate(4096);
  auto err = [&](const StateVec& a) {
    double e = 0;
    for (int i = 0; i < 4; ++i) e = std::max(e, std::abs(a[i] - ref[i]));
    return e;
  };
  const double e1 = err(integrate(128));
  const double e2 = err(integrate(256));
  CHECK(e1 > 0);
  const double ratio = e1 / e2;
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("rk4 clamps negative excursions to zero") {
  // Strong kill on a tiny tumor with a huge step drives T negative pre-clamp.
  auto p = inert();
  p.d2 = 5.0;
  const StateVec y = rk4_step({0, 0, 0, 1.0}, 0.0, 2.0, p);
  CHECK(y.C >= 0.0);
}

TEST_CASE("euler-maruyama with zero diffusion equals an explicit euler step bitwise") {
  const auto p = nominal();
  StateVec x = p.x0;
  const double dt = 0.01, u = 4.0;
  for (int i = 0; i < 50; ++i) {
    const StateVec f = drift(x, u, p);
    StateVec manual = x + dt * f;
    manual.N = std::max(manual.N, 0.0);
    manual.T = std::max(manual.T, 0.0);
    manual.I = std::max(manual.I, 0.0);
    manual.C = std::max(manual.C, 0.0);
    const StateVec em = euler_maruyama_step(x, u, dt, 0.0, 1.7, p);
    CHECK(em == manual);
    x = em;
  }
}

TEST_CASE("euler-maruyama noise enters only the tumor equation") {
  const auto p = nominal();
  const StateVec x = p.x0;
  const double dt = 0.01, u = 4.0, g = 0.2, z = 1.5;
  const StateVec base = euler_maruyama_step(x, u, dt, 0.0, z, p);
  const StateVec pert = euler_maruyama_step(x, u, dt, g, z, p);
  CHECK(pert.N == base.N);
  CHECK(pert.I == base.I);
  CHECK(pert.C == base.C);
  CHECK(pert.T == doctest::Approx(base.T + g * std::sqrt(dt) * z).epsilon(1e-15));
}

TEST_CASE("euler-maruyama clamps a negative tumor draw to zero") {
  const auto p = nominal();
  const StateVec y = euler_maruyama_step({1.0, 1e-3, 1.0, 0.0}, 0.0, 0.01, 1.0, -5.0, p);
  CHECK(y.T == 0.0);
}

TEST_CASE("euler scheme converges at first order on the drug subsystem") {
  auto p = inert();
  const double u = 3.0, horizon = 1.0, C0 = 2.0;
  auto integrate = [&](int n) {
    StateVec x{0, 0, 0, C0};
    const double h = horizon / n;
    for (int i = 0; i < n; ++i) x = euler_maruyama_step(x, u, h, 0.0, 0.0, p);
    return x.C;
  };
  const double exact = u / p.d2 + (C0 - u / p.d2) * std::exp(-p.d2 * horizon);
  const double e1 = std::abs(integrate(200) - exact);
  const double e2 = std::abs(integrate(400) - exact);
  const double ratio = e1 / e2;
  CHECK(ratio > 1.8);
  CHECK(ratio < 2.2);
}

TEST_CASE("tumor-free state is absorbing under simulation") {
  const auto p = nominal();
  SimOptions opt;
  opt.horizon_days = 30.0;
  const Trajectory traj = simulate(ConstantPolicy(0.0), p, {1.0, 0.0, 1.0, 0.0}, opt);
  CHECK(traj.cure_time == 0.0);
  for (const auto& s : traj.x) CHECK(s.T == 0.0);
}

TEST_CASE("untreated tumor persists from the nominal initial state") {
  const auto p = nominal();
  SimOptions opt;
  opt.horizon_days = 150.0;
  const Trajectory traj = simulate(ConstantPolicy(0.0), p, p.x0, opt);
  CHECK_FALSE(traj.cured());
  // Reference endpoint from an adaptive high-accuracy integration: T(150) = 0.56433.
  CHECK(traj.final_T() == doctest::Approx(0.56433).epsilon(2e-3));
  CHECK(traj.t.size() == 501);
  CHECK(traj.u.size() == 501);
}

TEST_CASE("constant maximum dose cures quickly and monotonically") {
  const auto p = nominal();
  SimOptions opt;
  opt.horizon_days = 9.0;
  const Trajectory traj = simulate(ConstantPolicy(10.0), p, p.x0, opt);
  REQUIRE(traj.cured());
  CHECK(traj.cure_time > 2.7);
  CHECK(traj.cure_time < 2.9);
  CHECK_FALSE(traj.clipped_dose);
  for (size_t i = 1; i < traj.x.size(); ++i)
    CHECK(traj.x[i].T <= traj.x[i - 1].T + 1e-12);
}

TEST_CASE("doses outside the admissible range are saturated and flagged") {
  const auto p = nominal();
  SimOptions opt;
  opt.horizon_days = 0.9;
  const Trajectory traj = simulate(ConstantPolicy(12.0), p, p.x0, opt);
  CHECK(traj.clipped_dose);
  for (size_t i = 0; i + 1 < traj.u.size(); ++i) CHECK(traj.u[i] == 10.0);

  const Trajectory neg = simulate(ConstantPolicy(-3.0), p, p.x0, opt);
  CHECK(neg.clipped_dose);
  for (double u : neg.u) CHECK(u == 0.0);
}

TEST_CASE("stochastic simulation with zero diffusion equals a manual euler rollout") {
  const auto p = nominal();
  SimOptions opt;
  opt.horizon_days = 3.0;
  opt.stochastic = true;
  opt.diffusion_g = 0.0;
  opt.seed = 123;
  const Trajectory traj = simulate(ConstantPolicy(6.0), p, p.x0, opt);

  StateVec x = p.x0;
  const double h = opt.dt_days / opt.em_substeps;
  size_t idx = 1;
  for (int k = 0; k < 10; ++k) {
    for (int i = 0; i < opt.em_substeps; ++i) {
      StateVec nx = x + h * drift(x, 6.0, p);
      nx.N = std::max(nx.N, 0.0);
      nx.T = std::max(nx.T, 0.0);
      nx.I = std::max(nx.I, 0.0);
      nx.C = std::max(nx.C, 0.0);
      x = nx;
    }
    REQUIRE(idx < traj.x.size());
    CHECK(traj.x[idx] == x);
    ++idx;
  }
}

TEST_CASE("stochastic simulation is reproducible per stream and distinct across streams") {
  const auto p = nominal();
  SimOptions opt;
  opt.horizon_days = 6.0;
  opt.stochastic = true;
  opt.diffusion_g = 0.05;
  opt.seed = 99;
  opt.stream = 3;
  const Trajectory a = simulate(ConstantPolicy(5.0), p, p.x0, opt);
  const Trajectory b = simulate(ConstantPolicy(5.0), p, p.x0, opt);
  REQUIRE(a.x.size() == b.x.size());
  for (size_t i = 0; i < a.x.size(); ++i) CHECK(a.x[i] == b.x[i]);

  opt.stream = 4;
  const Trajectory c = simulate(ConstantPolicy(5.0), p, p.x0, opt);
  bool any_diff = false;
  for (size_t i = 0; i < a.x.size(); ++i)
    if (!(a.x[i] == c.x[i])) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("simulate rejects invalid initial states and options") {
  const auto p = nominal();
  SimOptions opt;
  CHECK_THROWS_AS(simulate(ConstantPolicy(0), p, {-1, 0, 0, 0}, opt),
                  std::invalid_argument);
  SimOptions bad = opt;
  bad.dt_days = 0.0;
  CHECK_THROWS_AS(simulate(ConstantPolicy(0), p, p.x0, bad), std::invalid_argument);
}

TEST_CASE("patient parameter validation names the offending field") {
  auto p = nominal();
  p.r1 = -0.1;
  CHECK_THROWS_WITH_AS(p.validate(),
                       doctest::Contains("r1"), std::invalid_argument);
  p = nominal();
  p.b2 = 0.0;
  CHECK_THROWS_WITH_AS(p.validate(),
                       doctest::Contains("b2"), std::invalid_argument);
  p = nominal();
  p.s = std::nan("");
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = nominal();
  p.x0.T = -0.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("trajectory csv round-trips exact doubles") {
  const auto p = nominal();
  SimOptions opt;
  opt.horizon_days = 4.5;
  const Trajectory traj = simulate(ConstantPolicy(7.3), p, p.x0, opt);
  const auto path = std::filesystem::temp_directory_path() / "chemo_traj_test.csv";
  write_trajectory_csv(traj, path.string());
  const Trajectory back = read_trajectory_csv(path.string());
  REQUIRE(back.t.size() == traj.t.size());
  for (size_t i = 0; i < traj.t.size(); ++i) {
    CHECK(back.t[i] == traj.t[i]);
    CHECK(back.x[i] == traj.x[i]);
    CHECK(back.u[i] == traj.u[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv reader rejects malformed headers") {
  const auto path = std::filesystem::temp_directory_path() / "chemo_badhdr.csv";
  {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    REQUIRE(f);
    std::fputs("time,N,T,I,C,u\n0,1,1,1,0,0\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_trajectory_csv(path.string()), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("default config loads with the documented model constants") {
  const RunConfig cfg = load_config(CHEMO_DEFAULT_CONFIG);
  CHECK(cfg.patient.r1 == 1.5);
  CHECK(cfg.patient.s == 0.33);
  CHECK(cfg.patient.rho == 0.01);
  CHECK(cfg.patient.x0 == StateVec{1.0, 0.7, 1.0, 0.0});
  CHECK(cfg.env.dt_days == 0.3);
  CHECK(cfg.env.max_steps == 500);
  CHECK(cfg.env.norm_scales == StateVec{2.0, 5.0, 2.0, 10.0});
  CHECK(cfg.ocp.nodes == 200);
  CHECK(cfg.dqn.hidden_units == 100);
  CHECK(cfg.ddpg.hidden_units == 300);
  CHECK(cfg.ddpg.gamma == 0.995);
}

TEST_CASE("config errors carry the offending key") {
  CHECK_THROWS_AS(parse_config_text("{"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("{}"), ConfigError);

  // Flip one value in the default file and expect a named complaint.
  std::ifstream f(CHEMO_DEFAULT_CONFIG);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  const auto pos = text.find("\"dt_days\": 0.3");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 14, "\"dt_days\": -1.0");
  CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("dt_days"),
                       ConfigError);
}

TEST_CASE("rng streams are deterministic and well separated") {
  RngStream a(1234, 0), b(1234, 0), c(1234, 1);
  for (int i = 0; i < 100; ++i) {
    const double va = a.uniform();
    CHECK(va == b.uniform());
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  bool differ = false;
  RngStream a2(1234, 0);
  for (int i = 0; i < 100; ++i)
    if (a2.uniform() != c.uniform()) differ = true;
  CHECK(differ);
}

TEST_CASE("box-muller normals have sane first moments") {
  RngStream rng(777, 0);
  const int n = 200000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.01));
}
