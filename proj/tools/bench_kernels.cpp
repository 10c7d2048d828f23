// Benchmarks the OpenMP-parallel kernels against their serial reference
// paths and verifies that both produce bit-identical results before timing
// them. Exits nonzero if any kernel disagrees with its reference.
//
//   kernel                when parallel                       reference
//   mlp forward+backward  row chunks across OpenMP threads    forward_serial/backward_serial
//   policy sweep          (value x policy) grid of episodes   workers = 1
//   stochastic ensemble   independent noise-driven runs       workers = 1

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chemo/config.hpp"
#include "chemo/dynamics.hpp"
#include "chemo/experiments.hpp"
#include "chemo/net.hpp"
#include "chemo/rng.hpp"

namespace {

using namespace chemo;

double bench_ms(const std::function<void()>& fn, int repeats = 5) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

bool same(double a, double b) {
  return a == b || (std::isnan(a) && std::isnan(b));
}

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 || (a.array() == b.array()).all());
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same(a[i], b[i])) return false;
  return true;
}

bool same(const EvalReport& a, const EvalReport& b) {
  return same(a.cost, b.cost) && a.cured == b.cured &&
         same(a.days_to_cure, b.days_to_cure) && same(a.min_n, b.min_n) &&
         same(a.min_i, b.min_i) && same(a.min_t, b.min_t) &&
         same(a.violation_days_n, b.violation_days_n) &&
         same(a.violation_days_i, b.violation_days_i) && a.steps == b.steps;
}

void report(const char* kernel, const char* work, double serial_ms,
            double parallel_ms, bool match) {
  std::printf("%-22s %-18s %10.2f %12.2f %8.1fx  %s\n", kernel, work, serial_ms,
              parallel_ms, serial_ms / parallel_ms, match ? "yes" : "NO");
}

}  // namespace

int main() {
  const int threads = omp_get_max_threads();
  std::printf("threads=%d\n", threads);
  std::printf("%-22s %-18s %10s %12s %9s  %s\n", "kernel", "work", "serial_ms",
              "parallel_ms", "speedup", "match");
  bool all_match = true;

  // --- MLP forward + backward over row chunks -----------------------------
  {
    RngStream rng(2024, 1);
    const Net net = Net::make(5, {100, 100, 100}, 1, Head::linear, rng);
    const int batch = 512, chunks = 2 * threads;
    Eigen::MatrixXd X(batch, 5);
    for (int r = 0; r < batch; ++r)
      for (int c = 0; c < 5; ++c) X(r, c) = rng.uniform(-1.0, 1.0);
    const Eigen::MatrixXd dOut =
        Eigen::MatrixXd::Constant(batch, 1, 1.0 / batch);

    FwdCache cs, cp;
    const Eigen::MatrixXd Ys = forward_serial(net, X, &cs, chunks);
    const Eigen::MatrixXd Yp = forward(net, X, &cp, chunks);
    Eigen::MatrixXd dXs, dXp;
    const Grads gs = backward_serial(net, cs, dOut, &dXs, chunks);
    const Grads gp = backward(net, cp, dOut, &dXp, chunks);
    bool match = same(Ys, Yp) && same(dXs, dXp);
    for (std::size_t l = 0; l < gs.W.size(); ++l)
      match = match && same(gs.W[l], gp.W[l]) &&
              same(Eigen::MatrixXd(gs.b[l]), Eigen::MatrixXd(gp.b[l]));

    const int inner = 20;
    const double ser = bench_ms([&] {
      for (int i = 0; i < inner; ++i) {
        FwdCache c;
        forward_serial(net, X, &c, chunks);
        backward_serial(net, c, dOut, nullptr, chunks);
      }
    });
    const double par = bench_ms([&] {
      for (int i = 0; i < inner; ++i) {
        FwdCache c;
        forward(net, X, &c, chunks);
        backward(net, c, dOut, nullptr, chunks);
      }
    });
    report("mlp forward+backward", "512x(5-100^3-1)", ser, par, match);
    all_match = all_match && match;
  }

  // Both episode kernels reuse the shipped nominal configuration.
  const RunConfig cfg = load_config(CHEMO_DEFAULT_CONFIG);
  const ConstantPolicy zero(0.0), half(5.0), full(10.0);
  const PolicySet policies{{"zero", &zero}, {"half", &half}, {"full", &full}};

  // --- Robustness sweep: one episode per (value, policy) ------------------
  {
    std::vector<double> grid;
    for (int i = 0; i < 48; ++i) grid.push_back(1.3 + 0.4 * i / 47.0);

    const SweepResult ref =
        r1_policy_robustness(policies, cfg.env, cfg.patient, grid, 1);
    const SweepResult par =
        r1_policy_robustness(policies, cfg.env, cfg.patient, grid, threads);
    bool match = ref.entries.size() == par.entries.size();
    for (std::size_t i = 0; match && i < ref.entries.size(); ++i)
      match = ref.entries[i].method == par.entries[i].method &&
              same(ref.entries[i].value, par.entries[i].value) &&
              same(ref.entries[i].report, par.entries[i].report);

    const double ser = bench_ms(
        [&] { r1_policy_robustness(policies, cfg.env, cfg.patient, grid, 1); });
    const double parms = bench_ms([&] {
      r1_policy_robustness(policies, cfg.env, cfg.patient, grid, threads);
    });
    report("policy sweep", "144 episodes", ser, parms, match);
    all_match = all_match && match;
  }

  // --- Stochastic ensemble: independent runs ------------------------------
  {
    const int runs = 96;
    const MCSummary ref =
        stochastic_mc(policies, cfg.env, cfg.patient, 0.05, runs, 7, 30.0, 1);
    const MCSummary par = stochastic_mc(policies, cfg.env, cfg.patient, 0.05,
                                        runs, 7, 30.0, threads);
    bool match = ref.methods.size() == par.methods.size();
    for (std::size_t m = 0; match && m < ref.methods.size(); ++m) {
      const McMethodStats& a = ref.methods[m];
      const McMethodStats& b = par.methods[m];
      match = a.runs_t == b.runs_t && same(a.mean_t, b.mean_t) &&
              same(a.std_t, b.std_t) && same(a.mean_final_t, b.mean_final_t);
    }

    const double ser = bench_ms([&] {
      stochastic_mc(policies, cfg.env, cfg.patient, 0.05, runs, 7, 30.0, 1);
    });
    const double parms = bench_ms([&] {
      stochastic_mc(policies, cfg.env, cfg.patient, 0.05, runs, 7, 30.0, threads);
    });
    report("stochastic ensemble", "288 runs", ser, parms, match);
    all_match = all_match && match;
  }

  if (!all_match) {
    std::fprintf(stderr, "FAIL: a parallel kernel diverged from its serial reference\n");
    return 1;
  }
  return 0;
}
