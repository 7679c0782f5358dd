// OpenMP kernels against their serial references: wall time and agreement.
#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <functional>

#include "csk/conv.hpp"
#include "csk/kernel.hpp"
#include "csk/train.hpp"

namespace {

double best_seconds(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return 1e300;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct Row {
  std::string name;
  double serial, parallel, diff;
};

void print(const Row& r) {
  std::printf("%-34s %10.4f %10.4f %8.2fx %10.2e\n", r.name.c_str(), r.serial * 1e3,
              r.parallel * 1e3, r.serial / r.parallel, r.diff);
}

Row bench_kernel(const std::string& name, const csk::Signature& sig, std::vector<int> grid,
                 int c, int width, int reps) {
  csk::KernelConfig cfg;
  cfg.sig = sig;
  cfg.grid = std::move(grid);
  cfg.c_in = cfg.c_out = c;
  cfg.depth = 3;
  cfg.width = width;
  cfg.seed = 3;
  const csk::KernelParams params = csk::init_kernel(cfg);
  csk::SteerableKernel ks, kp;
  const double ts = best_seconds([&] { ks = csk::generate_kernel_serial(params); }, reps);
  const double tp = best_seconds([&] { kp = csk::generate_kernel(params); }, reps);
  return {name, ts, tp, max_abs_diff(ks.data, kp.data)};
}

Row bench_conv(const std::string& name, const csk::Signature& sig, std::vector<int> field,
               std::vector<int> grid, int c, int reps) {
  csk::KernelConfig cfg;
  cfg.sig = sig;
  cfg.grid = std::move(grid);
  cfg.c_in = cfg.c_out = c;
  cfg.seed = 5;
  const csk::SteerableKernel k = csk::generate_kernel(csk::init_kernel(cfg));
  csk::Rng rng(11);
  const csk::MultivectorField f = csk::synth_field(sig, field, c, 1.0, rng);
  csk::MultivectorField ys, yp;
  const double ts = best_seconds([&] { ys = csk::conv_forward_serial(f, k); }, reps);
  const double tp = best_seconds([&] { yp = csk::conv_forward(f, k); }, reps);
  return {name, ts, tp, max_abs_diff(ys.data, yp.data)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parallel vs serial benchmark"};
  int reps = 3;
  int threads = 0;
  app.add_option("--reps", reps, "repetitions, best time reported")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-34s %10s %10s %9s %10s\n", "case", "serial ms", "omp ms", "speedup", "max|diff|");
  std::vector<Row> rows{
      bench_kernel("kernel (2,0) 9x9 c4 w16", {2, 0}, {9, 9}, 4, 16, reps),
      bench_kernel("kernel (1,2) 7^3 c2 w8", {1, 2}, {7, 7, 7}, 2, 8, reps),
      bench_conv("conv (2,0) 64^2 c4 k5", {2, 0}, {64, 64}, {5, 5}, 4, reps),
      bench_conv("conv (1,1) 96^2 c2 k7", {1, 1}, {96, 96}, {7, 7}, 2, reps),
      bench_conv("conv (3,0) 24^3 c2 k3", {3, 0}, {24, 24, 24}, {3, 3, 3}, 2, reps),
  };
  bool ok = true;
  for (const Row& r : rows) {
    print(r);
    ok = ok && r.diff <= 1e-12;
  }
  if (!ok) std::printf("MISMATCH between serial and parallel results\n");
  return ok ? 0 : 1;
}
