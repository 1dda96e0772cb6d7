// SPDX-License-Identifier: Apache-2.0
//
// Serial reference kernels against their OpenMP counterparts. Prints one CSV
// row per (kernel, size) with median times and whether outputs are
// bit-identical. Thread count follows OMP_NUM_THREADS.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gnot/kernels.hpp"

namespace k = gnot::kernels;

namespace {

double median_ms(const std::function<void()>& fn, int repeats) {
  std::vector<double> ts;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    ts.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ts.begin(), ts.end());
  return ts[ts.size() / 2];
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

void report(const char* kernel, const std::string& size, double serial, double parallel, bool same) {
  std::printf("%s,%s,%.3f,%.3f,%.2f,%s\n", kernel, size.c_str(), serial, parallel, serial / parallel,
              same ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(1);
  bool all_same = true;
  std::printf("# threads=%d\n", omp_get_max_threads());
  std::printf("kernel,size,serial_ms,parallel_ms,speedup,bit_identical\n");

  for (std::size_t n : {128, 256, 512}) {
    const auto a = random_vec(n * n, rng), b = random_vec(n * n, rng);
    std::vector<double> cs(n * n), cp(n * n);
    const double ts = median_ms([&] { k::serial::gemm_nn(n, n, n, a.data(), b.data(), cs.data(), false); }, repeats);
    const double tp = median_ms([&] { k::parallel::gemm_nn(n, n, n, a.data(), b.data(), cp.data(), false); }, repeats);
    const bool same = cs == cp;
    all_same &= same;
    report("gemm_nn", std::to_string(n), ts, tp, same);

    const double ts2 = median_ms([&] { k::serial::gemm_tn(n, n, n, a.data(), b.data(), cs.data(), false); }, repeats);
    const double tp2 = median_ms([&] { k::parallel::gemm_tn(n, n, n, a.data(), b.data(), cp.data(), false); }, repeats);
    const bool same2 = cs == cp;
    all_same &= same2;
    report("gemm_tn", std::to_string(n), ts2, tp2, same2);
  }

  const std::size_t d = 64;
  for (std::size_t m : {1024, 4096}) {
    const auto q = random_vec(m * d, rng), kk = random_vec(m * d, rng), v = random_vec(m * d, rng);
    std::vector<double> os(m * d), op(m * d);
    const std::string size = std::to_string(m) + "x" + std::to_string(d);
    const double ts = median_ms([&] {
      k::serial::normalized_attention_direct(m, m, d, q.data(), kk.data(), v.data(), {}, os.data());
    }, repeats);
    const double tp = median_ms([&] {
      k::parallel::normalized_attention_direct(m, m, d, q.data(), kk.data(), v.data(), {}, op.data());
    }, repeats);
    bool same = os == op;
    all_same &= same;
    report("attention_direct", size, ts, tp, same);

    const double ts2 = median_ms([&] {
      k::serial::normalized_attention_factored(m, m, d, q.data(), kk.data(), v.data(), {}, os.data());
    }, repeats);
    const double tp2 = median_ms([&] {
      k::parallel::normalized_attention_factored(m, m, d, q.data(), kk.data(), v.data(), {}, op.data());
    }, repeats);
    same = os == op;
    all_same &= same;
    report("attention_factored", size, ts2, tp2, same);
  }
  return all_same ? 0 : 1;
}
