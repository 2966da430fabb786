// Copyright 2026 The qdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Compares the OpenMP kernels against the serial reference at the matrix
// sizes the models actually hit, plus some larger ones. The parallel
// kernels must be bit-identical to serial; this reports only speed.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "qdet/kernels.hpp"
#include "qdet/rng.hpp"

using qdet::RandomStream;
namespace kernels = qdet::kernels;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() / reps;
}

void bench_gemm(int64_t m, int64_t k, int64_t n) {
  RandomStream rng(7);
  std::vector<double> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n)),
      c(static_cast<size_t>(m * n));
  for (double& v : a) v = rng.uniform(-1.0, 1.0);
  for (double& v : b) v = rng.uniform(-1.0, 1.0);

  const int reps = m * k * n > 1000000 ? 20 : 200;
  const double serial_ms =
      time_ms(reps, [&] { kernels::serial::gemm_nn(a.data(), b.data(), c.data(), m, k, n); });
  const double parallel_ms =
      time_ms(reps, [&] { kernels::gemm_nn(a.data(), b.data(), c.data(), m, k, n); });
  const double gflops = 2.0 * m * k * n / 1e9;
  std::printf("gemm %4lldx%4lldx%4lld  serial %8.3f ms (%6.2f GF/s)  omp %8.3f ms (%6.2f GF/s)  speedup %.2fx\n",
              static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n),
              serial_ms, gflops / (serial_ms / 1e3), parallel_ms, gflops / (parallel_ms / 1e3),
              serial_ms / parallel_ms);
}

void bench_sigmoid(int64_t n) {
  RandomStream rng(9);
  std::vector<double> x(static_cast<size_t>(n)), y(static_cast<size_t>(n));
  for (double& v : x) v = rng.uniform(-4.0, 4.0);
  const int reps = 100;
  const double serial_ms = time_ms(reps, [&] { kernels::serial::vsigmoid(x.data(), y.data(), n); });
  const double parallel_ms = time_ms(reps, [&] { kernels::vsigmoid(x.data(), y.data(), n); });
  std::printf("sigmoid n=%-9lld serial %8.3f ms             omp %8.3f ms             speedup %.2fx\n",
              static_cast<long long>(n), serial_ms, parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  std::printf("kernel benchmark (thread cap %d)\n", kernels::thread_cap());
  // Minibatch-sized shapes from the models.
  bench_gemm(32, 52, 200);
  bench_gemm(32, 200, 200);
  bench_gemm(32, 400, 400);
  // Larger shapes where the parallel split pays off.
  bench_gemm(256, 256, 256);
  bench_gemm(512, 512, 512);
  bench_gemm(1024, 512, 512);
  bench_sigmoid(1 << 16);
  bench_sigmoid(1 << 22);
  return 0;
}
