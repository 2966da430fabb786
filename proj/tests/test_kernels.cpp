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

#include <doctest.h>

#include <tuple>
#include <vector>

#include "qdet/kernels.hpp"
#include "qdet/rng.hpp"

using qdet::RandomStream;
namespace kernels = qdet::kernels;

namespace {

std::vector<double> random_vec(int64_t n, uint64_t seed) {
  RandomStream rng(seed);
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("gemm_nn matches a hand triple loop") {
  const int64_t m = 7, k = 5, n = 9;
  const auto a = random_vec(m * k, 1);
  const auto b = random_vec(k * n, 2);
  std::vector<double> c(static_cast<size_t>(m * n));
  kernels::gemm_nn(a.data(), b.data(), c.data(), m, k, n);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  // Sizes straddling the work threshold so both paths execute.
  for (auto [m, k, n] : {std::tuple<int64_t, int64_t, int64_t>{4, 6, 8},
                         std::tuple<int64_t, int64_t, int64_t>{64, 128, 96},
                         std::tuple<int64_t, int64_t, int64_t>{128, 200, 200}}) {
    const auto a = random_vec(m * k, 11 + m);
    const auto b = random_vec(k * n, 13 + n);
    std::vector<double> c1(static_cast<size_t>(m * n)), c2(static_cast<size_t>(m * n));
    kernels::serial::gemm_nn(a.data(), b.data(), c1.data(), m, k, n);
    kernels::gemm_nn(a.data(), b.data(), c2.data(), m, k, n);
    CHECK(c1 == c2);

    const auto g = random_vec(m * n, 17);
    std::vector<double> d1(static_cast<size_t>(m * k), 0.5), d2(static_cast<size_t>(m * k), 0.5);
    kernels::serial::gemm_nt_acc(g.data(), b.data(), d1.data(), m, n, k);
    kernels::gemm_nt_acc(g.data(), b.data(), d2.data(), m, n, k);
    CHECK(d1 == d2);

    std::vector<double> e1(static_cast<size_t>(k * n), -0.25), e2(static_cast<size_t>(k * n), -0.25);
    kernels::serial::gemm_tn_acc(a.data(), g.data(), e1.data(), m, k, n);
    kernels::gemm_tn_acc(a.data(), g.data(), e2.data(), m, k, n);
    CHECK(e1 == e2);
  }

  const auto x = random_vec(200000, 23);
  std::vector<double> y1(x.size()), y2(x.size());
  kernels::serial::vsigmoid(x.data(), y1.data(), static_cast<int64_t>(x.size()));
  kernels::vsigmoid(x.data(), y2.data(), static_cast<int64_t>(x.size()));
  CHECK(y1 == y2);
  kernels::serial::vtanh(x.data(), y1.data(), static_cast<int64_t>(x.size()));
  kernels::vtanh(x.data(), y2.data(), static_cast<int64_t>(x.size()));
  CHECK(y1 == y2);

  const int64_t rows = 64, cols = 33;
  const auto scores = random_vec(rows * cols, 29);
  std::vector<double> mask(static_cast<size_t>(rows * cols), 1.0);
  mask[5] = 0.0;
  std::vector<double> s1(scores.size()), s2(scores.size());
  CHECK(kernels::serial::softmax_masked_rows(scores.data(), mask.data(), s1.data(), rows, cols));
  CHECK(kernels::softmax_masked_rows(scores.data(), mask.data(), s2.data(), rows, cols));
  CHECK(s1 == s2);
}

TEST_CASE("thread cap is honored and reversible") {
  kernels::set_thread_cap(1);
  CHECK(kernels::thread_cap() == 1);
  CHECK(kernels::threads_for(1e9) == 1);
  kernels::set_thread_cap(0);
  CHECK(kernels::threads_for(10.0) == 1);  // tiny work stays serial
}

}  // TEST_SUITE
