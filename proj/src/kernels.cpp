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

#include "qdet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qdet::kernels {

namespace {
// Loops under this many flops are not worth a parallel region.
constexpr double kParallelFlopThreshold = 100000.0;
thread_local int g_thread_cap = 0;
}  // namespace

void set_thread_cap(int n) { g_thread_cap = n; }
int thread_cap() { return g_thread_cap; }

int threads_for(double total_flops) {
#ifdef _OPENMP
  if (total_flops < kParallelFlopThreshold) return 1;
  int n = omp_get_max_threads();
  if (g_thread_cap > 0) n = std::min(n, g_thread_cap);
  return std::max(1, n);
#else
  (void)total_flops;
  return 1;
#endif
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::memset(ci, 0, static_cast<size_t>(n) * sizeof(double));
    const double* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt_acc(const double* g, const double* b, double* c, int64_t m, int64_t n, int64_t k) {
  for (int64_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ci[p] += acc;
    }
  }
}

void gemm_tn_acc(const double* a, const double* g, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t p = 0; p < k; ++p) {
    double* cp = c + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* gi = g + i * n;
      for (int64_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

void vsigmoid(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void vtanh(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void vrelu(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

bool softmax_masked_rows(const double* scores, const double* mask, double* out, int64_t m, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const double* si = scores + i * n;
    const double* mi = mask + i * n;
    double* oi = out + i * n;
    double mx = -HUGE_VAL;
    for (int64_t j = 0; j < n; ++j) {
      if (mi[j] != 0.0 && si[j] > mx) mx = si[j];
    }
    if (mx == -HUGE_VAL) return false;
    double z = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      if (mi[j] != 0.0) {
        oi[j] = std::exp(si[j] - mx);
        z += oi[j];
      } else {
        oi[j] = 0.0;
      }
    }
    const double inv = 1.0 / z;
    for (int64_t j = 0; j < n; ++j) oi[j] *= inv;
  }
  return true;
}

}  // namespace serial

void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  const int nt = threads_for(2.0 * static_cast<double>(m) * static_cast<double>(k) * static_cast<double>(n));
  if (nt <= 1 || m < 2) {
    serial::gemm_nn(a, b, c, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int64_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    std::memset(ci, 0, static_cast<size_t>(n) * sizeof(double));
    const double* ai = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt_acc(const double* g, const double* b, double* c, int64_t m, int64_t n, int64_t k) {
  const int nt = threads_for(2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(k));
  if (nt <= 1 || m < 2) {
    serial::gemm_nt_acc(g, b, c, m, n, k);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int64_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ci[p] += acc;
    }
  }
}

void gemm_tn_acc(const double* a, const double* g, double* c, int64_t m, int64_t k, int64_t n) {
  const int nt = threads_for(2.0 * static_cast<double>(m) * static_cast<double>(k) * static_cast<double>(n));
  if (nt <= 1 || k < 2) {
    serial::gemm_tn_acc(a, g, c, m, k, n);
    return;
  }
  // Parallel over output rows p: each row's accumulation order matches serial.
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int64_t p = 0; p < k; ++p) {
    double* cp = c + p * n;
    for (int64_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* gi = g + i * n;
      for (int64_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

namespace {

template <typename F>
void map_parallel(const double* x, double* y, int64_t n, double flops_per_elem, F&& f) {
  const int nt = threads_for(flops_per_elem * static_cast<double>(n));
  if (nt <= 1) {
    for (int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
    return;
  }
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
}

}  // namespace

void vsigmoid(const double* x, double* y, int64_t n) {
  map_parallel(x, y, n, 20.0, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void vtanh(const double* x, double* y, int64_t n) {
  map_parallel(x, y, n, 20.0, [](double v) { return std::tanh(v); });
}

void vrelu(const double* x, double* y, int64_t n) {
  map_parallel(x, y, n, 1.0, [](double v) { return v > 0.0 ? v : 0.0; });
}

void vadd(const double* a, const double* b, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void vsub(const double* a, const double* b, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void vmul(const double* a, const double* b, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

bool softmax_masked_rows(const double* scores, const double* mask, double* out, int64_t m, int64_t n) {
  const int nt = threads_for(30.0 * static_cast<double>(m) * static_cast<double>(n));
  if (nt <= 1 || m < 2) return serial::softmax_masked_rows(scores, mask, out, m, n);
  bool ok = true;
#pragma omp parallel for schedule(static) num_threads(nt) reduction(&& : ok)
  for (int64_t i = 0; i < m; ++i) {
    ok = serial::softmax_masked_rows(scores + i * n, mask + i * n, out + i * n, 1, n) && ok;
  }
  return ok;
}

}  // namespace qdet::kernels
