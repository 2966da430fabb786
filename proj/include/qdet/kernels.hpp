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

#ifndef QDET_KERNELS_HPP_
#define QDET_KERNELS_HPP_

#include <cstdint>

namespace qdet::kernels {

// Per-thread cap on kernel parallelism. 0 means "use the OpenMP default".
// Grid workers set this to 1 so cell-level parallelism is not stacked on
// top of kernel-level parallelism.
void set_thread_cap(int n);
int thread_cap();

// Effective thread count for a loop with `total_flops` of work. Loops below
// the work threshold run serially; parallel runs split disjoint output rows
// across threads, so results are bit-identical to serial at any count.
int threads_for(double total_flops);

// c = a(m x k) . b(k x n), row-major.
void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
// c(m x k) += g(m x n) . b(k x n)^T
void gemm_nt_acc(const double* g, const double* b, double* c, int64_t m, int64_t n, int64_t k);
// c(k x n) += a(m x k)^T . g(m x n)
void gemm_tn_acc(const double* a, const double* g, double* c, int64_t m, int64_t k, int64_t n);

void vsigmoid(const double* x, double* y, int64_t n);
void vtanh(const double* x, double* y, int64_t n);
void vrelu(const double* x, double* y, int64_t n);
void vadd(const double* a, const double* b, double* y, int64_t n);
void vsub(const double* a, const double* b, double* y, int64_t n);
void vmul(const double* a, const double* b, double* y, int64_t n);

// Row-wise masked softmax over an (m x n) matrix; masked entries are
// exactly zero and each row is shifted by its masked max before exp.
// Returns false if some row has an all-zero mask (caller raises).
bool softmax_masked_rows(const double* scores, const double* mask, double* out, int64_t m, int64_t n);

double sigmoid(double x);

// Serial reference implementations, kept for tests and the kernel
// benchmark. These never spawn threads.
namespace serial {
void gemm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void gemm_nt_acc(const double* g, const double* b, double* c, int64_t m, int64_t n, int64_t k);
void gemm_tn_acc(const double* a, const double* g, double* c, int64_t m, int64_t k, int64_t n);
void vsigmoid(const double* x, double* y, int64_t n);
void vtanh(const double* x, double* y, int64_t n);
void vrelu(const double* x, double* y, int64_t n);
bool softmax_masked_rows(const double* scores, const double* mask, double* out, int64_t m, int64_t n);
}  // namespace serial

}  // namespace qdet::kernels

#endif  // QDET_KERNELS_HPP_
