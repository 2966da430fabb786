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

#include "qdet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "qdet/kernels.hpp"

namespace qdet::ad {

namespace {

NodePtr make_node(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

bool any_requires_grad(const std::vector<NodePtr>& parents) {
  for (const auto& p : parents) {
    if (p->requires_grad) return true;
  }
  return false;
}

// Finish op construction: wire parents and drop the backprop closure when
// no parent needs gradients.
Var finish(NodePtr n, std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
  n->parents = std::move(parents);
  n->requires_grad = any_requires_grad(n->parents);
  if (n->requires_grad) n->backprop = std::move(backprop);
  return Var(std::move(n));
}

}  // namespace

Tensor& Node::grad_buf() {
  if (!tmp_live) {
    if (tmp.same_shape(value)) {
      tmp.zero();
    } else {
      tmp = Tensor::zeros(value.shape());
    }
    tmp_live = true;
  }
  return tmp;
}

Tensor& Node::grad_ref() {
  if (!grad.same_shape(value)) grad = Tensor::zeros(value.shape());
  return grad;
}

Var Var::constant(Tensor v) { return Var(make_node(std::move(v))); }

Var Var::leaf(Tensor v) {
  auto n = make_node(std::move(v));
  n->requires_grad = true;
  return Var(std::move(n));
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());
  }
  const int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out({m, n});
  kernels::gemm_nn(av.data(), bv.data(), out.data(), m, k, n);
  NodePtr node = make_node(std::move(out));
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return finish(node, {a.node(), b.node()}, [pa, pb, m, k, n](Node& self) {
    const Tensor& g = self.tmp;
    if (pa->requires_grad) {
      kernels::gemm_nt_acc(g.data(), pb->value.data(), pa->grad_buf().data(), m, n, k);
    }
    if (pb->requires_grad) {
      kernels::gemm_tn_acc(pa->value.data(), g.data(), pb->grad_buf().data(), m, k, n);
    }
  });
}

namespace {

enum class BinOp { kAdd, kSub, kMul };

Var binary_elementwise(const Var& a, const Var& b, BinOp op, const char* name) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool same = av.same_shape(bv);
  const bool bias_bcast = !same && bv.rank() == 1 && av.rank() >= 1 &&
                          av.dim(av.rank() - 1) == bv.dim(0);
  if (!same && !bias_bcast) {
    throw DimensionError(std::string(name) + ": shapes not broadcastable " + av.shape_str() +
                         " vs " + bv.shape_str());
  }
  const int64_t n = av.size();
  const int64_t d = bias_bcast ? bv.dim(0) : n;
  Tensor out(av.shape());
  const double* ap = av.data();
  const double* bp = bv.data();
  double* yp = out.data();
  if (same) {
    switch (op) {
      case BinOp::kAdd: kernels::vadd(ap, bp, yp, n); break;
      case BinOp::kSub: kernels::vsub(ap, bp, yp, n); break;
      case BinOp::kMul: kernels::vmul(ap, bp, yp, n); break;
    }
  } else {
    for (int64_t i = 0; i < n; ++i) {
      const double bvv = bp[i % d];
      switch (op) {
        case BinOp::kAdd: yp[i] = ap[i] + bvv; break;
        case BinOp::kSub: yp[i] = ap[i] - bvv; break;
        case BinOp::kMul: yp[i] = ap[i] * bvv; break;
      }
    }
  }
  NodePtr node = make_node(std::move(out));
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return finish(node, {a.node(), b.node()}, [pa, pb, op, same, n, d](Node& self) {
    const double* g = self.tmp.data();
    if (pa->requires_grad) {
      double* da = pa->grad_buf().data();
      if (op == BinOp::kMul) {
        const double* bp2 = pb->value.data();
        if (same) {
          for (int64_t i = 0; i < n; ++i) da[i] += g[i] * bp2[i];
        } else {
          for (int64_t i = 0; i < n; ++i) da[i] += g[i] * bp2[i % d];
        }
      } else {
        for (int64_t i = 0; i < n; ++i) da[i] += g[i];
      }
    }
    if (pb->requires_grad) {
      double* db = pb->grad_buf().data();
      const double sign = op == BinOp::kSub ? -1.0 : 1.0;
      if (op == BinOp::kMul) {
        const double* ap2 = pa->value.data();
        if (same) {
          for (int64_t i = 0; i < n; ++i) db[i] += g[i] * ap2[i];
        } else {
          for (int64_t i = 0; i < n; ++i) db[i % d] += g[i] * ap2[i];
        }
      } else if (same) {
        for (int64_t i = 0; i < n; ++i) db[i] += sign * g[i];
      } else {
        for (int64_t i = 0; i < n; ++i) db[i % d] += sign * g[i];
      }
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary_elementwise(a, b, BinOp::kAdd, "add"); }
Var sub(const Var& a, const Var& b) { return binary_elementwise(a, b, BinOp::kSub, "sub"); }
Var mul(const Var& a, const Var& b) { return binary_elementwise(a, b, BinOp::kMul, "mul"); }

Var sigmoid(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  kernels::vsigmoid(xv.data(), out.data(), xv.size());
  NodePtr node = make_node(std::move(out));
  Node* px = x.node().get();
  Node* raw = node.get();
  return finish(node, {x.node()}, [px, raw](Node& self) {
    const double* g = self.tmp.data();
    const double* y = raw->value.data();
    double* dx = px->grad_buf().data();
    const int64_t n = raw->value.size();
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh_act(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  kernels::vtanh(xv.data(), out.data(), xv.size());
  NodePtr node = make_node(std::move(out));
  Node* px = x.node().get();
  Node* raw = node.get();
  return finish(node, {x.node()}, [px, raw](Node& self) {
    const double* g = self.tmp.data();
    const double* y = raw->value.data();
    double* dx = px->grad_buf().data();
    const int64_t n = raw->value.size();
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var relu(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  kernels::vrelu(xv.data(), out.data(), xv.size());
  NodePtr node = make_node(std::move(out));
  Node* px = x.node().get();
  return finish(node, {x.node()}, [px](Node& self) {
    const double* g = self.tmp.data();
    const double* xin = px->value.data();
    double* dx = px->grad_buf().data();
    const int64_t n = px->value.size();
    for (int64_t i = 0; i < n; ++i) {
      if (xin[i] > 0.0) dx[i] += g[i];
    }
  });
}

Var softmax_masked(const Var& scores, const Tensor& mask) {
  const Tensor& sv = scores.value();
  check_same_shape(sv, mask, "softmax_masked");
  if (sv.rank() != 2) throw DimensionError("softmax_masked: expected rank-2, got " + sv.shape_str());
  const int64_t m = sv.dim(0), n = sv.dim(1);
  Tensor out({m, n});
  if (!kernels::softmax_masked_rows(sv.data(), mask.data(), out.data(), m, n)) {
    throw ContractError("softmax_masked: degenerate mask (all-zero row)");
  }
  NodePtr node = make_node(std::move(out));
  Node* px = scores.node().get();
  Node* raw = node.get();
  Tensor mask_copy = mask;
  return finish(node, {scores.node()}, [px, raw, m, n, mask_copy = std::move(mask_copy)](Node& self) {
    const double* g = self.tmp.data();
    const double* y = raw->value.data();
    const double* mk = mask_copy.data();
    double* dx = px->grad_buf().data();
    for (int64_t i = 0; i < m; ++i) {
      const double* gi = g + i * n;
      const double* yi = y + i * n;
      const double* mi = mk + i * n;
      double dot = 0.0;
      for (int64_t j = 0; j < n; ++j) dot += gi[j] * yi[j];
      double* di = dx + i * n;
      for (int64_t j = 0; j < n; ++j) {
        if (mi[j] != 0.0) di[j] += yi[j] * (gi[j] - dot);
      }
    }
  });
}

Var concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) throw ContractError("concat: no inputs");
  const int rank = xs[0].value().rank();
  if (axis < 0 || axis >= rank) throw DimensionError("concat: axis out of range");
  std::vector<int64_t> shape = xs[0].value().shape();
  int64_t axis_total = 0;
  for (const Var& x : xs) {
    const Tensor& v = x.value();
    if (v.rank() != rank) throw DimensionError("concat: rank mismatch " + v.shape_str());
    for (int i = 0; i < rank; ++i) {
      if (i != axis && v.dim(i) != shape[static_cast<size_t>(i)]) {
        throw DimensionError("concat: shape mismatch off axis " + xs[0].value().shape_str() +
                             " vs " + v.shape_str());
      }
    }
    axis_total += v.dim(axis);
  }
  shape[static_cast<size_t>(axis)] = axis_total;

  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < rank; ++i) inner *= shape[static_cast<size_t>(i)];

  Tensor out(shape);
  const int64_t out_stride = axis_total * inner;
  int64_t offset = 0;
  std::vector<int64_t> offsets;
  for (const Var& x : xs) {
    const Tensor& v = x.value();
    const int64_t w = v.dim(axis) * inner;
    offsets.push_back(offset);
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(v.data() + o * w, v.data() + (o + 1) * w, out.data() + o * out_stride + offset);
    }
    offset += w;
  }

  NodePtr node = make_node(std::move(out));
  std::vector<NodePtr> parents;
  parents.reserve(xs.size());
  for (const Var& x : xs) parents.push_back(x.node());
  return finish(node, std::move(parents),
                [offsets = std::move(offsets), outer, inner, out_stride, axis](Node& self) {
                  const double* g = self.tmp.data();
                  for (size_t i = 0; i < self.parents.size(); ++i) {
                    Node* p = self.parents[i].get();
                    if (!p->requires_grad) continue;
                    const int64_t w = p->value.dim(axis) * inner;
                    double* dp = p->grad_buf().data();
                    for (int64_t o = 0; o < outer; ++o) {
                      const double* src = g + o * out_stride + offsets[i];
                      double* dst = dp + o * w;
                      for (int64_t j = 0; j < w; ++j) dst[j] += src[j];
                    }
                  }
                });
}

Var slice_cols(const Var& x, int64_t j0, int64_t j1) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || j0 < 0 || j1 > xv.dim(1) || j0 >= j1) {
    throw DimensionError("slice_cols: bad range on " + xv.shape_str());
  }
  const int64_t n = xv.dim(0), d = xv.dim(1), w = j1 - j0;
  Tensor out({n, w});
  for (int64_t i = 0; i < n; ++i) {
    std::copy(xv.data() + i * d + j0, xv.data() + i * d + j1, out.data() + i * w);
  }
  NodePtr node = make_node(std::move(out));
  Node* px = x.node().get();
  return finish(node, {x.node()}, [px, j0, n, d, w](Node& self) {
    const double* g = self.tmp.data();
    double* dx = px->grad_buf().data();
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < w; ++j) dx[i * d + j0 + j] += g[i * w + j];
    }
  });
}

Var scale_rows(const Var& x, const Var& s) {
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (xv.rank() != 2 || sv.size() != xv.dim(0)) {
    throw DimensionError("scale_rows: " + xv.shape_str() + " vs " + sv.shape_str());
  }
  const int64_t n = xv.dim(0), d = xv.dim(1);
  Tensor out({n, d});
  for (int64_t i = 0; i < n; ++i) {
    const double si = sv[i];
    for (int64_t j = 0; j < d; ++j) out.at(i, j) = xv.at(i, j) * si;
  }
  NodePtr node = make_node(std::move(out));
  Node* px = x.node().get();
  Node* ps = s.node().get();
  return finish(node, {x.node(), s.node()}, [px, ps, n, d](Node& self) {
    const double* g = self.tmp.data();
    if (px->requires_grad) {
      double* dx = px->grad_buf().data();
      const double* sp = ps->value.data();
      for (int64_t i = 0; i < n; ++i) {
        const double si = sp[i];
        for (int64_t j = 0; j < d; ++j) dx[i * d + j] += g[i * d + j] * si;
      }
    }
    if (ps->requires_grad) {
      double* ds = ps->grad_buf().data();
      const double* xp = px->value.data();
      for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int64_t j = 0; j < d; ++j) acc += g[i * d + j] * xp[i * d + j];
        ds[i] += acc;
      }
    }
  });
}

Var gather_rows(const Var& table, const std::vector<int>& ids, bool skip_row0_grad) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw DimensionError("gather_rows: table must be rank-2, got " + tv.shape_str());
  const int64_t v = tv.dim(0), d = tv.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw InputError("gather_rows: id " + std::to_string(id) + " outside table of " +
                       std::to_string(v) + " rows");
    }
  }
  const int64_t n = static_cast<int64_t>(ids.size());
  Tensor out({n, d});
  for (int64_t i = 0; i < n; ++i) {
    std::copy(tv.data() + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * d,
              tv.data() + (static_cast<int64_t>(ids[static_cast<size_t>(i)]) + 1) * d,
              out.data() + i * d);
  }
  NodePtr node = make_node(std::move(out));
  Node* pt = table.node().get();
  std::vector<int> ids_copy = ids;
  return finish(node, {table.node()}, [pt, ids_copy = std::move(ids_copy), d, skip_row0_grad](Node& self) {
    const double* g = self.tmp.data();
    double* dt = pt->grad_buf().data();
    for (size_t i = 0; i < ids_copy.size(); ++i) {
      const int id = ids_copy[i];
      if (skip_row0_grad && id == 0) continue;
      double* row = dt + static_cast<int64_t>(id) * d;
      const double* src = g + static_cast<int64_t>(i) * d;
      for (int64_t j = 0; j < d; ++j) row[j] += src[j];
    }
  });
}

Var gather_last_step(const std::vector<Var>& steps, const std::vector<int>& lengths) {
  if (steps.empty()) throw ContractError("gather_last_step: empty step list");
  const int64_t n = steps[0].value().dim(0);
  const int64_t d = steps[0].value().dim(1);
  if (static_cast<int64_t>(lengths.size()) != n) {
    throw DimensionError("gather_last_step: lengths size mismatch");
  }
  for (int len : lengths) {
    if (len < 1 || len > static_cast<int>(steps.size())) {
      throw ContractError("gather_last_step: invalid length " + std::to_string(len));
    }
  }
  Tensor out({n, d});
  for (int64_t b = 0; b < n; ++b) {
    const Tensor& src = steps[static_cast<size_t>(lengths[static_cast<size_t>(b)] - 1)].value();
    std::copy(src.data() + b * d, src.data() + (b + 1) * d, out.data() + b * d);
  }
  NodePtr node = make_node(std::move(out));
  std::vector<NodePtr> parents;
  parents.reserve(steps.size());
  for (const Var& s : steps) parents.push_back(s.node());
  std::vector<int> len_copy = lengths;
  return finish(node, std::move(parents), [len_copy = std::move(len_copy), n, d](Node& self) {
    const double* g = self.tmp.data();
    for (int64_t b = 0; b < n; ++b) {
      Node* p = self.parents[static_cast<size_t>(len_copy[static_cast<size_t>(b)] - 1)].get();
      if (!p->requires_grad) continue;
      double* dst = p->grad_buf().data() + b * d;
      const double* src = g + b * d;
      for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var weighted_sum_steps(const std::vector<Var>& steps, const Var& alphas) {
  if (steps.empty()) throw ContractError("weighted_sum_steps: empty step list");
  const int64_t n = steps[0].value().dim(0);
  const int64_t d = steps[0].value().dim(1);
  const int64_t t_count = static_cast<int64_t>(steps.size());
  const Tensor& av = alphas.value();
  if (av.rank() != 2 || av.dim(0) != n || av.dim(1) != t_count) {
    throw DimensionError("weighted_sum_steps: alphas " + av.shape_str() + " vs " +
                         std::to_string(t_count) + " steps of batch " + std::to_string(n));
  }
  Tensor out({n, d});
  for (int64_t t = 0; t < t_count; ++t) {
    const Tensor& z = steps[static_cast<size_t>(t)].value();
    for (int64_t b = 0; b < n; ++b) {
      const double a = av.at(b, t);
      if (a == 0.0) continue;
      const double* src = z.data() + b * d;
      double* dst = out.data() + b * d;
      for (int64_t j = 0; j < d; ++j) dst[j] += a * src[j];
    }
  }
  NodePtr node = make_node(std::move(out));
  std::vector<NodePtr> parents;
  parents.reserve(steps.size() + 1);
  for (const Var& s : steps) parents.push_back(s.node());
  parents.push_back(alphas.node());
  Node* pa = alphas.node().get();
  return finish(node, std::move(parents), [pa, n, d, t_count](Node& self) {
    const double* g = self.tmp.data();
    const double* av2 = pa->value.data();
    for (int64_t t = 0; t < t_count; ++t) {
      Node* pz = self.parents[static_cast<size_t>(t)].get();
      const double* zv = pz->value.data();
      double* dz = pz->requires_grad ? pz->grad_buf().data() : nullptr;
      double* da = pa->requires_grad ? pa->grad_buf().data() : nullptr;
      for (int64_t b = 0; b < n; ++b) {
        const double a = av2[b * t_count + t];
        const double* gb = g + b * d;
        if (dz != nullptr) {
          double* dzb = dz + b * d;
          for (int64_t j = 0; j < d; ++j) dzb[j] += a * gb[j];
        }
        if (da != nullptr) {
          double acc = 0.0;
          const double* zb = zv + b * d;
          for (int64_t j = 0; j < d; ++j) acc += gb[j] * zb[j];
          da[b * t_count + t] += acc;
        }
      }
    }
  });
}

PackedRows pack_valid_rows(const std::vector<Var>& steps, const std::vector<int>& lengths) {
  if (steps.empty()) throw ContractError("pack_valid_rows: empty step list");
  const int64_t n = steps[0].value().dim(0);
  const int64_t d = steps[0].value().dim(1);
  const int64_t t_count = static_cast<int64_t>(steps.size());
  PackedRows out;
  out.row_of.assign(static_cast<size_t>(n * t_count), -1);
  int64_t m = 0;
  for (int64_t t = 0; t < t_count; ++t) {
    for (int64_t b = 0; b < n; ++b) {
      if (t < lengths[static_cast<size_t>(b)]) out.row_of[static_cast<size_t>(t * n + b)] = m++;
    }
  }
  if (m == 0) throw ContractError("pack_valid_rows: no valid rows");
  out.rows = m;
  Tensor packed({m, d});
  for (int64_t t = 0; t < t_count; ++t) {
    const Tensor& z = steps[static_cast<size_t>(t)].value();
    for (int64_t b = 0; b < n; ++b) {
      const int64_t r = out.row_of[static_cast<size_t>(t * n + b)];
      if (r < 0) continue;
      std::copy(z.data() + b * d, z.data() + (b + 1) * d, packed.data() + r * d);
    }
  }
  NodePtr node = make_node(std::move(packed));
  std::vector<NodePtr> parents;
  parents.reserve(steps.size());
  for (const Var& s : steps) parents.push_back(s.node());
  std::vector<int64_t> row_of = out.row_of;
  out.packed = finish(node, std::move(parents), [row_of = std::move(row_of), n, d, t_count](Node& self) {
    const double* g = self.tmp.data();
    for (int64_t t = 0; t < t_count; ++t) {
      Node* p = self.parents[static_cast<size_t>(t)].get();
      if (!p->requires_grad) continue;
      double* dp = p->grad_buf().data();
      for (int64_t b = 0; b < n; ++b) {
        const int64_t r = row_of[static_cast<size_t>(t * n + b)];
        if (r < 0) continue;
        const double* src = g + r * d;
        double* dst = dp + b * d;
        for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    }
  });
  return out;
}

Var unpack_step(const Var& packed, const PackedRows& map, int t, int64_t n) {
  const Tensor& pv = packed.value();
  const int64_t d = pv.dim(1);
  Tensor out({n, d});
  for (int64_t b = 0; b < n; ++b) {
    const int64_t r = map.row_of[static_cast<size_t>(static_cast<int64_t>(t) * n + b)];
    if (r >= 0) std::copy(pv.data() + r * d, pv.data() + (r + 1) * d, out.data() + b * d);
  }
  NodePtr node = make_node(std::move(out));
  Node* pp = packed.node().get();
  std::vector<int64_t> rows(static_cast<size_t>(n));
  for (int64_t b = 0; b < n; ++b) {
    rows[static_cast<size_t>(b)] = map.row_of[static_cast<size_t>(static_cast<int64_t>(t) * n + b)];
  }
  return finish(node, {packed.node()}, [pp, rows = std::move(rows), n, d](Node& self) {
    const double* g = self.tmp.data();
    double* dp = pp->grad_buf().data();
    for (int64_t b = 0; b < n; ++b) {
      const int64_t r = rows[static_cast<size_t>(b)];
      if (r < 0) continue;
      const double* src = g + b * d;
      double* dst = dp + r * d;
      for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var reshape(const Var& x, std::vector<int64_t> shape) {
  const Tensor& xv = x.value();
  if (Tensor::count(shape) != xv.size()) {
    throw DimensionError("reshape: " + xv.shape_str() + " to " + Tensor::shape_str(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(xv.data(), xv.data() + xv.size()));
  NodePtr node = make_node(std::move(out));
  Node* px = x.node().get();
  return finish(node, {x.node()}, [px](Node& self) {
    const double* g = self.tmp.data();
    double* dx = px->grad_buf().data();
    const int64_t n = px->value.size();
    for (int64_t i = 0; i < n; ++i) dx[i] += g[i];
  });
}

Var sum_all(const Var& x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (int64_t i = 0; i < xv.size(); ++i) s += xv[i];
  NodePtr node = make_node(Tensor::scalar(s));
  Node* px = x.node().get();
  return finish(node, {x.node()}, [px](Node& self) {
    const double g = self.tmp[0];
    double* dx = px->grad_buf().data();
    const int64_t n = px->value.size();
    for (int64_t i = 0; i < n; ++i) dx[i] += g;
  });
}

Var sum_squares(const Var& x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (int64_t i = 0; i < xv.size(); ++i) s += xv[i] * xv[i];
  NodePtr node = make_node(Tensor::scalar(s));
  Node* px = x.node().get();
  return finish(node, {x.node()}, [px](Node& self) {
    const double g = self.tmp[0];
    const double* xp = px->value.data();
    double* dx = px->grad_buf().data();
    const int64_t n = px->value.size();
    for (int64_t i = 0; i < n; ++i) dx[i] += 2.0 * g * xp[i];
  });
}

Var bce_loss(const Var& scores, const Tensor& labels) {
  const Tensor& sv = scores.value();
  if (sv.size() != labels.size()) {
    throw DimensionError("bce_loss: scores " + sv.shape_str() + " vs labels " + labels.shape_str());
  }
  const int64_t n = sv.size();
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double s = sv[i];
    const double y = labels[i];
    loss += -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
  }
  loss /= static_cast<double>(n);
  NodePtr node = make_node(Tensor::scalar(loss));
  Node* px = scores.node().get();
  Tensor labels_copy = labels;
  return finish(node, {scores.node()}, [px, labels_copy = std::move(labels_copy), n](Node& self) {
    const double g = self.tmp[0];
    const double* s = px->value.data();
    double* dx = px->grad_buf().data();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      dx[i] += g * inv_n * (s[i] - labels_copy[i]) / (s[i] * (1.0 - s[i]));
    }
  });
}

Var bce_with_logits(const Var& logits, const Tensor& labels) {
  const Tensor& xv = logits.value();
  if (xv.size() != labels.size()) {
    throw DimensionError("bce_with_logits: logits " + xv.shape_str() + " vs labels " + labels.shape_str());
  }
  const int64_t n = xv.size();
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double x = xv[i];
    const double y = labels[i];
    // -y*x + log(1 + exp(x)), evaluated stably.
    loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  loss /= static_cast<double>(n);
  NodePtr node = make_node(Tensor::scalar(loss));
  Node* px = logits.node().get();
  Tensor labels_copy = labels;
  return finish(node, {logits.node()}, [px, labels_copy = std::move(labels_copy), n](Node& self) {
    const double g = self.tmp[0];
    const double* x = px->value.data();
    double* dx = px->grad_buf().data();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      dx[i] += g * inv_n * (kernels::sigmoid(x[i]) - labels_copy[i]);
    }
  });
}

Var batchnorm_train(const Var& x, const Var& gamma, const Var& beta,
                    const Tensor& mu, const Tensor& var, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("batchnorm_train: expected rank-2, got " + xv.shape_str());
  const int64_t m = xv.dim(0), d = xv.dim(1);
  if (m < 2) throw ContractError("batchnorm_train: batch size " + std::to_string(m) + " < 2");
  if (mu.size() != d || var.size() != d || gamma.value().size() != d || beta.value().size() != d) {
    throw DimensionError("batchnorm_train: parameter/stat width mismatch for " + xv.shape_str());
  }
  auto xhat = std::make_shared<Tensor>(Tensor::zeros({m, d}));
  auto istd = std::make_shared<Tensor>(Tensor::zeros({d}));
  for (int64_t j = 0; j < d; ++j) (*istd)[j] = 1.0 / std::sqrt(var[j] + eps);
  Tensor out({m, d});
  const double* gv = gamma.value().data();
  const double* bv = beta.value().data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (xv.at(i, j) - mu[j]) * (*istd)[j];
      xhat->at(i, j) = xh;
      out.at(i, j) = gv[j] * xh + bv[j];
    }
  }
  NodePtr node = make_node(std::move(out));
  Node* px = x.node().get();
  Node* pg = gamma.node().get();
  Node* pb = beta.node().get();
  return finish(node, {x.node(), gamma.node(), beta.node()}, [px, pg, pb, xhat, istd, m, d](Node& self) {
    const double* g = self.tmp.data();
    const double* gv2 = pg->value.data();
    // Column sums of dxhat and dxhat*xhat feed the full gradient.
    std::vector<double> sum_dxh(static_cast<size_t>(d), 0.0);
    std::vector<double> sum_dxh_xh(static_cast<size_t>(d), 0.0);
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < d; ++j) {
        const double dxh = g[i * d + j] * gv2[j];
        sum_dxh[static_cast<size_t>(j)] += dxh;
        sum_dxh_xh[static_cast<size_t>(j)] += dxh * xhat->at(i, j);
      }
    }
    if (pg->requires_grad) {
      double* dg = pg->grad_buf().data();
      for (int64_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int64_t i = 0; i < m; ++i) acc += g[i * d + j] * xhat->at(i, j);
        dg[j] += acc;
      }
    }
    if (pb->requires_grad) {
      double* db = pb->grad_buf().data();
      for (int64_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int64_t i = 0; i < m; ++i) acc += g[i * d + j];
        db[j] += acc;
      }
    }
    if (px->requires_grad) {
      double* dx = px->grad_buf().data();
      const double inv_m = 1.0 / static_cast<double>(m);
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < d; ++j) {
          const double dxh = g[i * d + j] * gv2[j];
          dx[i * d + j] += (*istd)[j] * (dxh - inv_m * sum_dxh[static_cast<size_t>(j)] -
                                         inv_m * xhat->at(i, j) * sum_dxh_xh[static_cast<size_t>(j)]);
        }
      }
    }
  });
}

void backward(const Var& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined loss");
  Node* root = loss.node().get();
  if (root->value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + root->value.shape_str());
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS over gradient-requiring ancestors.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : topo) n->tmp_live = false;
  root->grad_buf()[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->tmp_live && n->backprop) n->backprop(*n);
  }
  for (Node* n : topo) {
    if (!n->tmp_live) continue;
    Tensor& g = n->grad_ref();
    const double* src = n->tmp.data();
    double* dst = g.data();
    const int64_t sz = g.size();
    for (int64_t i = 0; i < sz; ++i) dst[i] += src[i];
    n->tmp_live = false;
  }
}

void zero_grads(const std::vector<Parameter>& params) {
  for (const Parameter& p : params) {
    if (!p.var.node()->grad.empty()) p.var.node()->grad.zero();
  }
}

}  // namespace qdet::ad
