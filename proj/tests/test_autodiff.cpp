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

#include <cmath>
#include <functional>

#include "qdet/autodiff.hpp"
#include "qdet/gradcheck.hpp"
#include "qdet/rng.hpp"

using namespace qdet;
namespace ad = qdet::ad;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  RandomStream rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Finite-difference check of one op under a sum-of-squares readout.
// Gradients are compared as vectors (norm-relative), which is the robust
// form when individual entries cancel to near zero.
void check_op(const std::function<ad::Var(const std::vector<ad::Parameter>&)>& build,
              std::vector<ad::Parameter> params, double tol = 1e-6) {
  auto loss = [&]() { return ad::sum_squares(build(params)); };
  ad::zero_grads(params);
  ad::backward(loss());
  constexpr double kEps = 1e-5;
  for (const ad::Parameter& p : params) {
    const Tensor analytic = p.var.grad();
    Tensor& value = p.var.node()->value;
    double diff_sq = 0.0, norm_sq = 0.0;
    for (int64_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + kEps;
      const double lp = loss().value()[0];
      value[i] = saved - kEps;
      const double lm = loss().value()[0];
      value[i] = saved;
      const double numeric = (lp - lm) / (2.0 * kEps);
      diff_sq += (analytic[i] - numeric) * (analytic[i] - numeric);
      norm_sq += std::max(analytic[i] * analytic[i], numeric * numeric);
    }
    const double diff = std::sqrt(diff_sq);
    const double rel = diff / std::max(std::sqrt(norm_sq), 1e-8);
    // Zero-gradient cases (exactly constant outputs) leave only fp noise.
    CHECK_MESSAGE((rel < tol || diff < 1e-7),
                  "parameter " << p.name << " fd norm-rel err " << rel << " abs " << diff);
  }
}

ad::Parameter param(const std::string& name, Tensor t) {
  return {name, ad::Var::leaf(std::move(t))};
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("matmul identity") {
  ad::Var i2 = ad::Var::constant(Tensor({2, 2}, {1, 0, 0, 1}));
  ad::Var a = ad::Var::constant(Tensor({2, 2}, {1, 2, 3, 4}));
  ad::Var y = ad::matmul(i2, a);
  for (int64_t i = 0; i < 4; ++i) CHECK(y.value()[i] == a.value()[i]);
}

TEST_CASE("matmul hand-multiplied 2x2") {
  ad::Var a = ad::Var::constant(Tensor({2, 2}, {1, 2, 3, 4}));
  ad::Var b = ad::Var::constant(Tensor({2, 2}, {5, 6, 7, 8}));
  ad::Var y = ad::matmul(a, b);
  CHECK(y.value()[0] == 19.0);
  CHECK(y.value()[1] == 22.0);
  CHECK(y.value()[2] == 43.0);
  CHECK(y.value()[3] == 50.0);
}

TEST_CASE("matmul rejects mismatched inner dims, naming both shapes") {
  ad::Var a = ad::Var::constant(Tensor::zeros({2, 3}));
  ad::Var b = ad::Var::constant(Tensor::zeros({2, 3}));
  try {
    ad::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("scalar activations") {
  ad::Var x = ad::Var::constant(Tensor({3}, {0.0, -3.2, 3.2}));
  CHECK(ad::sigmoid(x).value()[0] == 0.5);
  CHECK(ad::relu(x).value()[1] == 0.0);
  CHECK(ad::relu(x).value()[2] == 3.2);
  ad::Var t = ad::tanh_act(ad::Var::constant(Tensor::scalar(0.5)));
  CHECK(t.value()[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
  CHECK(t.value()[0] == doctest::Approx(0.46211715726000974).epsilon(1e-12));
}

TEST_CASE("softmax_masked uniform and masked-uniform rows") {
  ad::Var z = ad::Var::constant(Tensor({1, 3}, {0, 0, 0}));
  Tensor full({1, 3}, {1, 1, 1});
  ad::Var s = ad::softmax_masked(z, full);
  for (int j = 0; j < 3; ++j) CHECK(s.value()[j] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  ad::Var z5 = ad::Var::constant(Tensor({1, 3}, {5, 5, 5}));
  Tensor partial({1, 3}, {1, 1, 0});
  ad::Var s5 = ad::softmax_masked(z5, partial);
  CHECK(s5.value()[0] == 0.5);
  CHECK(s5.value()[1] == 0.5);
  CHECK(s5.value()[2] == 0.0);
}

TEST_CASE("softmax_masked direct oracle on [1,2,3]") {
  ad::Var z = ad::Var::constant(Tensor({1, 3}, {1, 2, 3}));
  ad::Var s = ad::softmax_masked(z, Tensor({1, 3}, {1, 1, 1}));
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  const double sum = e1 + e2 + e3;
  CHECK(s.value()[0] == doctest::Approx(e1 / sum).epsilon(1e-12));
  CHECK(s.value()[1] == doctest::Approx(e2 / sum).epsilon(1e-12));
  CHECK(s.value()[2] == doctest::Approx(e3 / sum).epsilon(1e-12));
  CHECK(s.value()[0] == doctest::Approx(0.09003057).epsilon(1e-7));
  CHECK(s.value()[1] == doctest::Approx(0.24472847).epsilon(1e-7));
  CHECK(s.value()[2] == doctest::Approx(0.66524096).epsilon(1e-7));
}

TEST_CASE("softmax_masked degenerate mask row raises") {
  ad::Var z = ad::Var::constant(Tensor::zeros({2, 3}));
  Tensor mask({2, 3}, {1, 1, 1, 0, 0, 0});
  CHECK_THROWS_AS(ad::softmax_masked(z, mask), ContractError);
}

TEST_CASE("softmax_masked stability and row sums at large magnitudes") {
  for (uint64_t seed : {0u, 1u, 2u, 3u, 4u}) {
    const Tensor scores = random_tensor({5, 7}, 100 + seed, -1e3, 1e3);
    RandomStream rng(seed);
    Tensor mask({5, 7});
    for (int64_t i = 0; i < 5; ++i) {
      int ones = 0;
      for (int64_t j = 0; j < 7; ++j) {
        mask.at(i, j) = rng.uniform01() < 0.6 ? 1.0 : 0.0;
        ones += mask.at(i, j) != 0.0;
      }
      if (ones == 0) mask.at(i, 0) = 1.0;
    }
    ad::Var s = ad::softmax_masked(ad::Var::constant(scores), mask);
    for (int64_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (int64_t j = 0; j < 7; ++j) {
        if (mask.at(i, j) == 0.0) CHECK(s.value().at(i, j) == 0.0);
        else CHECK(s.value().at(i, j) >= 0.0);
        sum += s.value().at(i, j);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  // At moderate magnitudes every unmasked entry is strictly positive.
  const Tensor scores = random_tensor({4, 6}, 77, -20.0, 20.0);
  Tensor mask = Tensor::full({4, 6}, 1.0);
  mask.at(1, 3) = 0.0;
  ad::Var s = ad::softmax_masked(ad::Var::constant(scores), mask);
  for (int64_t i = 0; i < 4; ++i) {
    for (int64_t j = 0; j < 6; ++j) {
      if (mask.at(i, j) != 0.0) CHECK(s.value().at(i, j) > 0.0);
    }
  }
}

TEST_CASE("concat basics and errors") {
  ad::Var a = ad::Var::constant(Tensor({2}, {1, 2}));
  ad::Var b = ad::Var::constant(Tensor({1}, {3}));
  ad::Var y = ad::concat({a, b}, 0);
  CHECK(y.value().shape() == std::vector<int64_t>{3});
  CHECK(y.value()[0] == 1.0);
  CHECK(y.value()[1] == 2.0);
  CHECK(y.value()[2] == 3.0);

  ad::Var wide = ad::concat({ad::Var::constant(Tensor::zeros({2, 200})),
                             ad::Var::constant(Tensor::zeros({2, 200}))},
                            1);
  CHECK(wide.value().shape() == std::vector<int64_t>{2, 400});

  CHECK_THROWS_AS(ad::concat({ad::Var::constant(Tensor::zeros({2, 3})),
                              ad::Var::constant(Tensor::zeros({4, 3}))},
                             1),
                  DimensionError);
}

TEST_CASE("backward of x*x at x=3") {
  ad::Parameter x = param("x", Tensor::scalar(3.0));
  ad::Var loss = ad::sum_squares(x.var);
  ad::backward(loss);
  CHECK(x.var.grad()[0] == 6.0);
}

TEST_CASE("backward requires a scalar loss") {
  ad::Parameter x = param("x", Tensor({2}, {1, 2}));
  ad::Var y = ad::add(x.var, x.var);
  CHECK_THROWS_AS(ad::backward(y), ContractError);
}

TEST_CASE("repeated backward accumulates exactly") {
  ad::Parameter x = param("x", Tensor({3}, {1.0, -2.0, 0.5}));
  ad::Var loss = ad::sum_squares(x.var);
  ad::backward(loss);
  const Tensor once = x.var.grad();
  ad::backward(loss);
  for (int64_t i = 0; i < 3; ++i) CHECK(x.var.grad()[i] == 2.0 * once[i]);
}

TEST_CASE("gradients of multiply-used nodes are summed") {
  ad::Parameter x = param("x", Tensor::scalar(2.0));
  ad::Var y = ad::mul(x.var, x.var);  // x used twice
  ad::backward(ad::sum_all(y));
  CHECK(x.var.grad()[0] == 4.0);
}

TEST_CASE("backward through sigmoid(w.x) matches finite differences") {
  ad::Parameter w = param("w", random_tensor({4, 1}, 5));
  const Tensor x = random_tensor({3, 4}, 6);
  auto loss = [&]() {
    return ad::sum_all(ad::sigmoid(ad::matmul(ad::Var::constant(x), w.var)));
  };
  const ad::GradCheckReport report = ad::grad_check(loss, {w}, {1e-5, 64, 1});
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("grad_check on a linear model is nearly exact") {
  ad::Parameter w = param("w", random_tensor({5, 1}, 7));
  ad::Parameter b = param("b", random_tensor({1}, 8));
  const Tensor x = random_tensor({6, 5}, 9);
  auto loss = [&]() {
    return ad::sum_all(ad::add(ad::matmul(ad::Var::constant(x), w.var), b.var));
  };
  const ad::GradCheckReport report = ad::grad_check(loss, {w, b}, {1e-5, 64, 2});
  CHECK(report.max_rel_err < 1e-8);
}

TEST_CASE("grad_check flags a fabricated wrong gradient") {
  ad::Parameter w = param("w", random_tensor({3}, 10));
  auto loss = [&]() { return ad::sum_squares(w.var); };
  ad::zero_grads({w});
  ad::Var l = loss();
  ad::backward(l);
  Tensor& g = w.var.node()->grad_ref();
  for (int64_t i = 0; i < g.size(); ++i) g[i] *= 1.5;  // wrong by construction
  double worst = 0.0;
  for (int64_t i = 0; i < g.size(); ++i) {
    const double eps = 1e-5;
    Tensor& value = w.var.node()->value;
    const double saved = value[i];
    value[i] = saved + eps;
    const double lp = loss().value()[0];
    value[i] = saved - eps;
    const double lm = loss().value()[0];
    value[i] = saved;
    const double numeric = (lp - lm) / (2 * eps);
    worst = std::max(worst, std::abs(g[i] - numeric) / std::max({std::abs(g[i]), std::abs(numeric), 1e-8}));
  }
  CHECK(worst > 1e-4);  // the check fails as it must
}

TEST_CASE("tree-shaped graph equals the product of local Jacobians") {
  const Tensor av = random_tensor({2, 2}, 11);
  const Tensor bv = random_tensor({2, 2}, 12);
  ad::Parameter a = param("a", av);
  ad::Parameter b = param("b", bv);
  ad::Var loss = ad::sum_all(ad::mul(ad::sigmoid(a.var), ad::tanh_act(b.var)));
  ad::backward(loss);
  for (int64_t i = 0; i < 4; ++i) {
    const double sa = 1.0 / (1.0 + std::exp(-av[i]));
    const double tb = std::tanh(bv[i]);
    CHECK(a.var.grad()[i] == doctest::Approx(sa * (1 - sa) * tb).epsilon(1e-12));
    CHECK(b.var.grad()[i] == doctest::Approx(sa * (1 - tb * tb)).epsilon(1e-12));
  }
}

TEST_CASE("identical graphs give bit-identical gradients") {
  auto run = [](uint64_t seed) {
    ad::Parameter w = param("w", random_tensor({4, 4}, seed));
    ad::Parameter v = param("v", random_tensor({4, 1}, seed + 1));
    const Tensor x = random_tensor({3, 4}, seed + 2);
    ad::Var z = ad::tanh_act(ad::matmul(ad::Var::constant(x), w.var));
    ad::backward(ad::sum_squares(ad::matmul(z, v.var)));
    std::vector<double> grads;
    for (int64_t i = 0; i < w.var.grad().size(); ++i) grads.push_back(w.var.grad()[i]);
    for (int64_t i = 0; i < v.var.grad().size(); ++i) grads.push_back(v.var.grad()[i]);
    return grads;
  };
  CHECK(run(42) == run(42));
}

TEST_CASE("finite differences across every registered op") {
  for (uint64_t trial = 0; trial < 10; ++trial) {
    RandomStream shape_rng(500 + trial);
    const int64_t m = 1 + shape_rng.uniform_int(8);
    const int64_t k = 1 + shape_rng.uniform_int(8);
    const int64_t n = 1 + shape_rng.uniform_int(8);
    const uint64_t s = 1000 * (trial + 1);

    check_op([&](const std::vector<ad::Parameter>& p) { return ad::matmul(p[0].var, p[1].var); },
             {param("a", random_tensor({m, k}, s)), param("b", random_tensor({k, n}, s + 1))});

    check_op([&](const std::vector<ad::Parameter>& p) { return ad::add(p[0].var, p[1].var); },
             {param("a", random_tensor({m, n}, s + 2)), param("b", random_tensor({m, n}, s + 3))});
    check_op([&](const std::vector<ad::Parameter>& p) { return ad::sub(p[0].var, p[1].var); },
             {param("a", random_tensor({m, n}, s + 4)), param("b", random_tensor({m, n}, s + 5))});
    check_op([&](const std::vector<ad::Parameter>& p) { return ad::mul(p[0].var, p[1].var); },
             {param("a", random_tensor({m, n}, s + 6)), param("b", random_tensor({m, n}, s + 7))});

    // Trailing-vector broadcast (the bias form).
    check_op([&](const std::vector<ad::Parameter>& p) { return ad::add(p[0].var, p[1].var); },
             {param("a", random_tensor({m, n}, s + 8)), param("b", random_tensor({n}, s + 9))});
    check_op([&](const std::vector<ad::Parameter>& p) { return ad::mul(p[0].var, p[1].var); },
             {param("a", random_tensor({m, n}, s + 10)), param("b", random_tensor({n}, s + 11))});

    check_op([&](const std::vector<ad::Parameter>& p) { return ad::sigmoid(p[0].var); },
             {param("x", random_tensor({m, n}, s + 12))});
    check_op([&](const std::vector<ad::Parameter>& p) { return ad::tanh_act(p[0].var); },
             {param("x", random_tensor({m, n}, s + 13))});

    // Keep relu inputs away from the kink.
    Tensor relu_in = random_tensor({m, n}, s + 14);
    for (int64_t i = 0; i < relu_in.size(); ++i) {
      if (std::abs(relu_in[i]) < 1e-3) relu_in[i] += 0.1;
    }
    check_op([&](const std::vector<ad::Parameter>& p) { return ad::relu(p[0].var); },
             {param("x", std::move(relu_in))});

    Tensor mask({m, n});
    RandomStream mask_rng(s + 15);
    for (int64_t i = 0; i < m; ++i) {
      int ones = 0;
      for (int64_t j = 0; j < n; ++j) {
        mask.at(i, j) = mask_rng.uniform01() < 0.7 ? 1.0 : 0.0;
        ones += mask.at(i, j) != 0.0;
      }
      if (ones == 0) mask.at(i, 0) = 1.0;
    }
    check_op(
        [&, mask](const std::vector<ad::Parameter>& p) { return ad::softmax_masked(p[0].var, mask); },
        {param("scores", random_tensor({m, n}, s + 16))});

    check_op(
        [&](const std::vector<ad::Parameter>& p) {
          return ad::concat({p[0].var, p[1].var}, 1);
        },
        {param("a", random_tensor({m, k}, s + 17)), param("b", random_tensor({m, n}, s + 18))});

    if (n >= 2) {
      check_op([&](const std::vector<ad::Parameter>& p) { return ad::slice_cols(p[0].var, 1, n); },
               {param("x", random_tensor({m, n}, s + 19))});
    }

    check_op([&](const std::vector<ad::Parameter>& p) { return ad::scale_rows(p[0].var, p[1].var); },
             {param("x", random_tensor({m, n}, s + 20)), param("s", random_tensor({m}, s + 21))});

    std::vector<int> ids;
    RandomStream id_rng(s + 22);
    for (int64_t i = 0; i < m; ++i) ids.push_back(static_cast<int>(id_rng.uniform_int(k)));
    check_op(
        [&, ids](const std::vector<ad::Parameter>& p) {
          return ad::gather_rows(p[0].var, ids, false);
        },
        {param("table", random_tensor({k, n}, s + 23))});

    check_op([&](const std::vector<ad::Parameter>& p) { return ad::reshape(p[0].var, {n, m}); },
             {param("x", random_tensor({m, n}, s + 24))});

    // Step-list ops.
    const int t_count = 3;
    std::vector<int> lengths;
    RandomStream len_rng(s + 25);
    for (int64_t i = 0; i < m; ++i) lengths.push_back(1 + static_cast<int>(len_rng.uniform_int(t_count)));
    {
      std::vector<ad::Parameter> params;
      for (int t = 0; t < t_count; ++t) {
        params.push_back(param("step" + std::to_string(t), random_tensor({m, n}, s + 30 + t)));
      }
      check_op(
          [&, lengths](const std::vector<ad::Parameter>& p) {
            std::vector<ad::Var> steps;
            for (const auto& q : p) steps.push_back(q.var);
            return ad::gather_last_step(steps, lengths);
          },
          params);

      params.push_back(param("alphas", random_tensor({m, t_count}, s + 40)));
      check_op(
          [&](const std::vector<ad::Parameter>& p) {
            std::vector<ad::Var> steps;
            for (size_t q = 0; q + 1 < p.size(); ++q) steps.push_back(p[q].var);
            return ad::weighted_sum_steps(steps, p.back().var);
          },
          params);

      params.pop_back();
      check_op(
          [&, lengths](const std::vector<ad::Parameter>& p) {
            std::vector<ad::Var> steps;
            for (const auto& q : p) steps.push_back(q.var);
            ad::PackedRows packed = ad::pack_valid_rows(steps, lengths);
            ad::Var y = ad::tanh_act(packed.packed);
            std::vector<ad::Var> outs;
            for (int t = 0; t < t_count; ++t) outs.push_back(ad::unpack_step(y, packed, t, m));
            return ad::concat(outs, 1);
          },
          params);
    }

    // Losses: scalar outputs, checked without the sum-of-squares readout.
    {
      Tensor labels({m});
      RandomStream lab_rng(s + 50);
      for (int64_t i = 0; i < m; ++i) labels[i] = lab_rng.uniform01() < 0.5 ? 0.0 : 1.0;
      ad::Parameter scores = param("scores", random_tensor({m}, s + 51, 0.1, 0.9));
      auto bce = [&]() { return ad::bce_loss(scores.var, labels); };
      CHECK(ad::grad_check(bce, {scores}, {1e-6, 64, 3}).max_rel_err < 1e-6);

      ad::Parameter logits = param("logits", random_tensor({m}, s + 52));
      auto bcel = [&]() { return ad::bce_with_logits(logits.var, labels); };
      CHECK(ad::grad_check(bcel, {logits}, {1e-5, 64, 4}).max_rel_err < 1e-6);
    }

    // Batch norm training path, statistics recomputed per probe. Rows get
    // alternating offsets so column variances stay well away from zero.
    if (m >= 2) {
      Tensor x0 = random_tensor({m, n}, s + 60);
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) x0.at(i, j) += (i % 2 == 0 ? 1.5 : -1.5);
      }
      ad::Parameter x = param("bn_x", std::move(x0));
      ad::Parameter gamma = param("bn_gamma", random_tensor({n}, s + 61, 0.5, 1.5));
      ad::Parameter beta = param("bn_beta", random_tensor({n}, s + 62));
      auto bn = [&]() {
        const Tensor& xv = x.var.value();
        Tensor mu({n}), var({n});
        for (int64_t j = 0; j < n; ++j) {
          double sum = 0.0;
          for (int64_t i = 0; i < m; ++i) sum += xv.at(i, j);
          mu[j] = sum / static_cast<double>(m);
          double sq = 0.0;
          for (int64_t i = 0; i < m; ++i) sq += (xv.at(i, j) - mu[j]) * (xv.at(i, j) - mu[j]);
          var[j] = sq / static_cast<double>(m);
        }
        return ad::batchnorm_train(x.var, gamma.var, beta.var, mu, var, 1e-5);
      };
      // Weight elementwise so the readout is not an invariant of the
      // normalization (plain sums of xhat powers are).
      const Tensor readout_w = random_tensor({m, n}, s + 63, 0.5, 1.5);
      check_op(
          [&](const std::vector<ad::Parameter>&) {
            return ad::mul(bn(), ad::Var::constant(readout_w));
          },
          {x, gamma, beta});
    }
  }
}

}  // TEST_SUITE
