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

#include "helpers.hpp"
#include "qdet/kernels.hpp"
#include "qdet/layers.hpp"

using namespace qdet;
using qdet::testing::fd_compare;
using qdet::testing::random_tensor;

namespace {

DenseLayer make_dense(int64_t in, int64_t out, Activation act, uint64_t seed = 3) {
  RandomStream rng(seed);
  return DenseLayer::create("dense", in, out, act, rng);
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("dense with identity weights is the identity") {
  DenseLayer layer = make_dense(3, 3, Activation::kNone);
  layer.W.var.mutable_value() = Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  layer.b.var.mutable_value().zero();
  const Tensor x = random_tensor({4, 3}, 5);
  ad::Var y = layer.forward(ad::Var::constant(x));
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y.value()[i] == x[i]);
}

TEST_CASE("dense with zero weights and bias [1,-1] under relu") {
  DenseLayer layer = make_dense(3, 2, Activation::kRelu);
  layer.W.var.mutable_value().zero();
  layer.b.var.mutable_value() = Tensor({2}, {1.0, -1.0});
  ad::Var y = layer.forward(ad::Var::constant(random_tensor({5, 3}, 6)));
  for (int64_t i = 0; i < 5; ++i) {
    CHECK(y.value().at(i, 0) == 1.0);
    CHECK(y.value().at(i, 1) == 0.0);
  }
}

TEST_CASE("dense matches an independent matrix-product oracle") {
  DenseLayer layer = make_dense(4, 6, Activation::kNone, 7);
  const Tensor x = random_tensor({3, 4}, 8);
  ad::Var y = layer.forward(ad::Var::constant(x));
  const Tensor& w = layer.W.var.value();
  const Tensor& b = layer.b.var.value();
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 6; ++j) {
      double acc = b[j];
      for (int64_t p = 0; p < 4; ++p) acc += x.at(i, p) * w.at(p, j);
      CHECK(y.value().at(i, j) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("dense shape mismatch raises a dimension error") {
  DenseLayer layer = make_dense(4, 6, Activation::kNone);
  CHECK_THROWS_AS(layer.forward(ad::Var::constant(Tensor::zeros({3, 5}))), DimensionError);
}

TEST_CASE("relu dense is positively homogeneous in W and b") {
  const Tensor x = random_tensor({4, 5}, 9);
  DenseLayer layer = make_dense(5, 3, Activation::kRelu, 10);
  const Tensor base = layer.forward(ad::Var::constant(x)).value();
  const double alpha = 2.75;
  Tensor& w = layer.W.var.mutable_value();
  Tensor& b = layer.b.var.mutable_value();
  for (int64_t i = 0; i < w.size(); ++i) w[i] *= alpha;
  for (int64_t i = 0; i < b.size(); ++i) b[i] *= alpha;
  const Tensor scaled = layer.forward(ad::Var::constant(x)).value();
  for (int64_t i = 0; i < base.size(); ++i) {
    CHECK(scaled[i] == doctest::Approx(alpha * base[i]).epsilon(1e-12));
  }
}

TEST_CASE("embedding padding row: zero vector, never updated") {
  RandomStream rng(11);
  EmbeddingTable table = EmbeddingTable::create("embed", 6, 4, rng);
  ad::Var padded = table.lookup({0});
  for (int64_t j = 0; j < 4; ++j) CHECK(padded.value().at(0, j) == 0.0);

  ad::backward(ad::sum_squares(table.lookup({0, 2, 0})));
  const Tensor& grad = table.E.var.grad();
  for (int64_t j = 0; j < 4; ++j) CHECK(grad.at(0, j) == 0.0);
}

TEST_CASE("embedding gather/scatter: repeated ids sum their gradients") {
  RandomStream rng(12);
  EmbeddingTable table = EmbeddingTable::create("embed", 5, 3, rng);
  ad::Var rows = table.lookup({2, 2});
  for (int64_t j = 0; j < 3; ++j) CHECK(rows.value().at(0, j) == rows.value().at(1, j));

  ad::zero_grads({table.E});
  ad::backward(ad::sum_all(rows));
  for (int64_t j = 0; j < 3; ++j) CHECK(table.E.var.grad().at(2, j) == 2.0);
}

TEST_CASE("embedding id outside the table raises") {
  RandomStream rng(13);
  EmbeddingTable table = EmbeddingTable::create("embed", 5, 3, rng);
  CHECK_THROWS_AS(table.lookup({5}), InputError);
}

TEST_CASE("embedding gradient matches finite differences on a 5x4 table") {
  RandomStream rng(14);
  EmbeddingTable table = EmbeddingTable::create("embed", 5, 4, rng);
  const Tensor readout = random_tensor({3, 4}, 15, 0.5, 1.5);
  auto loss = [&]() {
    return ad::sum_squares(ad::mul(table.lookup({1, 3, 1}), ad::Var::constant(readout)));
  };
  // Row 0 is gradient-frozen by contract, so compare rows 1..4 only.
  ad::zero_grads({table.E});
  ad::backward(loss());
  const Tensor analytic = table.E.var.grad();
  Tensor& value = table.E.var.node()->value;
  for (int64_t i = 4; i < value.size(); ++i) {  // skip row 0
    const double saved = value[i];
    value[i] = saved + 1e-5;
    const double lp = loss().value()[0];
    value[i] = saved - 1e-5;
    const double lm = loss().value()[0];
    value[i] = saved;
    const double numeric = (lp - lm) / 2e-5;
    CHECK(analytic[i] == doctest::Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("embedding padding row is bitwise unchanged by gradient steps") {
  RandomStream rng(16);
  EmbeddingTable table = EmbeddingTable::create("embed", 8, 4, rng);
  const Tensor row0_before = [&] {
    Tensor t({4});
    for (int64_t j = 0; j < 4; ++j) t[j] = table.E.var.value().at(0, j);
    return t;
  }();
  // A few manual sgd steps over lookups that include the padding id.
  for (int step = 0; step < 5; ++step) {
    ad::zero_grads({table.E});
    ad::backward(ad::sum_squares(table.lookup({0, 1, 2, 0, 3})));
    Tensor& value = table.E.var.node()->value;
    const Tensor& grad = table.E.var.grad();
    for (int64_t i = 0; i < value.size(); ++i) value[i] -= 0.05 * grad[i];
  }
  for (int64_t j = 0; j < 4; ++j) CHECK(table.E.var.value().at(0, j) == row0_before[j]);
}

TEST_CASE("dropout p=0 and infer mode are the identity") {
  DropoutLayer off(0.0, 1);
  const Tensor x = random_tensor({6, 5}, 17);
  CHECK(off.apply(ad::Var::constant(x), Mode::kTrain).value().data()[3] == x[3]);

  DropoutLayer heavy(0.7, 2);
  ad::Var y = heavy.apply(ad::Var::constant(x), Mode::kInfer);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y.value()[i] == x[i]);
}

TEST_CASE("dropout sample mean at p=0.5 over 1e5 unit entries") {
  DropoutLayer layer(0.5, 42);
  ad::Var ones = ad::Var::constant(Tensor::full({100000}, 1.0));
  ad::Var y = layer.apply(ones, Mode::kTrain);
  double mean = 0.0;
  for (int64_t i = 0; i < y.value().size(); ++i) mean += y.value()[i];
  mean /= static_cast<double>(y.value().size());
  CHECK(mean > 0.99);
  CHECK(mean < 1.01);
}

TEST_CASE("dropout expectation preservation per entry") {
  DropoutLayer layer(0.2, 7);
  const Tensor x = random_tensor({8}, 18, 0.5, 2.0);
  Tensor sum = Tensor::zeros({8});
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) {
    ad::Var y = layer.apply(ad::Var::constant(x), Mode::kTrain);
    for (int64_t i = 0; i < 8; ++i) sum[i] += y.value()[i];
  }
  for (int64_t i = 0; i < 8; ++i) {
    CHECK(sum[i] / reps == doctest::Approx(x[i]).epsilon(0.02));
  }
}

TEST_CASE("frozen dropout reuses the same mask each forward") {
  DropoutLayer layer(0.5, 5);
  layer.freeze(true);
  const Tensor x = random_tensor({32}, 19);
  layer.begin_forward();
  const Tensor a = layer.apply(ad::Var::constant(x), Mode::kTrain).value();
  layer.begin_forward();
  const Tensor b = layer.apply(ad::Var::constant(x), Mode::kTrain).value();
  for (int64_t i = 0; i < 32; ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("batchnorm constant column collapses to ~0") {
  RandomStream rng(20);
  BatchNormLayer bn = BatchNormLayer::create("bn", 3, rng);
  Tensor x({4, 3});
  for (int64_t i = 0; i < 4; ++i) {
    x.at(i, 0) = 7.5;  // constant column
    x.at(i, 1) = static_cast<double>(i);
    x.at(i, 2) = -static_cast<double>(i);
  }
  ad::Var y = bn.forward(ad::Var::constant(x), Mode::kTrain);
  for (int64_t i = 0; i < 4; ++i) CHECK(std::abs(y.value().at(i, 0)) < 1e-3);
}

TEST_CASE("batchnorm train output has zero mean and unit variance") {
  RandomStream rng(21);
  BatchNormLayer bn = BatchNormLayer::create("bn", 4, rng);
  const Tensor x = random_tensor({8, 4}, 22, -3.0, 3.0);
  ad::Var y = bn.forward(ad::Var::constant(x), Mode::kTrain);
  for (int64_t j = 0; j < 4; ++j) {
    double mean = 0.0;
    for (int64_t i = 0; i < 8; ++i) mean += y.value().at(i, j);
    mean /= 8.0;
    CHECK(std::abs(mean) < 1e-10);
    double var = 0.0;
    for (int64_t i = 0; i < 8; ++i) var += (y.value().at(i, j) - mean) * (y.value().at(i, j) - mean);
    var /= 8.0;
    CHECK(std::abs(var - 1.0) < 1e-6 + bn.eps());  // unit up to eps_bn
  }
}

TEST_CASE("batchnorm train mode rejects singleton batches") {
  RandomStream rng(23);
  BatchNormLayer bn = BatchNormLayer::create("bn", 4, rng);
  CHECK_THROWS_AS(bn.forward(ad::Var::constant(Tensor::zeros({1, 4})), Mode::kTrain), ContractError);
}

TEST_CASE("batchnorm gradients match finite differences") {
  RandomStream rng(24);
  BatchNormLayer bn = BatchNormLayer::create("bn", 4, rng);
  Tensor x0 = random_tensor({8, 4}, 25);
  for (int64_t i = 0; i < 8; ++i) {
    for (int64_t j = 0; j < 4; ++j) x0.at(i, j) += (i % 2 == 0 ? 1.0 : -1.0);
  }
  ad::Parameter x = {"x", ad::Var::leaf(std::move(x0))};
  const Tensor readout = random_tensor({8, 4}, 26, 0.5, 1.5);
  auto loss = [&]() {
    return ad::sum_squares(
        ad::mul(bn.forward(x.var, Mode::kTrain), ad::Var::constant(readout)));
  };
  for (const auto& r : fd_compare(loss, {x, bn.gamma(), bn.beta()})) {
    CHECK_MESSAGE(r.pass(1e-6), r.name << " rel " << r.rel);
  }
}

TEST_CASE("batchnorm infer mode is a fixed affine map from running stats") {
  RandomStream rng(27);
  BatchNormLayer bn = BatchNormLayer::create("bn", 3, rng);
  // Drive the running stats away from the init.
  for (int step = 0; step < 10; ++step) {
    bn.forward(ad::Var::constant(random_tensor({6, 3}, 30 + step, -2.0, 5.0)), Mode::kTrain);
  }
  CHECK(bn.running_var()[0] >= 0.0);
  const Tensor x = random_tensor({4, 3}, 40);
  const Tensor y1 = bn.forward(ad::Var::constant(x), Mode::kInfer).value();
  const Tensor y2 = bn.forward(ad::Var::constant(x), Mode::kInfer).value();
  for (int64_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
  // Affine check against the formula.
  for (int64_t i = 0; i < 4; ++i) {
    for (int64_t j = 0; j < 3; ++j) {
      const double expect = (x.at(i, j) - bn.running_mean()[j]) /
                                std::sqrt(bn.running_var()[j] + bn.eps()) * bn.gamma().var.value()[j] +
                            bn.beta().var.value()[j];
      CHECK(y1.at(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("sequence batchnorm pools batch and valid steps, skips padding") {
  RandomStream rng(50);
  BatchNormLayer bn = BatchNormLayer::create("bn", 2, rng);
  StepSequence xs;
  xs.lengths = {2, 1};
  xs.steps.push_back(ad::Var::constant(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0})));
  xs.steps.push_back(ad::Var::constant(Tensor({2, 2}, {5.0, 6.0, 99.0, 99.0})));  // row 1 padded
  StepSequence out = bn.forward_seq(xs, Mode::kTrain);
  // The three valid rows are (1,2),(3,4),(5,6): mean column 0 = 3.
  // Padded output rows are zero.
  CHECK(out.steps[1].value().at(1, 0) == 0.0);
  CHECK(out.steps[1].value().at(1, 1) == 0.0);
  double mean0 = (out.steps[0].value().at(0, 0) + out.steps[0].value().at(1, 0) +
                  out.steps[1].value().at(0, 0)) /
                 3.0;
  CHECK(std::abs(mean0) < 1e-10);
  // Running mean reflects only valid rows: column 0 mean is 3, not (1+3+5+99)/4.
  CHECK(bn.running_mean()[0] == doctest::Approx(0.1 * 3.0).epsilon(1e-12));
}

}  // TEST_SUITE
