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

#include <cmath>
#include <functional>

#include <doctest.h>

#include "oracles.hpp"
#include "semimt/tensor.hpp"

using namespace semimt;
using Eigen::MatrixXd;

namespace {

MatrixXd random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -2.0, double hi = 2.0) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(lo, hi);
  return m;
}

// Checks d loss/d x for a scalar-valued builder against central differences.
void check_gradient(const std::function<Var<double>(Graph<double>&, Var<double>)>& build,
                    const MatrixXd& x0, double tol = 1e-4) {
  auto eval = [&](const MatrixXd& x) {
    Graph<double> g;
    Var<double> loss = build(g, g.param(x));
    return loss.value()(0, 0);
  };
  Graph<double> g;
  Var<double> leaf = g.param(x0);
  Var<double> loss = build(g, leaf);
  g.backward(loss);
  MatrixXd analytic = leaf.grad();
  MatrixXd numeric = oracle::finite_diff(eval, x0);
  CHECK(oracle::max_rel_err(analytic, numeric) < tol);
}

}  // namespace

TEST_CASE("softmax: symmetry example and row sums") {
  Graph<double> g;
  MatrixXd x(1, 2);
  x << 0, 0;
  Var<double> y = softmax(g.input(x));
  CHECK(y.value()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y.value()(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(1);
  MatrixXd big = random_mat(rng, 7, 9, -30.0, 30.0);
  Var<double> sm = softmax(g.input(big));
  for (Eigen::Index i = 0; i < sm.rows(); ++i)
    CHECK(std::abs(sm.value().row(i).sum() - 1.0) < 1e-12);
}

TEST_CASE("layer_norm: worked example with eps 0") {
  Graph<double> g;
  MatrixXd x(1, 2);
  x << 1, 3;
  MatrixXd ones(1, 2), zeros(1, 2);
  ones.setOnes();
  zeros.setZero();
  Var<double> y = layer_norm(g.input(x), g.input(ones), g.input(zeros), 0.0);
  CHECK(y.value()(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(y.value()(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sigmoid(0) = 0.5") {
  Graph<double> g;
  MatrixXd x(1, 1);
  x << 0;
  CHECK(sigmoid(g.input(x)).value()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("cross entropy: uniform logits, no smoothing") {
  Graph<double> g;
  MatrixXd logits(1, 2);
  logits << 0, 0;
  Var<double> loss = cross_entropy_label_smoothed(g.input(logits), {1}, 0.0);
  CHECK(loss.value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy: pad positions contribute nothing") {
  Graph<double> g;
  MatrixXd logits(3, 4);
  logits << 0.3, -1, 2, 0.1, 9, 9, 9, 9, 0.5, 0.4, -2, 1;
  Var<double> full = cross_entropy_label_smoothed(g.input(logits), {2, 0, 1}, 0.1);
  MatrixXd two_rows(2, 4);
  two_rows << 0.3, -1, 2, 0.1, 0.5, 0.4, -2, 1;
  Var<double> without = cross_entropy_label_smoothed(g.input(two_rows), {2, 1}, 0.1);
  CHECK(full.value()(0, 0) == doctest::Approx(without.value()(0, 0)).epsilon(1e-12));
  CHECK_THROWS_AS(cross_entropy_label_smoothed(g.input(logits), {0, 0, 0}, 0.1),
                  std::runtime_error);
}

TEST_CASE("cross entropy: uncertainty 0 equals plain cross-entropy") {
  Rng rng(4);
  for (int iter = 0; iter < 20; ++iter) {
    MatrixXd logits = random_mat(rng, 5, 7);
    std::vector<std::int32_t> targets;
    for (int i = 0; i < 5; ++i) targets.push_back(1 + static_cast<std::int32_t>(rng.next_below(6)));
    Graph<double> g;
    Var<double> smoothed = cross_entropy_label_smoothed(g.input(logits), targets, 0.0);
    // plain CE by hand
    double want = 0.0;
    for (int i = 0; i < 5; ++i) {
      double mx = logits.row(i).maxCoeff();
      double lse = std::log((logits.row(i).array() - mx).exp().sum()) + mx;
      want -= logits(i, targets[static_cast<std::size_t>(i)]) - lse;
    }
    want /= 5.0;
    CHECK(smoothed.value()(0, 0) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("backward: x squared at 3") {
  Graph<double> g;
  MatrixXd x(1, 1);
  x << 3;
  Var<double> leaf = g.param(x);
  Var<double> loss = sum(mul(leaf, leaf));
  g.backward(loss);
  CHECK(leaf.grad()(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward: sum of softmax has zero gradient") {
  Graph<double> g;
  Rng rng(3);
  MatrixXd x = random_mat(rng, 2, 5);
  Var<double> leaf = g.param(x);
  Var<double> loss = sum(softmax(leaf));
  g.backward(loss);
  CHECK(leaf.grad().lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("backward: non-scalar loss rejected; unreachable leaves get zero") {
  Graph<double> g;
  MatrixXd x(2, 2);
  x.setOnes();
  Var<double> a = g.param(x);
  Var<double> b = g.param(x);
  CHECK_THROWS_AS(g.backward(a), std::runtime_error);
  Var<double> loss = sum(a);
  g.backward(loss);
  CHECK(b.grad().lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(a.grad()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("non-finite results are rejected") {
  Graph<double> g;
  MatrixXd x(1, 1);
  x << 1e308;
  Var<double> leaf = g.input(x);
  CHECK_THROWS_AS(mul(leaf, leaf), std::runtime_error);
}

TEST_CASE("concat/split round trip on both axes") {
  Graph<double> g;
  Rng rng(5);
  MatrixXd a = random_mat(rng, 3, 4), b = random_mat(rng, 2, 4), c = random_mat(rng, 1, 4);
  Var<double> cat = concat<double>({g.input(a), g.input(b), g.input(c)}, 0);
  auto parts = split(cat, {3, 2, 1}, 0);
  CHECK((parts[0].value() - a).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((parts[1].value() - b).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((parts[2].value() - c).lpNorm<Eigen::Infinity>() == 0.0);

  MatrixXd d = random_mat(rng, 3, 2);
  Var<double> cat1 = concat<double>({g.input(a), g.input(d)}, 1);
  auto parts1 = split(cat1, {4, 2}, 1);
  CHECK((parts1[0].value() - a).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((parts1[1].value() - d).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("dropout: rate 0 and eval mode are the identity; train mode rescales") {
  Graph<double> g;
  Rng rng(6);
  MatrixXd x = random_mat(rng, 4, 6);
  DropoutPlan plan{12, fnv1a("site"), 3};
  CHECK((dropout(g.input(x), 0.0, plan, true).value() - x).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((dropout(g.input(x), 0.5, plan, false).value() - x).lpNorm<Eigen::Infinity>() == 0.0);

  Var<double> dropped = dropout(g.input(x), 0.5, plan, true);
  Var<double> again = dropout(g.input(x), 0.5, plan, true);
  CHECK((dropped.value() - again.value()).lpNorm<Eigen::Infinity>() == 0.0);  // same plan, same mask
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = dropped.value()(i);
    CHECK((v == 0.0 || v == doctest::Approx(2.0 * x(i)).epsilon(1e-12)));
  }
  DropoutPlan other{12, fnv1a("site"), 4};
  Var<double> moved = dropout(g.input(x), 0.5, other, true);
  CHECK((moved.value() - dropped.value()).lpNorm<Eigen::Infinity>() > 0.0);  // step changes mask
}

TEST_CASE("masked softmax: masked entries are exactly zero, kept rows sum to 1") {
  Graph<double> g;
  Rng rng(7);
  MatrixXd x = random_mat(rng, 3, 5);
  MaskMat keep(3, 5);
  keep.setConstant(true);
  keep(0, 2) = false;
  keep(1, 0) = false;
  keep(1, 1) = false;
  Var<double> y = masked_softmax(g.input(x), keep);
  CHECK(y.value()(0, 2) == 0.0);
  CHECK(y.value()(1, 0) == 0.0);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(y.value().row(i).sum() - 1.0) < 1e-12);

  MaskMat none(1, 2);
  none.setConstant(false);
  MatrixXd row(1, 2);
  row.setZero();
  CHECK_THROWS_AS(masked_softmax(g.input(row), none), std::runtime_error);
}

TEST_CASE("gradient checks: every differentiable op, 100 random instances") {
  Rng rng(99);
  MatrixXd wsum(1, 1);

  for (int iter = 0; iter < 100; ++iter) {
    Eigen::Index r = 1 + static_cast<Eigen::Index>(rng.next_below(3));
    Eigen::Index c = 2 + static_cast<Eigen::Index>(rng.next_below(3));
    MatrixXd x0 = random_mat(rng, r, c);
    MatrixXd other = random_mat(rng, c, r);
    MatrixXd same = random_mat(rng, r, c);
    MatrixXd row = random_mat(rng, 1, c);
    MatrixXd col = random_mat(rng, r, 1);

    check_gradient([&](Graph<double>& g, Var<double> v) { return sum(matmul(v, g.input(other))); }, x0);
    check_gradient([&](Graph<double>& g, Var<double> v) { return sum(matmul(g.input(other), v)); }, x0);
    check_gradient([&](Graph<double>& g, Var<double> v) { return sum(add(v, g.input(same))); }, x0);
    check_gradient([&](Graph<double>& g, Var<double> v) { return sum(add_rowwise(v, g.input(row))); }, x0);
    check_gradient(
        [&](Graph<double>& g, Var<double> v) { return sum(add_rowwise(g.input(x0), v)); }, row);
    check_gradient([&](Graph<double>&, Var<double> v) { return sum(affine(v, 1.7, -0.3)); }, x0);
    check_gradient([&](Graph<double>& g, Var<double> v) { return sum(mul(v, g.input(same))); }, x0);
    check_gradient([&](Graph<double>& g, Var<double> v) { return sum(row_scale(v, g.input(col))); }, x0);
    check_gradient([&](Graph<double>& g, Var<double> v) { return sum(row_scale(g.input(x0), v)); }, col);
    check_gradient([&](Graph<double>&, Var<double> v) { return sum(transpose(v)); }, x0);
    check_gradient(
        [&](Graph<double>& g, Var<double> v) {
          // weight the softmax so its gradient is not identically zero
          return sum(mul(softmax(v), g.input(same)));
        },
        x0);
    check_gradient([&](Graph<double>&, Var<double> v) { return sum(sigmoid(v)); }, x0);
    // keep relu inputs away from the kink
    MatrixXd shifted = x0;
    for (Eigen::Index i = 0; i < shifted.size(); ++i)
      if (std::abs(shifted(i)) < 0.05) shifted(i) = 0.1;
    check_gradient([&](Graph<double>&, Var<double> v) { return sum(relu(v)); }, shifted);
    check_gradient(
        [&](Graph<double>& g, Var<double> v) {
          return sum(mul(layer_norm(v, g.input(row), g.input(row)), g.input(same)));
        },
        x0);
    check_gradient(
        [&](Graph<double>& g, Var<double> v) {
          return sum(mul(layer_norm(g.input(x0), v, g.input(row)), g.input(same)));
        },
        row);
    DropoutPlan plan{7, fnv1a("gradcheck"), iter};
    check_gradient(
        [&](Graph<double>&, Var<double> v) { return sum(dropout(v, 0.3, plan, true)); }, x0);
    std::vector<std::int32_t> targets;
    for (Eigen::Index i = 0; i < r; ++i)
      targets.push_back(1 + static_cast<std::int32_t>(rng.next_below(static_cast<std::uint64_t>(c - 1))));
    check_gradient(
        [&](Graph<double>&, Var<double> v) {
          return cross_entropy_label_smoothed(v, targets, 0.1);
        },
        x0);
    check_gradient(
        [&](Graph<double>& g, Var<double> v) {
          auto parts = split(v, {1, c - 1}, 1);
          return sum(mul(concat<double>({parts[1], parts[0]}, 1), g.input(same)));
        },
        x0);
    std::vector<std::int32_t> ids = {0, static_cast<std::int32_t>(r - 1), 0};
    MatrixXd lookup_weight = random_mat(rng, 3, c);
    check_gradient(
        [&](Graph<double>& g, Var<double> v) {
          return sum(mul(embedding_lookup(v, ids), g.input(lookup_weight)));
        },
        x0);
  }
}

TEST_CASE("gradient check: random three-layer composition") {
  Rng rng(2020);
  for (int iter = 0; iter < 10; ++iter) {
    MatrixXd x0 = random_mat(rng, 2, 4);
    MatrixXd w1 = random_mat(rng, 4, 5);
    MatrixXd w2 = random_mat(rng, 5, 3);
    MatrixXd gain = random_mat(rng, 1, 3, 0.5, 1.5);
    MatrixXd bias = random_mat(rng, 1, 3);
    auto build = [&](Graph<double>& g, Var<double> v) {
      Var<double> h1 = sigmoid(matmul(v, g.input(w1)));
      Var<double> h2 = matmul(h1, g.input(w2));
      Var<double> h3 = layer_norm(h2, g.input(gain), g.input(bias));
      return cross_entropy_label_smoothed(h3, {1, 2}, 0.1);
    };
    check_gradient(build, x0, 1e-4);
  }
}
