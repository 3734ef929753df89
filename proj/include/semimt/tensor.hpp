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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semimt/common.hpp"

namespace semimt {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using MaskMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
class Graph;

/// Handle to one recorded value. Copy freely; the data lives in the Graph.
template <class Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  std::int32_t id = -1;

  const Mat<Scalar>& value() const { return graph->value(*this); }
  const Mat<Scalar>& grad() const { return graph->grad(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Addresses one dropout site: the mask is a pure function of
/// (seed, tag, step, element index), so runs are reproducible and two
/// sites never share a mask.
struct DropoutPlan {
  std::uint64_t seed = 0;
  std::uint64_t tag = 0;  // fnv1a of the site name
  std::int64_t step = 0;
};

/// Reverse-mode tape over dense matrices. Values are rank-2 (scalars are
/// 1x1); every op validates shapes and rejects non-finite results. One
/// graph per training step; single-threaded.
template <class Scalar>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Constant leaf (no gradient).
  Var<Scalar> input(Mat<Scalar> m) { return push(std::move(m), false, {}, nullptr); }

  /// Differentiable leaf.
  Var<Scalar> param(Mat<Scalar> m) { return push(std::move(m), true, {}, nullptr); }

  const Mat<Scalar>& value(Var<Scalar> v) const { return nodes_[check(v)].value; }
  const Mat<Scalar>& grad(Var<Scalar> v) const { return nodes_[check(v)].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulates d(loss)/d(leaf) into every differentiable node reachable
  /// from `loss`; unreachable ones keep their zero initialization.
  void backward(Var<Scalar> loss) {
    std::size_t lid = check(loss);
    if (nodes_[lid].value.size() != 1) throw std::runtime_error("backward: loss must be scalar");
    for (auto& n : nodes_) n.grad.setZero();
    nodes_[lid].grad(0, 0) = Scalar(1);
    for (std::size_t i = lid + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.backprop) n.backprop(*this, i);
    }
  }

  // -- used by the free-function ops ---------------------------------------

  using BackFn = std::function<void(Graph&, std::size_t)>;

  Var<Scalar> push(Mat<Scalar> value, bool requires_grad, std::vector<std::int32_t> parents,
                   BackFn back) {
    if (!value.allFinite()) throw std::runtime_error("non-finite values in tensor op result");
    Node n;
    n.grad = Mat<Scalar>::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.parents = std::move(parents);
    n.backprop = std::move(back);
    nodes_.push_back(std::move(n));
    return Var<Scalar>{this, static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  bool requires_grad(Var<Scalar> v) const { return nodes_[check(v)].requires_grad; }

  Mat<Scalar>& grad_ref(std::int32_t id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Mat<Scalar>& value_of(std::int32_t id) const {
    return nodes_[static_cast<std::size_t>(id)].value;
  }
  bool node_requires_grad(std::int32_t id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  const Mat<Scalar>& upstream(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Mat<Scalar> value;
    Mat<Scalar> grad;
    bool requires_grad = false;
    std::vector<std::int32_t> parents;
    BackFn backprop;
  };

  std::size_t check(Var<Scalar> v) const {
    if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw std::runtime_error("Var does not belong to this graph");
    return static_cast<std::size_t>(v.id);
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <class Scalar>
Graph<Scalar>& same_graph(Var<Scalar> a, Var<Scalar> b) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw std::runtime_error("operands recorded on different graphs");
  return *a.graph;
}

template <class Scalar>
void add_grad(Graph<Scalar>& g, std::int32_t id, const Mat<Scalar>& contribution) {
  if (g.node_requires_grad(id)) g.grad_ref(id) += contribution;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Core ops. All are free functions returning a new recorded Var.
// ---------------------------------------------------------------------------

template <class Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  auto& g = detail::same_graph(a, b);
  if (a.cols() != b.rows()) throw std::runtime_error("matmul: inner dimensions differ");
  Mat<Scalar> out = a.value() * b.value();
  bool rg = g.requires_grad(a) || g.requires_grad(b);
  auto ia = a.id, ib = b.id;
  return g.push(std::move(out), rg, {ia, ib}, [ia, ib](Graph<Scalar>& gg, std::size_t self) {
    const Mat<Scalar>& up = gg.upstream(self);
    detail::add_grad(gg, ia, Mat<Scalar>(up * gg.value_of(ib).transpose()));
    detail::add_grad(gg, ib, Mat<Scalar>(gg.value_of(ia).transpose() * up));
  });
}

template <class Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  auto& g = detail::same_graph(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::runtime_error("add: shape mismatch");
  Mat<Scalar> out = a.value() + b.value();
  bool rg = g.requires_grad(a) || g.requires_grad(b);
  auto ia = a.id, ib = b.id;
  return g.push(std::move(out), rg, {ia, ib}, [ia, ib](Graph<Scalar>& gg, std::size_t self) {
    detail::add_grad(gg, ia, gg.upstream(self));
    detail::add_grad(gg, ib, gg.upstream(self));
  });
}

/// Broadcasts a 1 x d row vector over every row of a.
template <class Scalar>
Var<Scalar> add_rowwise(Var<Scalar> a, Var<Scalar> row) {
  auto& g = detail::same_graph(a, row);
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::runtime_error("add_rowwise: expected a 1 x cols(a) row vector");
  Mat<Scalar> out = a.value().rowwise() + row.value().row(0);
  bool rg = g.requires_grad(a) || g.requires_grad(row);
  auto ia = a.id, ir = row.id;
  return g.push(std::move(out), rg, {ia, ir}, [ia, ir](Graph<Scalar>& gg, std::size_t self) {
    const Mat<Scalar>& up = gg.upstream(self);
    detail::add_grad(gg, ia, up);
    detail::add_grad(gg, ir, Mat<Scalar>(up.colwise().sum()));
  });
}

/// alpha * a + beta, elementwise.
template <class Scalar>
Var<Scalar> affine(Var<Scalar> a, Scalar alpha, Scalar beta) {
  auto& g = *a.graph;
  Mat<Scalar> out = (a.value().array() * alpha + beta).matrix();
  auto ia = a.id;
  return g.push(std::move(out), g.requires_grad(a), {ia},
                [ia, alpha](Graph<Scalar>& gg, std::size_t self) {
                  detail::add_grad(gg, ia, Mat<Scalar>(gg.upstream(self) * alpha));
                });
}

template <class Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar alpha) {
  return affine(a, alpha, Scalar(0));
}

template <class Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  auto& g = detail::same_graph(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::runtime_error("mul: shape mismatch");
  Mat<Scalar> out = a.value().cwiseProduct(b.value());
  bool rg = g.requires_grad(a) || g.requires_grad(b);
  auto ia = a.id, ib = b.id;
  return g.push(std::move(out), rg, {ia, ib}, [ia, ib](Graph<Scalar>& gg, std::size_t self) {
    const Mat<Scalar>& up = gg.upstream(self);
    detail::add_grad(gg, ia, Mat<Scalar>(up.cwiseProduct(gg.value_of(ib))));
    detail::add_grad(gg, ib, Mat<Scalar>(up.cwiseProduct(gg.value_of(ia))));
  });
}

/// Scales row i of a by s(i, 0); s is a rows(a) x 1 column.
template <class Scalar>
Var<Scalar> row_scale(Var<Scalar> a, Var<Scalar> s) {
  auto& g = detail::same_graph(a, s);
  if (s.cols() != 1 || s.rows() != a.rows())
    throw std::runtime_error("row_scale: expected a rows(a) x 1 column");
  Mat<Scalar> out = a.value().array().colwise() * s.value().col(0).array();
  bool rg = g.requires_grad(a) || g.requires_grad(s);
  auto ia = a.id, is = s.id;
  return g.push(std::move(out), rg, {ia, is}, [ia, is](Graph<Scalar>& gg, std::size_t self) {
    const Mat<Scalar>& up = gg.upstream(self);
    detail::add_grad(gg, ia,
                     Mat<Scalar>(up.array().colwise() * gg.value_of(is).col(0).array()));
    if (gg.node_requires_grad(is))
      gg.grad_ref(is).col(0) += up.cwiseProduct(gg.value_of(ia)).rowwise().sum();
  });
}

template <class Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  auto& g = *a.graph;
  Mat<Scalar> out = a.value().transpose();
  auto ia = a.id;
  return g.push(std::move(out), g.requires_grad(a), {ia},
                [ia](Graph<Scalar>& gg, std::size_t self) {
                  detail::add_grad(gg, ia, Mat<Scalar>(gg.upstream(self).transpose()));
                });
}

/// axis 0 stacks rows, axis 1 stacks columns.
template <class Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, int axis) {
  if (parts.empty()) throw std::runtime_error("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::runtime_error("concat: axis must be 0 or 1");
  Graph<Scalar>& g = *parts[0].graph;
  Eigen::Index rows = parts[0].rows(), cols = parts[0].cols();
  Eigen::Index total = 0;
  bool rg = false;
  for (const auto& p : parts) {
    detail::same_graph(parts[0], p);
    if (axis == 0 && p.cols() != cols) throw std::runtime_error("concat: column mismatch");
    if (axis == 1 && p.rows() != rows) throw std::runtime_error("concat: row mismatch");
    total += (axis == 0 ? p.rows() : p.cols());
    rg = rg || g.requires_grad(p);
  }
  Mat<Scalar> out(axis == 0 ? total : rows, axis == 0 ? cols : total);
  Eigen::Index off = 0;
  std::vector<std::int32_t> ids;
  std::vector<Eigen::Index> sizes;
  for (const auto& p : parts) {
    Eigen::Index n = (axis == 0 ? p.rows() : p.cols());
    if (axis == 0)
      out.middleRows(off, n) = p.value();
    else
      out.middleCols(off, n) = p.value();
    off += n;
    ids.push_back(p.id);
    sizes.push_back(n);
  }
  return g.push(std::move(out), rg, ids,
                [ids, sizes, axis](Graph<Scalar>& gg, std::size_t self) {
                  const Mat<Scalar>& up = gg.upstream(self);
                  Eigen::Index off = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    if (axis == 0)
                      detail::add_grad(gg, ids[k], Mat<Scalar>(up.middleRows(off, sizes[k])));
                    else
                      detail::add_grad(gg, ids[k], Mat<Scalar>(up.middleCols(off, sizes[k])));
                    off += sizes[k];
                  }
                });
}

/// Inverse of concat: cuts a into consecutive blocks of the given sizes.
template <class Scalar>
std::vector<Var<Scalar>> split(Var<Scalar> a, const std::vector<Eigen::Index>& sizes, int axis) {
  if (axis != 0 && axis != 1) throw std::runtime_error("split: axis must be 0 or 1");
  Graph<Scalar>& g = *a.graph;
  Eigen::Index total = 0;
  for (auto s : sizes) total += s;
  if (total != (axis == 0 ? a.rows() : a.cols())) throw std::runtime_error("split: sizes do not cover input");
  std::vector<Var<Scalar>> out;
  Eigen::Index off = 0;
  for (Eigen::Index n : sizes) {
    Mat<Scalar> block;
    if (axis == 0)
      block = a.value().middleRows(off, n);
    else
      block = a.value().middleCols(off, n);
    auto ia = a.id;
    auto o = off;
    out.push_back(g.push(std::move(block), g.requires_grad(a), {ia},
                         [ia, o, n, axis](Graph<Scalar>& gg, std::size_t self) {
                           if (!gg.node_requires_grad(ia)) return;
                           if (axis == 0)
                             gg.grad_ref(ia).middleRows(o, n) += gg.upstream(self);
                           else
                             gg.grad_ref(ia).middleCols(o, n) += gg.upstream(self);
                         }));
    off += n;
  }
  return out;
}

namespace detail {

template <class Scalar>
void softmax_backprop(Graph<Scalar>& gg, std::size_t self, std::int32_t ia) {
  if (!gg.node_requires_grad(ia)) return;
  const Mat<Scalar>& y = gg.value_of(static_cast<std::int32_t>(self));
  const Mat<Scalar>& up = gg.upstream(self);
  Mat<Scalar> prod = up.cwiseProduct(y);
  Mat<Scalar> dx = prod;
  dx -= (y.array().colwise() * prod.rowwise().sum().array()).matrix();
  gg.grad_ref(ia) += dx;
}

}  // namespace detail

/// Softmax along `axis` (default 1: each row sums to one).
template <class Scalar>
Var<Scalar> softmax(Var<Scalar> a, int axis = 1) {
  if (axis != 0 && axis != 1) throw std::runtime_error("softmax: axis must be 0 or 1");
  if (axis == 0) return transpose(softmax(transpose(a), 1));
  Graph<Scalar>& g = *a.graph;
  Mat<Scalar> out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Scalar mx = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  auto ia = a.id;
  return g.push(std::move(out), g.requires_grad(a), {ia},
                [ia](Graph<Scalar>& gg, std::size_t self) { detail::softmax_backprop(gg, self, ia); });
}

/// Rowwise softmax over entries where keep(i, j) is true; the rest are
/// exactly zero. A row with nothing kept is degenerate and raises.
template <class Scalar>
Var<Scalar> masked_softmax(Var<Scalar> a, const MaskMat& keep) {
  Graph<Scalar>& g = *a.graph;
  if (keep.rows() != a.rows() || keep.cols() != a.cols())
    throw std::runtime_error("masked_softmax: mask shape mismatch");
  Mat<Scalar> out = Mat<Scalar>::Zero(a.rows(), a.cols());
  const Mat<Scalar>& x = a.value();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar mx = std::numeric_limits<Scalar>::lowest();
    bool any = false;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (keep(i, j)) {
        any = true;
        mx = std::max(mx, x(i, j));
      }
    if (!any) throw std::runtime_error("masked_softmax: all positions masked for a query row");
    Scalar z = Scalar(0);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (keep(i, j)) {
        out(i, j) = std::exp(x(i, j) - mx);
        z += out(i, j);
      }
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (keep(i, j)) out(i, j) /= z;
  }
  auto ia = a.id;
  // Masked outputs are zero, so the plain softmax backprop already routes
  // them zero gradient.
  return g.push(std::move(out), g.requires_grad(a), {ia},
                [ia](Graph<Scalar>& gg, std::size_t self) { detail::softmax_backprop(gg, self, ia); });
}

template <class Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  Graph<Scalar>& g = *a.graph;
  Mat<Scalar> out = a.value().unaryExpr([](Scalar x) {
    return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                          : std::exp(x) / (Scalar(1) + std::exp(x));
  });
  auto ia = a.id;
  return g.push(std::move(out), g.requires_grad(a), {ia},
                [ia](Graph<Scalar>& gg, std::size_t self) {
                  const Mat<Scalar>& y = gg.value_of(static_cast<std::int32_t>(self));
                  detail::add_grad(
                      gg, ia,
                      Mat<Scalar>(gg.upstream(self).cwiseProduct(
                          y.cwiseProduct((Mat<Scalar>::Ones(y.rows(), y.cols()) - y)))));
                });
}

template <class Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  Graph<Scalar>& g = *a.graph;
  Mat<Scalar> out = a.value().cwiseMax(Scalar(0));
  auto ia = a.id;
  return g.push(std::move(out), g.requires_grad(a), {ia},
                [ia](Graph<Scalar>& gg, std::size_t self) {
                  const Mat<Scalar>& x = gg.value_of(ia);
                  Mat<Scalar> dx = gg.upstream(self);
                  for (Eigen::Index i = 0; i < dx.size(); ++i)
                    if (x(i) <= Scalar(0)) dx(i) = Scalar(0);
                  detail::add_grad(gg, ia, dx);
                });
}

/// Per-row normalization with learned gain and bias (both 1 x d):
/// y = (x - mean) / sqrt(var + eps) * gain + bias, population variance.
template <class Scalar>
Var<Scalar> layer_norm(Var<Scalar> a, Var<Scalar> gain, Var<Scalar> bias,
                       Scalar eps = Scalar(1e-6)) {
  auto& g = detail::same_graph(a, gain);
  detail::same_graph(a, bias);
  const Eigen::Index d = a.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d)
    throw std::runtime_error("layer_norm: gain/bias must be 1 x cols(a)");
  const Mat<Scalar>& x = a.value();
  Mat<Scalar> xhat(x.rows(), d);
  Mat<Scalar> inv_std(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar mean = x.row(i).mean();
    Scalar var = (x.row(i).array() - mean).square().sum() / Scalar(d);
    Scalar istd = Scalar(1) / std::sqrt(var + eps);
    inv_std(i, 0) = istd;
    xhat.row(i) = (x.row(i).array() - mean) * istd;
  }
  Mat<Scalar> out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
                    bias.value().row(0).array();
  bool rg = g.requires_grad(a) || g.requires_grad(gain) || g.requires_grad(bias);
  auto ia = a.id, ig = gain.id, ib = bias.id;
  return g.push(std::move(out), rg, {ia, ig, ib},
                [ia, ig, ib, xhat, inv_std, d](Graph<Scalar>& gg, std::size_t self) {
                  const Mat<Scalar>& up = gg.upstream(self);
                  if (gg.node_requires_grad(ig))
                    gg.grad_ref(ig).row(0) += up.cwiseProduct(xhat).colwise().sum();
                  if (gg.node_requires_grad(ib)) gg.grad_ref(ib).row(0) += up.colwise().sum();
                  if (gg.node_requires_grad(ia)) {
                    const auto& gain_row = gg.value_of(ig).row(0);
                    Mat<Scalar> dx(up.rows(), d);
                    for (Eigen::Index i = 0; i < up.rows(); ++i) {
                      Eigen::Array<Scalar, 1, Eigen::Dynamic> dxhat =
                          up.row(i).array() * gain_row.array();
                      Scalar m1 = dxhat.mean();
                      Scalar m2 = (dxhat * xhat.row(i).array()).mean();
                      dx.row(i) =
                          ((dxhat - m1 - xhat.row(i).array() * m2) * inv_std(i, 0)).matrix();
                    }
                    gg.grad_ref(ia) += dx;
                  }
                });
}

/// Train-time inverted dropout; identity when training is false or rate 0.
template <class Scalar>
Var<Scalar> dropout(Var<Scalar> a, double rate, const DropoutPlan& plan, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw std::runtime_error("dropout: rate must be in [0, 1)");
  Graph<Scalar>& g = *a.graph;
  if (!training || rate == 0.0) {
    auto ia = a.id;
    return g.push(Mat<Scalar>(a.value()), g.requires_grad(a), {ia},
                  [ia](Graph<Scalar>& gg, std::size_t self) {
                    detail::add_grad(gg, ia, gg.upstream(self));
                  });
  }
  std::uint64_t base =
      fnv1a_u64(static_cast<std::uint64_t>(plan.step), fnv1a_u64(plan.tag, fnv1a_u64(plan.seed)));
  const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
  Mat<Scalar> mask(a.rows(), a.cols());
  const Mat<Scalar>& x = a.value();
  Mat<Scalar> out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::uint64_t s = base + static_cast<std::uint64_t>(i) + 1;
    double u = static_cast<double>(splitmix64(s) >> 11) * (1.0 / 9007199254740992.0);
    mask(i) = (u >= rate) ? keep_scale : Scalar(0);
    out(i) = x(i) * mask(i);
  }
  auto ia = a.id;
  return g.push(std::move(out), g.requires_grad(a), {ia},
                [ia, mask](Graph<Scalar>& gg, std::size_t self) {
                  detail::add_grad(gg, ia, Mat<Scalar>(gg.upstream(self).cwiseProduct(mask)));
                });
}

/// Gathers rows of `table` by id; gradients scatter-add back.
template <class Scalar>
Var<Scalar> embedding_lookup(Var<Scalar> table, const std::vector<std::int32_t>& ids) {
  Graph<Scalar>& g = *table.graph;
  Mat<Scalar> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || ids[t] >= table.rows())
      throw std::runtime_error("embedding_lookup: id out of range");
    out.row(static_cast<Eigen::Index>(t)) = table.value().row(ids[t]);
  }
  auto it = table.id;
  return g.push(std::move(out), g.requires_grad(table), {it},
                [it, ids](Graph<Scalar>& gg, std::size_t self) {
                  if (!gg.node_requires_grad(it)) return;
                  const Mat<Scalar>& up = gg.upstream(self);
                  for (std::size_t t = 0; t < ids.size(); ++t)
                    gg.grad_ref(it).row(ids[t]) += up.row(static_cast<Eigen::Index>(t));
                });
}

/// Label-smoothed cross entropy, averaged over non-pad positions. The
/// smoothed target puts 1 - uncertainty on the gold token and
/// uncertainty / (V - 1) on each other token; rows whose target is pad_id
/// contribute nothing.
template <class Scalar>
Var<Scalar> cross_entropy_label_smoothed(Var<Scalar> logits, const std::vector<std::int32_t>& targets,
                                         double uncertainty, std::int32_t pad_id = 0) {
  Graph<Scalar>& g = *logits.graph;
  if (uncertainty < 0.0 || uncertainty >= 1.0)
    throw std::runtime_error("cross_entropy: uncertainty must be in [0, 1)");
  const Eigen::Index v = logits.cols();
  if (v < 2) throw std::runtime_error("cross_entropy: vocabulary must have at least 2 entries");
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
    throw std::runtime_error("cross_entropy: targets length must equal logits rows");

  const Mat<Scalar>& x = logits.value();
  Mat<Scalar> logp(x.rows(), v);
  Eigen::Index live = 0;
  Scalar total = Scalar(0);
  const Scalar on = Scalar(1.0 - uncertainty);
  const Scalar off = Scalar(uncertainty / static_cast<double>(v - 1));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Scalar mx = x.row(i).maxCoeff();
    Scalar lse = std::log((x.row(i).array() - mx).exp().sum()) + mx;
    logp.row(i) = x.row(i).array() - lse;
    std::int32_t gold = targets[static_cast<std::size_t>(i)];
    if (gold == pad_id) continue;
    if (gold < 0 || gold >= v) throw std::runtime_error("cross_entropy: target id out of range");
    ++live;
    Scalar row_loss = -on * logp(i, gold);
    if (off > Scalar(0)) {
      Scalar rest = logp.row(i).sum() - logp(i, gold);
      row_loss -= off * rest;
    }
    total += row_loss;
  }
  if (live == 0) throw std::runtime_error("cross_entropy: every position is padding");
  Mat<Scalar> out(1, 1);
  out(0, 0) = total / Scalar(live);

  auto il = logits.id;
  return g.push(std::move(out), g.requires_grad(logits), {il},
                [il, targets, logp, on, off, live, pad_id](Graph<Scalar>& gg, std::size_t self) {
                  if (!gg.node_requires_grad(il)) return;
                  const Scalar upstream = gg.upstream(self)(0, 0);
                  const Scalar inv = upstream / Scalar(live);
                  Mat<Scalar> dx = Mat<Scalar>::Zero(logp.rows(), logp.cols());
                  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
                    std::int32_t gold = targets[static_cast<std::size_t>(i)];
                    if (gold == pad_id) continue;
                    // d/dx of -sum q log softmax(x) = softmax(x) - q.
                    dx.row(i) = logp.row(i).array().exp() * inv;
                    dx.row(i).array() -= off * inv;
                    dx(i, gold) -= (on - off) * inv;
                  }
                  gg.grad_ref(il) += dx;
                });
}

template <class Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Graph<Scalar>& g = *a.graph;
  Mat<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  auto ia = a.id;
  return g.push(std::move(out), g.requires_grad(a), {ia},
                [ia](Graph<Scalar>& gg, std::size_t self) {
                  const Scalar u = gg.upstream(self)(0, 0);
                  const Mat<Scalar>& x = gg.value_of(ia);
                  detail::add_grad(gg, ia, Mat<Scalar>(Mat<Scalar>::Constant(x.rows(), x.cols(), u)));
                });
}

}  // namespace semimt
