// Copyright 2026 The strgg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode differentiation over Dense2D values.
//
// A Tape records every primitive applied to tracked values. Nodes are
// appended in evaluation order, so the record is already a topological
// order of the DAG; backward() walks it in reverse. Each node keeps the
// closure that produced it, which lets replay() recompute the whole record
// and confirm it is reproducible bit-for-bit.
//
// A Tape is single-writer. Create one per forward/backward pass.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "strgg/numerics/dense.hpp"

namespace strgg {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the Tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Dense2D& value() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = std::numeric_limits<std::size_t>::max();
};

/// What a backward closure sees: the upstream gradient, input values, and a
/// sink for the gradient of each input.
class BackwardContext {
 public:
  BackwardContext(Tape& tape, std::size_t node) : tape_(tape), node_(node) {}
  const Dense2D& grad_out() const;
  const Dense2D& out() const;
  const Dense2D& in(std::size_t k) const;
  bool needs(std::size_t k) const;
  void accumulate(std::size_t k, const Dense2D& g);

 private:
  Tape& tape_;
  std::size_t node_;
};

class Tape {
 public:
  using ForwardFn = std::function<Dense2D(const std::vector<const Dense2D*>&)>;
  using BackwardFn = std::function<void(BackwardContext&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is collected by backward().
  Var parameter(Dense2D value, std::string name = {}) {
    return leaf(std::move(value), true, std::move(name));
  }
  /// Leaf treated as a constant.
  Var constant(Dense2D value) { return leaf(std::move(value), false, {}); }

  Var record(std::string op, std::vector<std::size_t> parents, ForwardFn fwd, BackwardFn bwd) {
    std::vector<const Dense2D*> in;
    in.reserve(parents.size());
    bool needs = false;
    for (std::size_t p : parents) {
      in.push_back(&nodes_.at(p).value);
      needs = needs || nodes_[p].requires_grad;
    }
    Dense2D out = fwd(in);
    if (!out.all_finite()) {
      throw NumericalError(detail::concat("non-finite output from '", op, "' at tape node ",
                                          nodes_.size(), " ", out.shape()));
    }
    Node n;
    n.op = std::move(op);
    n.parents = std::move(parents);
    n.value = std::move(out);
    n.requires_grad = needs;
    n.forward = std::move(fwd);
    n.backward = std::move(bwd);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Dense2D& value(std::size_t id) const { return nodes_.at(id).value; }
  const std::string& op(std::size_t id) const { return nodes_.at(id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient of the last backward() loss with respect to `v`. Zero-filled
  /// when `v` did not contribute.
  Dense2D grad(Var v) const {
    check_owned(v, "grad");
    const Node& n = nodes_[v.id()];
    if (n.grad.empty() && !n.value.empty()) return Dense2D(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Gradients of every named parameter, keyed by name.
  std::map<std::string, Dense2D> parameter_grads() const {
    std::map<std::string, Dense2D> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (n.is_parameter && !n.name.empty()) out[n.name] = grad(Var(const_cast<Tape*>(this), i));
    }
    return out;
  }

  void backward(Var loss) {
    check_owned(loss, "backward");
    const Dense2D& lv = nodes_[loss.id()].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw UsageError(detail::concat("backward: loss must be 1x1, got ", lv.shape()));
    }
    for (Node& n : nodes_) n.grad = Dense2D();
    nodes_[loss.id()].grad = Dense2D(1, 1, 1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      BackwardContext ctx(*this, i);
      n.backward(ctx);
    }
  }

  /// Recomputes every recorded node from its inputs and reports whether all
  /// values match the recorded ones exactly.
  bool replay() const {
    std::vector<Dense2D> values;
    values.reserve(nodes_.size());
    for (const Node& n : nodes_) {
      if (!n.forward) {
        values.push_back(n.value);
        continue;
      }
      std::vector<const Dense2D*> in;
      for (std::size_t p : n.parents) in.push_back(&values[p]);
      values.push_back(n.forward(in));
      if (!(values.back() == n.value)) return false;
    }
    return true;
  }

 private:
  friend class BackwardContext;

  struct Node {
    std::string op;
    std::string name;
    std::vector<std::size_t> parents;
    Dense2D value;
    Dense2D grad;
    bool requires_grad = false;
    bool is_parameter = false;
    ForwardFn forward;
    BackwardFn backward;
  };

  Var leaf(Dense2D value, bool param, std::string name) {
    if (!value.all_finite()) {
      throw NumericalError(detail::concat("non-finite leaf '", name, "' ", value.shape()));
    }
    Node n;
    n.op = param ? "parameter" : "constant";
    n.name = std::move(name);
    n.value = std::move(value);
    n.requires_grad = param;
    n.is_parameter = param;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  void check_owned(Var v, const char* what) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
      throw UsageError(detail::concat(what, ": variable is not on this tape"));
    }
  }

  void add_grad(std::size_t id, const Dense2D& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!g.same_shape(n.value)) {
      throw DimensionError(detail::concat("gradient ", g.shape(), " for node '", n.op, "' ",
                                          n.value.shape()));
    }
    if (n.grad.empty()) {
      n.grad = g;
    } else {
      for (std::size_t k = 0; k < g.size(); ++k) n.grad[k] += g[k];
    }
  }

  std::vector<Node> nodes_;
};

inline const Dense2D& Var::value() const {
  if (!tape_) throw UsageError("Var: unbound variable");
  return tape_->value(id_);
}

inline const Dense2D& BackwardContext::grad_out() const { return tape_.nodes_[node_].grad; }
inline const Dense2D& BackwardContext::out() const { return tape_.nodes_[node_].value; }
inline const Dense2D& BackwardContext::in(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[node_].parents[k]].value;
}
inline bool BackwardContext::needs(std::size_t k) const {
  return tape_.nodes_[tape_.nodes_[node_].parents[k]].requires_grad;
}
inline void BackwardContext::accumulate(std::size_t k, const Dense2D& g) {
  tape_.add_grad(tape_.nodes_[node_].parents[k], g);
}

/// Differentiable primitives. Every op requires its operands on one tape.
namespace ad {

namespace detail {
inline Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw UsageError(strgg::detail::concat(op, ": operands on different tapes"));
  }
  return *a.tape();
}
inline Tape& tape_of(Var a, const char* op) {
  if (!a.valid()) throw UsageError(strgg::detail::concat(op, ": unbound operand"));
  return *a.tape();
}
}  // namespace detail

inline Var matmul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b, "matmul");
  return t.record(
      "matmul", {a.id(), b.id()},
      [](const auto& in) { return strgg::matmul(*in[0], *in[1]); },
      [](BackwardContext& c) {
        if (c.needs(0)) c.accumulate(0, matmul_nt(c.grad_out(), c.in(1)));
        if (c.needs(1)) c.accumulate(1, matmul_tn(c.in(0), c.grad_out()));
      });
}

inline Var add(Var a, Var b) {
  Tape& t = detail::same_tape(a, b, "add");
  return t.record(
      "add", {a.id(), b.id()}, [](const auto& in) { return *in[0] + *in[1]; },
      [](BackwardContext& c) {
        c.accumulate(0, c.grad_out());
        c.accumulate(1, c.grad_out());
      });
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::same_tape(a, b, "subtract");
  return t.record(
      "subtract", {a.id(), b.id()}, [](const auto& in) { return *in[0] - *in[1]; },
      [](BackwardContext& c) {
        c.accumulate(0, c.grad_out());
        if (c.needs(1)) c.accumulate(1, -1.0 * c.grad_out());
      });
}

inline Var mul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b, "multiply");
  return t.record(
      "multiply", {a.id(), b.id()}, [](const auto& in) { return hadamard(*in[0], *in[1]); },
      [](BackwardContext& c) {
        if (c.needs(0)) c.accumulate(0, hadamard(c.grad_out(), c.in(1)));
        if (c.needs(1)) c.accumulate(1, hadamard(c.grad_out(), c.in(0)));
      });
}

inline Var scale(Var a, double s) {
  return detail::tape_of(a, "scale")
      .record(
          "scale", {a.id()}, [s](const auto& in) { return s * *in[0]; },
          [s](BackwardContext& c) { c.accumulate(0, s * c.grad_out()); });
}

/// m + row, where `row` is [1 x cols] broadcast over every row of m.
inline Var add_row(Var m, Var row) {
  Tape& t = detail::same_tape(m, row, "add_row");
  return t.record(
      "add_row", {m.id(), row.id()},
      [](const auto& in) {
        const Dense2D& a = *in[0];
        const Dense2D& r = *in[1];
        if (r.rows() != 1 || r.cols() != a.cols()) {
          throw DimensionError(strgg::detail::concat("add_row: ", a.shape(), " + ", r.shape()));
        }
        Dense2D out = a;
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += r(0, j);
        return out;
      },
      [](BackwardContext& c) {
        c.accumulate(0, c.grad_out());
        if (c.needs(1)) {
          const Dense2D& g = c.grad_out();
          Dense2D gr(1, g.cols());
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
          c.accumulate(1, gr);
        }
      });
}

/// m + col, where `col` is [rows x 1] broadcast over every column of m.
inline Var add_col(Var m, Var col) {
  Tape& t = detail::same_tape(m, col, "add_col");
  return t.record(
      "add_col", {m.id(), col.id()},
      [](const auto& in) {
        const Dense2D& a = *in[0];
        const Dense2D& k = *in[1];
        if (k.cols() != 1 || k.rows() != a.rows()) {
          throw DimensionError(strgg::detail::concat("add_col: ", a.shape(), " + ", k.shape()));
        }
        Dense2D out = a;
        for (std::size_t i = 0; i < a.rows(); ++i)
          for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += k(i, 0);
        return out;
      },
      [](BackwardContext& c) {
        c.accumulate(0, c.grad_out());
        if (c.needs(1)) {
          const Dense2D& g = c.grad_out();
          Dense2D gc(g.rows(), 1);
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gc(i, 0) += g(i, j);
          c.accumulate(1, gc);
        }
      });
}

inline Var transpose(Var a) {
  return detail::tape_of(a, "transpose")
      .record(
          "transpose", {a.id()}, [](const auto& in) { return strgg::transpose(*in[0]); },
          [](BackwardContext& c) { c.accumulate(0, strgg::transpose(c.grad_out())); });
}

inline Var concat_rows(Var a, Var b) {
  Tape& t = detail::same_tape(a, b, "concat_rows");
  return t.record(
      "concat_rows", {a.id(), b.id()},
      [](const auto& in) { return strgg::concat_rows(*in[0], *in[1]); },
      [](BackwardContext& c) {
        const Dense2D& g = c.grad_out();
        const std::size_t ra = c.in(0).rows(), cols = g.cols();
        if (c.needs(0)) {
          c.accumulate(0, Dense2D(ra, cols,
                                  std::vector<double>(g.storage().begin(),
                                                      g.storage().begin() + ra * cols)));
        }
        if (c.needs(1)) {
          c.accumulate(1, Dense2D(g.rows() - ra, cols,
                                  std::vector<double>(g.storage().begin() + ra * cols,
                                                      g.storage().end())));
        }
      });
}

inline Var concat_cols(Var a, Var b) {
  Tape& t = detail::same_tape(a, b, "concat_cols");
  return t.record(
      "concat_cols", {a.id(), b.id()},
      [](const auto& in) { return strgg::concat_cols(*in[0], *in[1]); },
      [](BackwardContext& c) {
        const std::size_t ca = c.in(0).cols();
        if (c.needs(0)) c.accumulate(0, slice_cols(c.grad_out(), 0, ca));
        if (c.needs(1)) c.accumulate(1, slice_cols(c.grad_out(), ca, c.in(1).cols()));
      });
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  return detail::tape_of(a, "slice_cols")
      .record(
          "slice_cols", {a.id()},
          [begin, count](const auto& in) { return strgg::slice_cols(*in[0], begin, count); },
          [begin, count](BackwardContext& c) {
            const Dense2D& g = c.grad_out();
            Dense2D full(c.in(0).rows(), c.in(0).cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
              for (std::size_t j = 0; j < count; ++j) full(i, begin + j) = g(i, j);
            c.accumulate(0, full);
          });
}

inline Var reshape(Var a, std::size_t rows, std::size_t cols) {
  return detail::tape_of(a, "reshape")
      .record(
          "reshape", {a.id()},
          [rows, cols](const auto& in) { return in[0]->reshaped(rows, cols); },
          [](BackwardContext& c) {
            c.accumulate(0, c.grad_out().reshaped(c.in(0).rows(), c.in(0).cols()));
          });
}

inline Var relu(Var a) {
  return detail::tape_of(a, "relu")
      .record(
          "relu", {a.id()},
          [](const auto& in) { return map(*in[0], [](double x) { return x > 0.0 ? x : 0.0; }); },
          [](BackwardContext& c) {
            c.accumulate(0, zip(c.grad_out(), c.in(0), "relu'",
                                [](double g, double x) { return x > 0.0 ? g : 0.0; }));
          });
}

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  return detail::tape_of(a, "sigmoid")
      .record(
          "sigmoid", {a.id()}, [](const auto& in) { return map(*in[0], sigmoid_value); },
          [](BackwardContext& c) {
            c.accumulate(0, zip(c.grad_out(), c.out(), "sigmoid'",
                                [](double g, double y) { return g * y * (1.0 - y); }));
          });
}

inline Var tanh(Var a) {
  return detail::tape_of(a, "tanh")
      .record(
          "tanh", {a.id()},
          [](const auto& in) { return map(*in[0], [](double x) { return std::tanh(x); }); },
          [](BackwardContext& c) {
            c.accumulate(0, zip(c.grad_out(), c.out(), "tanh'",
                                [](double g, double y) { return g * (1.0 - y * y); }));
          });
}

inline Var exp(Var a) {
  return detail::tape_of(a, "exp")
      .record(
          "exp", {a.id()},
          [](const auto& in) { return map(*in[0], [](double x) { return std::exp(x); }); },
          [](BackwardContext& c) { c.accumulate(0, hadamard(c.grad_out(), c.out())); });
}

inline Dense2D softmax_rows_value(const Dense2D& x) {
  Dense2D y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols(); ++j) m = std::max(m, x(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += (y(i, j) = std::exp(x(i, j) - m));
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) /= s;
  }
  return y;
}

inline Var softmax_rows(Var a) {
  return detail::tape_of(a, "softmax_rows")
      .record(
          "softmax_rows", {a.id()}, [](const auto& in) { return softmax_rows_value(*in[0]); },
          [](BackwardContext& c) {
            const Dense2D& y = c.out();
            const Dense2D& g = c.grad_out();
            Dense2D dx(y.rows(), y.cols());
            for (std::size_t i = 0; i < y.rows(); ++i) {
              double dot = 0.0;
              for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
              for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (g(i, j) - dot);
            }
            c.accumulate(0, dx);
          });
}

inline Var sum(Var a) {
  return detail::tape_of(a, "sum")
      .record(
          "sum", {a.id()}, [](const auto& in) { return Dense2D(1, 1, strgg::sum(*in[0])); },
          [](BackwardContext& c) {
            c.accumulate(0, Dense2D(c.in(0).rows(), c.in(0).cols(), c.grad_out()(0, 0)));
          });
}

/// Euclidean norm of every row, as a [rows x 1] column. The gradient at a
/// zero row is taken as zero.
inline Var row_norms(Var a) {
  return detail::tape_of(a, "row_norms")
      .record(
          "row_norms", {a.id()},
          [](const auto& in) {
            const Dense2D& x = *in[0];
            Dense2D n(x.rows(), 1);
            for (std::size_t i = 0; i < x.rows(); ++i) {
              double s = 0.0;
              for (double v : x.row(i)) s += v * v;
              n(i, 0) = std::sqrt(s);
            }
            return n;
          },
          [](BackwardContext& c) {
            const Dense2D& x = c.in(0);
            Dense2D dx(x.rows(), x.cols());
            for (std::size_t i = 0; i < x.rows(); ++i) {
              const double nrm = c.out()(i, 0);
              if (nrm == 0.0) continue;
              const double k = c.grad_out()(i, 0) / nrm;
              for (std::size_t j = 0; j < x.cols(); ++j) dx(i, j) = k * x(i, j);
            }
            c.accumulate(0, dx);
          });
}

inline Var kron(Var a, Var b) {
  Tape& t = detail::same_tape(a, b, "kron");
  return t.record(
      "kron", {a.id(), b.id()}, [](const auto& in) { return strgg::kron(*in[0], *in[1]); },
      [](BackwardContext& c) {
        const Dense2D& A = c.in(0);
        const Dense2D& B = c.in(1);
        const Dense2D& g = c.grad_out();
        Dense2D da(A.rows(), A.cols()), db(B.rows(), B.cols());
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t j = 0; j < A.cols(); ++j)
            for (std::size_t r = 0; r < B.rows(); ++r)
              for (std::size_t s = 0; s < B.cols(); ++s) {
                const double gv = g(i * B.rows() + r, j * B.cols() + s);
                da(i, j) += gv * B(r, s);
                db(r, s) += gv * A(i, j);
              }
        if (c.needs(0)) c.accumulate(0, da);
        if (c.needs(1)) c.accumulate(1, db);
      });
}

/// Stride-1 zero-padded 2-D cross-correlation; differentiable in both input
/// and kernel.
inline Var conv2d_same(Var input, Var kernel) {
  Tape& t = detail::same_tape(input, kernel, "conv2d");
  return t.record(
      "conv2d", {input.id(), kernel.id()},
      [](const auto& in) { return strgg::conv2d_same(*in[0], *in[1]); },
      [](BackwardContext& c) {
        const Dense2D& x = c.in(0);
        const Dense2D& k = c.in(1);
        const Dense2D& g = c.grad_out();
        const auto half = static_cast<std::ptrdiff_t>(k.rows() / 2);
        const auto h = static_cast<std::ptrdiff_t>(x.rows());
        const auto w = static_cast<std::ptrdiff_t>(x.cols());
        Dense2D dx(x.rows(), x.cols()), dk(k.rows(), k.cols());
        for (std::ptrdiff_t i = 0; i < h; ++i)
          for (std::ptrdiff_t j = 0; j < w; ++j) {
            const double gv = g(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (gv == 0.0) continue;
            for (std::ptrdiff_t u = -half; u <= half; ++u)
              for (std::ptrdiff_t v = -half; v <= half; ++v) {
                const std::ptrdiff_t y = i + u, z = j + v;
                if (y < 0 || y >= h || z < 0 || z >= w) continue;
                const auto ys = static_cast<std::size_t>(y), zs = static_cast<std::size_t>(z);
                const auto us = static_cast<std::size_t>(u + half),
                           vs = static_cast<std::size_t>(v + half);
                dx(ys, zs) += gv * k(us, vs);
                dk(us, vs) += gv * x(ys, zs);
              }
          }
        if (c.needs(0)) c.accumulate(0, dx);
        if (c.needs(1)) c.accumulate(1, dk);
      });
}

// Convenience: ops against constants live on the operand's tape.
inline Var constant_like(Var anchor, Dense2D value) {
  return detail::tape_of(anchor, "constant").constant(std::move(value));
}
inline Var mul(Var a, const Dense2D& b) { return mul(a, constant_like(a, b)); }
inline Var add(Var a, const Dense2D& b) { return add(a, constant_like(a, b)); }
inline Var sub(Var a, const Dense2D& b) { return sub(a, constant_like(a, b)); }
inline Var matmul(const Dense2D& a, Var b) { return matmul(constant_like(b, a), b); }
inline Var matmul(Var a, const Dense2D& b) { return matmul(a, constant_like(a, b)); }

/// Bilinear resize as a pair of constant interpolation matrices.
inline Var resize_bilinear(Var a, std::size_t rows, std::size_t cols) {
  Var r = matmul(linear_resize_matrix(rows, a.rows()), a);
  return matmul(r, strgg::transpose(linear_resize_matrix(cols, a.cols())));
}

/// Adaptive average pooling to rows x cols.
inline Var average_pool(Var a, std::size_t rows, std::size_t cols) {
  Var r = matmul(average_pool_matrix(rows, a.rows()), a);
  return matmul(r, strgg::transpose(average_pool_matrix(cols, a.cols())));
}

}  // namespace ad
}  // namespace strgg
