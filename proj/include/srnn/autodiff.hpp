// Copyright 2026 The srnn-traffic Authors.
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

#pragma once

// Define-by-run reverse-mode differentiation over dense matrices.
//
// A Tape records every operation in insertion order; since inputs must already
// exist when an op is recorded, insertion order is a topological order and
// backward() simply walks the tape in reverse. Only the operations needed by
// the recurrent graph model are provided.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "srnn/errors.hpp"
#include "srnn/matrix.hpp"

namespace srnn::ad {

enum class OpKind {
  kConstant,
  kParameter,
  kMatMul,
  kAdd,
  kAddRowBroadcast,
  kSub,
  kMul,
  kScale,
  kRelu,
  kSigmoid,
  kTanh,
  kConcatCols,
  kConcatRows,
  kSliceCols,
  kRowSelect,
  kRowSum,
  kSumAll,
  kDropout,
};

enum class Mode { kTrain, kEval };

struct Node {
  OpKind op = OpKind::kConstant;
  std::vector<std::size_t> inputs;
  Matrix value;
  Matrix adjoint;
  // Op-specific payload.
  Matrix mask;                       // dropout keep-mask, already scaled
  std::vector<std::size_t> indices;  // row_select
  Index offset = 0;                  // slice_cols
  double factor = 1.0;               // scale

  bool is_leaf() const { return op == OpKind::kConstant || op == OpKind::kParameter; }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return record(OpKind::kConstant, {}, std::move(value)); }

  Var parameter(Matrix value) {
    Var v = record(OpKind::kParameter, {}, std::move(value));
    parameter_ids_.push_back(v.id());
    return v;
  }

  Var record(OpKind op, std::vector<std::size_t> inputs, Matrix value) {
    for (std::size_t in : inputs) {
      if (in >= nodes_.size()) {
        throw ContractError("tape input " + std::to_string(in) + " does not precede node " +
                            std::to_string(nodes_.size()));
      }
    }
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.adjoint = Matrix::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  Node& node(std::size_t id) { return nodes_.at(id); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  Node& node(Var v) { return node(v.id()); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& parameter_ids() const { return parameter_ids_; }

  /// Zero every adjoint on the tape.
  void reset() {
    for (Node& n : nodes_) {
      n.adjoint.setZero();
    }
  }

  /// Accumulate d(loss)/d(leaf) into every leaf adjoint. Intermediate adjoints
  /// are recomputed from scratch on each call, so calling backward twice
  /// without reset() doubles the leaf gradients exactly.
  void backward(Var loss) {
    if (loss.tape_ != this) {
      throw ContractError("backward: loss belongs to a different tape");
    }
    const Node& l = nodes_[loss.id()];
    if (l.value.rows() != 1 || l.value.cols() != 1) {
      throw ContractError("backward: loss must be 1x1, got " + shape_str(l.value));
    }
    for (Node& n : nodes_) {
      if (!n.is_leaf()) {
        n.adjoint.setZero();
      }
    }
    nodes_[loss.id()].adjoint(0, 0) += 1.0;
    for (std::size_t k = loss.id() + 1; k-- > 0;) {
      propagate(nodes_[k]);
    }
  }

 private:
  void propagate(Node& n);

  std::vector<Node> nodes_;
  std::vector<std::size_t> parameter_ids_;
};

inline const Matrix& Var::value() const { return tape_->node(id_).value; }
inline const Matrix& Var::grad() const { return tape_->node(id_).adjoint; }

inline void Tape::propagate(Node& n) {
  const Matrix& g = n.adjoint;
  auto in = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };
  switch (n.op) {
    case OpKind::kConstant:
    case OpKind::kParameter:
      break;
    case OpKind::kMatMul:
      in(0).adjoint.noalias() += g * in(1).value.transpose();
      in(1).adjoint.noalias() += in(0).value.transpose() * g;
      break;
    case OpKind::kAdd:
      in(0).adjoint += g;
      in(1).adjoint += g;
      break;
    case OpKind::kAddRowBroadcast:
      in(0).adjoint += g;
      for (Index r = 0; r < g.rows(); ++r) {
        in(1).adjoint += g.row(r);
      }
      break;
    case OpKind::kSub:
      in(0).adjoint += g;
      in(1).adjoint -= g;
      break;
    case OpKind::kMul: {
      // Read both values before writing: inputs may alias (x * x).
      Matrix ga = g.cwiseProduct(in(1).value);
      Matrix gb = g.cwiseProduct(in(0).value);
      in(0).adjoint += ga;
      in(1).adjoint += gb;
      break;
    }
    case OpKind::kScale:
      in(0).adjoint += n.factor * g;
      break;
    case OpKind::kRelu:
      in(0).adjoint += (in(0).value.array() > 0.0).select(g.array(), 0.0).matrix();
      break;
    case OpKind::kSigmoid:
      in(0).adjoint += (g.array() * n.value.array() * (1.0 - n.value.array())).matrix();
      break;
    case OpKind::kTanh:
      in(0).adjoint += (g.array() * (1.0 - n.value.array().square())).matrix();
      break;
    case OpKind::kConcatCols: {
      Index col = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        Node& src = in(k);
        src.adjoint += g.middleCols(col, src.value.cols());
        col += src.value.cols();
      }
      break;
    }
    case OpKind::kConcatRows: {
      Index row = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        Node& src = in(k);
        src.adjoint += g.middleRows(row, src.value.rows());
        row += src.value.rows();
      }
      break;
    }
    case OpKind::kSliceCols:
      in(0).adjoint.middleCols(n.offset, g.cols()) += g;
      break;
    case OpKind::kRowSelect:
      for (std::size_t r = 0; r < n.indices.size(); ++r) {
        in(0).adjoint.row(static_cast<Index>(n.indices[r])) += g.row(static_cast<Index>(r));
      }
      break;
    case OpKind::kRowSum:
      for (Index r = 0; r < in(0).adjoint.rows(); ++r) {
        in(0).adjoint.row(r) += g;
      }
      break;
    case OpKind::kSumAll:
      in(0).adjoint.array() += g(0, 0);
      break;
    case OpKind::kDropout:
      in(0).adjoint += g.cwiseProduct(n.mask);
      break;
  }
}

namespace detail {

inline void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ContractError(std::string(op) + ": operands are not on the same tape");
  }
}

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  require_same_tape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                         shape_str(b.value()));
  }
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + shape_str(a.value()) + " * " +
                         shape_str(b.value()));
  }
  Matrix out = a.value() * b.value();
  return a.tape().record(OpKind::kMatMul, {a.id(), b.id()}, std::move(out));
}

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  return a.tape().record(OpKind::kAdd, {a.id(), b.id()}, a.value() + b.value());
}

/// a (r x c) plus a 1 x c row added to every row; used for biases.
inline Var add_row(const Var& a, const Var& row) {
  detail::require_same_tape(a, row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: cannot broadcast " + shape_str(row.value()) + " onto " +
                         shape_str(a.value()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(OpKind::kAddRowBroadcast, {a.id(), row.id()}, std::move(out));
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "sub");
  return a.tape().record(OpKind::kSub, {a.id(), b.id()}, a.value() - b.value());
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "mul");
  return a.tape().record(OpKind::kMul, {a.id(), b.id()}, a.value().cwiseProduct(b.value()));
}

inline Var scale(const Var& a, double factor) {
  Var out = a.tape().record(OpKind::kScale, {a.id()}, factor * a.value());
  out.tape().node(out).factor = factor;
  return out;
}

inline Var relu(const Var& a) {
  return a.tape().record(OpKind::kRelu, {a.id()}, a.value().cwiseMax(0.0));
}

inline Var sigmoid(const Var& a) {
  return a.tape().record(OpKind::kSigmoid, {a.id()},
                         a.value().unaryExpr([](double x) { return detail::sigmoid(x); }));
}

inline Var tanh(const Var& a) {
  return a.tape().record(OpKind::kTanh, {a.id()}, a.value().array().tanh().matrix());
}

enum class Elementwise { kRelu, kSigmoid, kTanh };

inline Var elementwise(const Var& a, Elementwise kind) {
  switch (kind) {
    case Elementwise::kRelu:
      return relu(a);
    case Elementwise::kSigmoid:
      return sigmoid(a);
    case Elementwise::kTanh:
      return tanh(a);
  }
  throw ContractError("elementwise: unknown kind");
}

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) {
    throw ContractError("concat_cols: no operands");
  }
  Index cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    detail::require_same_tape(parts[0], p, "concat_cols");
    if (p.rows() != parts[0].rows()) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0].value()) + " vs " +
                           shape_str(p.value()));
    }
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(parts[0].rows(), cols);
  Index col = 0;
  for (const Var& p : parts) {
    out.middleCols(col, p.cols()) = p.value();
    col += p.cols();
  }
  return parts[0].tape().record(OpKind::kConcatCols, std::move(ids), std::move(out));
}

inline Var concat_cols(const Var& a, const Var& b) {
  const Var parts[] = {a, b};
  return concat_cols(parts);
}

inline Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) {
    throw ContractError("concat_rows: no operands");
  }
  Index rows = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    detail::require_same_tape(parts[0], p, "concat_rows");
    if (p.cols() != parts[0].cols()) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts[0].value()) +
                           " vs " + shape_str(p.value()));
    }
    rows += p.rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, parts[0].cols());
  Index row = 0;
  for (const Var& p : parts) {
    out.middleRows(row, p.rows()) = p.value();
    row += p.rows();
  }
  return parts[0].tape().record(OpKind::kConcatRows, std::move(ids), std::move(out));
}

inline Var slice_cols(const Var& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw IndexError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + shape_str(a.value()));
  }
  Var out = a.tape().record(OpKind::kSliceCols, {a.id()}, a.value().middleCols(begin, count));
  out.tape().node(out).offset = begin;
  return out;
}

/// Gathers rows in the given order; an empty index list yields a 0 x cols matrix.
inline Var row_select(const Var& a, std::span<const std::size_t> indices) {
  Matrix out(static_cast<Index>(indices.size()), a.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= static_cast<std::size_t>(a.rows())) {
      throw IndexError("row_select: index " + std::to_string(indices[r]) + " out of range for " +
                       std::to_string(a.rows()) + " rows");
    }
    out.row(static_cast<Index>(r)) = a.value().row(static_cast<Index>(indices[r]));
  }
  Var v = a.tape().record(OpKind::kRowSelect, {a.id()}, std::move(out));
  v.tape().node(v).indices.assign(indices.begin(), indices.end());
  return v;
}

/// 1 x cols sum of all rows, accumulated top to bottom. Zero rows give zeros.
inline Var row_sum(const Var& a) {
  Matrix out = Matrix::Zero(1, a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    out += a.value().row(r);
  }
  return a.tape().record(OpKind::kRowSum, {a.id()}, std::move(out));
}

inline Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(OpKind::kSumAll, {a.id()}, std::move(out));
}

/// Inverted dropout. In eval mode, or with rate 0, the input is returned as is.
inline Var dropout(const Var& a, double rate, Mode mode, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
  }
  if (mode == Mode::kEval || rate == 0.0) {
    return a;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution drop(rate);
  Matrix mask(a.rows(), a.cols());
  for (Index k = 0; k < mask.size(); ++k) {
    mask.data()[k] = drop(rng) ? 0.0 : keep_scale;
  }
  Var out = a.tape().record(OpKind::kDropout, {a.id()}, a.value().cwiseProduct(mask));
  out.tape().node(out).mask = std::move(mask);
  return out;
}

/// Mean of squared differences over all entries.
inline Var mse(const Var& prediction, const Var& target) {
  detail::require_same_shape(prediction, target, "mse");
  if (prediction.value().size() == 0) {
    throw DimensionError("mse: empty operands");
  }
  Var diff = sub(prediction, target);
  return scale(sum_all(mul(diff, diff)), 1.0 / static_cast<double>(diff.value().size()));
}

}  // namespace srnn::ad
