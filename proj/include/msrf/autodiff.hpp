// Copyright 2026 msrf authors
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
//
// Reverse-mode differentiation over matrix-valued nodes. Parameters live in
// one flat vector partitioned into named segments; gradients come back as a
// flat vector of the same shape.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "msrf/types.hpp"

namespace msrf {

// Tape nodes are large short-lived buffers; with default glibc settings they
// come straight from mmap and every training step pays page-zeroing cost in
// the kernel. Raising the thresholds keeps them on the reusable heap
// (~10x faster iterations). No-op on non-glibc platforms.
inline void reserve_tape_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

// Flat parameter storage with named matrix segments. Segment offsets are
// assigned in registration order and never move, so appending segments
// (network growth) leaves existing parameters bit-identical.
template <class Scalar>
class ParamVector {
 public:
  struct Segment {
    std::string name;
    Eigen::Index offset;
    Eigen::Index rows, cols;
  };

  int add_matrix(std::string name, Eigen::Index rows, Eigen::Index cols) {
    Segment s{std::move(name), values_.size(), rows, cols};
    values_.conservativeResize(values_.size() + rows * cols);
    values_.tail(rows * cols).setZero();
    segments_.push_back(std::move(s));
    return static_cast<int>(segments_.size()) - 1;
  }

  Eigen::Map<MatX<Scalar>> matrix(int seg) {
    const Segment& s = segments_[seg];
    return {values_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const MatX<Scalar>> matrix(int seg) const {
    const Segment& s = segments_[seg];
    return {values_.data() + s.offset, s.rows, s.cols};
  }

  VecX<Scalar>& values() { return values_; }
  const VecX<Scalar>& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  const std::vector<Segment>& segments() const { return segments_; }

  template <class Other>
  ParamVector<Other> cast() const {
    ParamVector<Other> out;
    out.values_ = values_.template cast<Other>();
    out.segments_.reserve(segments_.size());
    for (const Segment& s : segments_)
      out.segments_.push_back({s.name, s.offset, s.rows, s.cols});
    return out;
  }

  template <class Other>
  friend class ParamVector;

 private:
  VecX<Scalar> values_;
  std::vector<Segment> segments_;
};

// Records the forward pass; backward() replays adjoints in reverse
// creation order (creation order is topological by construction).
template <class Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(const ParamVector<Scalar>& params)
      : params_(&params), grads_(VecX<Scalar>::Zero(params.size())) {
    reserve_tape_heap();
  }

  int constant(MatX<Scalar> v) { return push(std::move(v), {}); }

  // y = W*x + b (b broadcast over columns).
  int affine(int x, int w_seg, int b_seg) {
    auto w = params_->matrix(w_seg);
    auto b = params_->matrix(b_seg);
    MatX<Scalar> y = (w * value(x)).colwise() + b.col(0);
    return push(std::move(y), [x, w_seg, b_seg](Tape& t, int self) {
      const MatX<Scalar>& adj = t.nodes_[self].adjoint;
      const auto& sw = t.params_->segments()[w_seg];
      const auto& sb = t.params_->segments()[b_seg];
      Eigen::Map<MatX<Scalar>> gw(t.grads_.data() + sw.offset, sw.rows, sw.cols);
      Eigen::Map<MatX<Scalar>> gb(t.grads_.data() + sb.offset, sb.rows, sb.cols);
      gw.noalias() += adj * t.value(x).transpose();
      gb.col(0) += adj.rowwise().sum();
      t.adjoint(x).noalias() += t.params_->matrix(w_seg).transpose() * adj;
    });
  }

  // y = max(W*x + b, 0), fused so the pre-activation is never materialized.
  // Gradient convention matches relu(): zero at exactly zero.
  int affine_relu(int x, int w_seg, int b_seg) {
    auto w = params_->matrix(w_seg);
    auto b = params_->matrix(b_seg);
    MatX<Scalar> y =
        ((w * value(x)).colwise() + b.col(0)).cwiseMax(Scalar(0));
    return push(std::move(y), [x, w_seg, b_seg](Tape& t, int self) {
      MatX<Scalar> adj =
          (t.nodes_[self].adjoint.array() *
           (t.nodes_[self].value.array() > Scalar(0)).template cast<Scalar>())
              .matrix();
      const auto& sw = t.params_->segments()[w_seg];
      const auto& sb = t.params_->segments()[b_seg];
      Eigen::Map<MatX<Scalar>> gw(t.grads_.data() + sw.offset, sw.rows, sw.cols);
      Eigen::Map<MatX<Scalar>> gb(t.grads_.data() + sb.offset, sb.rows, sb.cols);
      gw.noalias() += adj * t.value(x).transpose();
      gb.col(0) += adj.rowwise().sum();
      t.adjoint(x).noalias() += t.params_->matrix(w_seg).transpose() * adj;
    });
  }

  int relu(int x) {
    MatX<Scalar> y = value(x).cwiseMax(Scalar(0));
    return push(std::move(y), [x](Tape& t, int self) {
      t.adjoint(x).array() +=
          t.nodes_[self].adjoint.array() *
          (t.value(x).array() > Scalar(0)).template cast<Scalar>();
    });
  }

  int sigmoid(int x) {
    MatX<Scalar> y =
        (Scalar(1) / (Scalar(1) + (-value(x).array()).exp())).matrix();
    return push(std::move(y), [x](Tape& t, int self) {
      const auto& s = t.nodes_[self].value.array();
      t.adjoint(x).array() += t.nodes_[self].adjoint.array() * s * (1 - s);
    });
  }

  // Vertical stack; all inputs must share the column count.
  int concat_rows(const std::vector<int>& xs) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = value(xs[0]).cols();
    for (int x : xs) rows += value(x).rows();
    MatX<Scalar> y(rows, cols);
    Eigen::Index at = 0;
    for (int x : xs) {
      y.middleRows(at, value(x).rows()) = value(x);
      at += value(x).rows();
    }
    return push(std::move(y), [xs](Tape& t, int self) {
      Eigen::Index at = 0;
      for (int x : xs) {
        const Eigen::Index r = t.value(x).rows();
        t.adjoint(x) += t.nodes_[self].adjoint.middleRows(at, r);
        at += r;
      }
    });
  }

  // Elementwise sum of same-shaped nodes.
  int sum(const std::vector<int>& xs) {
    MatX<Scalar> y = value(xs[0]);
    for (size_t i = 1; i < xs.size(); ++i) y += value(xs[i]);
    return push(std::move(y), [xs](Tape& t, int self) {
      for (int x : xs) t.adjoint(x) += t.nodes_[self].adjoint;
    });
  }

  // Scalar node: sum_c w_c * ||pred.col(c) - target.col(c)||^2.
  int weighted_squared_error(int pred, MatX<Scalar> target, VecX<Scalar> w) {
    if (target.rows() != value(pred).rows() ||
        target.cols() != value(pred).cols())
      throw InputError("squared_error: shape mismatch");
    MatX<Scalar> diff = value(pred) - target;
    MatX<Scalar> y(1, 1);
    y(0, 0) = (diff.colwise().squaredNorm() * w.asDiagonal()).sum();
    return push(std::move(y),
                [pred, target = std::move(target), w = std::move(w)](
                    Tape& t, int self) {
                  const Scalar up = t.nodes_[self].adjoint(0, 0);
                  t.adjoint(pred) +=
                      (Scalar(2) * up) *
                      ((t.value(pred) - target) * w.asDiagonal());
                });
  }

  // Escape hatch for ops with hand-written adjoints (e.g. compositing).
  int custom(MatX<Scalar> v, BackwardFn bwd) {
    return push(std::move(v), std::move(bwd));
  }

  const MatX<Scalar>& value(int id) const { return nodes_[id].value; }

  MatX<Scalar>& adjoint(int id) {
    Node& n = nodes_[id];
    if (!n.touched) {
      n.adjoint.setZero(n.value.rows(), n.value.cols());
      n.touched = true;
    }
    return n.adjoint;
  }

  // Seeds the scalar loss node and propagates; returns parameter gradients.
  // Parameters not on any path to the loss keep exact zeros.
  const VecX<Scalar>& backward(int loss_node) {
    if (value(loss_node).size() != 1)
      throw InputError("backward: loss node must be scalar");
    adjoint(loss_node)(0, 0) = Scalar(1);
    for (int i = loss_node; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.touched && n.bwd) n.bwd(*this, i);
    }
    return grads_;
  }

  const VecX<Scalar>& grads() const { return grads_; }
  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    MatX<Scalar> value;
    MatX<Scalar> adjoint;
    BackwardFn bwd;
    bool touched = false;
  };

  int push(MatX<Scalar> v, BackwardFn bwd) {
    nodes_.push_back(Node{std::move(v), {}, std::move(bwd), false});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const ParamVector<Scalar>* params_;
  std::vector<Node> nodes_;
  VecX<Scalar> grads_;
};

// Adam with exponential decay lr(t) = base_lr * (lr_final/base_lr)^(t/T),
// t clamped to T. reset_optimizer() restarts both moments and the schedule.
template <class Scalar>
struct AdamState {
  VecX<Scalar> m, v;
  long long step_count = 0;
  Scalar base_lr = Scalar(5e-4);
  Scalar lr_final = Scalar(5e-6);
  long long t_stage = 100000;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

template <class Scalar>
AdamState<Scalar> make_adam(Eigen::Index n, Scalar base_lr, Scalar lr_final,
                            long long t_stage) {
  AdamState<Scalar> s;
  s.m = VecX<Scalar>::Zero(n);
  s.v = VecX<Scalar>::Zero(n);
  s.base_lr = base_lr;
  s.lr_final = lr_final;
  s.t_stage = t_stage;
  return s;
}

template <class Scalar>
Scalar current_lr(const AdamState<Scalar>& s) {
  const double t = static_cast<double>(std::min(s.step_count, s.t_stage));
  return s.base_lr *
         static_cast<Scalar>(std::pow(double(s.lr_final) / double(s.base_lr),
                                      t / double(s.t_stage)));
}

template <class Scalar>
void adam_step(ParamVector<Scalar>& params, const VecX<Scalar>& grads,
               AdamState<Scalar>& state) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw InputError("adam_step: shape mismatch");
  const Scalar lr = current_lr(state);
  state.step_count += 1;
  const auto t = static_cast<Scalar>(state.step_count);
  state.m = state.beta1 * state.m + (1 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1 - state.beta2) * grads.cwiseProduct(grads);
  const Scalar c1 = 1 - std::pow(state.beta1, t);
  const Scalar c2 = 1 - std::pow(state.beta2, t);
  params.values().array() -=
      lr * (state.m.array() / c1) /
      ((state.v.array() / c2).sqrt() + state.epsilon);
}

template <class Scalar>
void reset_optimizer(AdamState<Scalar>& state) {
  state.m.setZero();
  state.v.setZero();
  state.step_count = 0;
}

// Central-difference check of an analytic gradient. Relative error uses
// denominator max(|fd|, |grad|, floor) so near-zero entries compare in
// absolute terms instead of amplifying FD noise.
struct GradCheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  double fd_at_worst = 0.0;
  double analytic_at_worst = 0.0;
};

template <class LossFn>
GradCheckReport grad_check(LossFn&& loss, ParamVector<double>& params,
                           const VecXd& analytic, double h = 1e-4,
                           double denom_floor = 1e-6) {
  GradCheckReport rep;
  VecXd& p = params.values();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double fp = loss(params);
    p[i] = saved - h;
    const double fm = loss(params);
    p[i] = saved;
    const double fd = (fp - fm) / (2 * h);
    const double denom =
        std::max({std::abs(fd), std::abs(analytic[i]), denom_floor});
    const double rel = std::abs(fd - analytic[i]) / denom;
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = i;
      rep.fd_at_worst = fd;
      rep.analytic_at_worst = analytic[i];
    }
  }
  return rep;
}

}  // namespace msrf
