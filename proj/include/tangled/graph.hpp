#pragma once

#include "tangled/types.hpp"

#include <deque>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

namespace tangled {

struct Parameter;
class Tape;

namespace detail {

struct Node {
  Mat value;                   // owned storage for computed results
  const Mat* external = nullptr;  // parameter leaves alias the live value
  Mat grad;
  std::function<void(const Node&)> pull;  // scatter this node's grad to parents
  Mat* sink = nullptr;         // gradient accumulator of a bound Parameter
  bool needs_grad = false;

  const Mat& val() const { return external ? *external : value; }
};

}  // namespace detail

// Handle to a node on a Tape. Cheap to copy; valid for the tape's lifetime.
class Var {
 public:
  Var() = default;

  bool valid() const { return node_ != nullptr; }
  const Mat& value() const { return node_->val(); }
  double scalar() const {
    const Mat& v = node_->val();
    if (v.rows() != 1 || v.cols() != 1)
      throw DimensionError("scalar: value is " + shape_str(v) + ", expected 1x1");
    return v(0, 0);
  }
  Eigen::Index rows() const { return node_->val().rows(); }
  Eigen::Index cols() const { return node_->val().cols(); }

  Tape* tape() const { return tape_; }
  detail::Node* raw() const { return node_; }

 private:
  friend class Tape;
  Var(Tape* tape, detail::Node* node) : tape_(tape), node_(node) {}

  Tape* tape_ = nullptr;
  detail::Node* node_ = nullptr;
};

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order, so walking the tape backwards is a valid topological order. A tape
// built with recording=false evaluates values only and never allocates
// gradient state.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  size_t size() const { return nodes_.size(); }

  Var constant(Mat value) {
    nodes_.emplace_back();
    nodes_.back().value = std::move(value);
    return Var(this, &nodes_.back());
  }

  Var scalar_constant(double v) { return constant(Mat::Constant(1, 1, v)); }

  // Leaf bound to a Parameter: gradients accumulate into p.grad. Repeated
  // calls with the same Parameter return the same node.
  Var leaf(Parameter& p);

  template <class F>
  Var make_with(Mat value, bool needs, F&& pull) {
    nodes_.emplace_back();
    detail::Node& n = nodes_.back();
    n.value = std::move(value);
    if (recording_ && needs) {
      n.needs_grad = true;
      n.pull = std::forward<F>(pull);
    }
    return Var(this, &n);
  }

  template <class F>
  Var make(Mat value, std::initializer_list<Var> parents, F&& pull) {
    bool needs = false;
    for (const Var& p : parents) needs = needs || p.raw()->needs_grad;
    return make_with(std::move(value), needs, std::forward<F>(pull));
  }

  // Accumulates d(loss)/d(param) into the grad of every Parameter leaf
  // reachable from `loss`. Gradients of unreached leaves are untouched.
  void backward(Var loss);

 private:
  std::deque<detail::Node> nodes_;  // deque: stable addresses for closures
  std::unordered_map<const Parameter*, Var> leaf_cache_;
  bool recording_;
};

// ---- differentiable ops ----------------------------------------------------

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var add_rowvec(Var a, Var row);  // broadcast a 1xC row over all rows of a
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index n);
Var gather_rows(Var a, std::vector<int> idx);
Var scatter_rows(Var a, std::vector<int> idx, Eigen::Index total_rows);
Var softmax_rows(Var a);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var gelu(Var x);
Var tanh_op(Var x);
Var sigmoid_clamped(Var logit, double clamp = 30.0);
Var sum(Var a);  // 1x1 sum of all entries

// mean over rows of -log softmax(logits)[target]; targets.size() == rows
Var cross_entropy(Var logits, const std::vector<int>& targets);
// mean over rows of KL(p_row || softmax(q_row)); p is a fixed target
Var kl_divergence(const Mat& p, Var q_logits);
// -y*log(s) - (1-y)*log(1-s) for a 1x1 score s in (0,1), label y in {0,1}
Var binary_cross_entropy(Var score, int label);

inline Var operator+(Var a, Var b) { return add(a, b); }

// ---- plain (non-recorded) numerics ------------------------------------------

// numerically stable softmax; axis = 1 normalizes each row, 0 each column
Mat softmax(const Mat& x, int axis = 1);

}  // namespace tangled
