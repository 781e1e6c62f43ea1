#include "tangled/graph.hpp"

#include "tangled/optim.hpp"

#include <cmath>

namespace tangled {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape())
    throw StateError(std::string(op) + ": operands belong to different tapes");
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Var Tape::leaf(Parameter& p) {
  auto it = leaf_cache_.find(&p);
  if (it != leaf_cache_.end()) return it->second;
  nodes_.emplace_back();
  detail::Node& n = nodes_.back();
  n.external = &p.value;
  if (recording_) {
    n.needs_grad = true;
    n.sink = &p.grad;
  }
  Var v(this, &n);
  leaf_cache_.emplace(&p, v);
  return v;
}

void Tape::backward(Var loss) {
  if (!recording_) throw StateError("backward: tape was created without gradient recording");
  if (!loss.valid() || loss.tape() != this)
    throw StateError("backward: loss does not belong to this tape");
  if (nodes_.empty()) throw StateError("backward: no forward pass recorded");
  const Mat& lv = loss.raw()->val();
  if (lv.rows() != 1 || lv.cols() != 1)
    throw DimensionError("backward: loss must be 1x1, got " + shape_str(lv));
  for (detail::Node& n : nodes_)
    if (n.needs_grad) n.grad.setZero(n.val().rows(), n.val().cols());
  if (loss.raw()->needs_grad) loss.raw()->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->needs_grad) continue;
    if (it->pull) it->pull(*it);
    if (it->sink) *it->sink += it->grad;
  }
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  detail::Node* na = a.raw();
  detail::Node* nb = b.raw();
  if (na->val().cols() != nb->val().rows())
    throw DimensionError("matmul: inner dimensions disagree (" + shape_str(na->val()) +
                         " vs " + shape_str(nb->val()) + ")");
  return a.tape()->make(na->val() * nb->val(), {a, b}, [na, nb](const detail::Node& self) {
    if (na->needs_grad) na->grad.noalias() += self.grad * nb->val().transpose();
    if (nb->needs_grad) nb->grad.noalias() += na->val().transpose() * self.grad;
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b, "matmul_nt");
  detail::Node* na = a.raw();
  detail::Node* nb = b.raw();
  if (na->val().cols() != nb->val().cols())
    throw DimensionError("matmul_nt: column counts disagree (" + shape_str(na->val()) +
                         " vs " + shape_str(nb->val()) + ")");
  return a.tape()->make(na->val() * nb->val().transpose(), {a, b},
                        [na, nb](const detail::Node& self) {
                          if (na->needs_grad) na->grad.noalias() += self.grad * nb->val();
                          if (nb->needs_grad)
                            nb->grad.noalias() += self.grad.transpose() * na->val();
                        });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  detail::Node* na = a.raw();
  detail::Node* nb = b.raw();
  if (na->val().rows() != nb->val().rows() || na->val().cols() != nb->val().cols())
    throw DimensionError("add: shapes disagree (" + shape_str(na->val()) + " vs " +
                         shape_str(nb->val()) + ")");
  return a.tape()->make(na->val() + nb->val(), {a, b}, [na, nb](const detail::Node& self) {
    if (na->needs_grad) na->grad += self.grad;
    if (nb->needs_grad) nb->grad += self.grad;
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  detail::Node* na = a.raw();
  detail::Node* nb = b.raw();
  if (na->val().rows() != nb->val().rows() || na->val().cols() != nb->val().cols())
    throw DimensionError("sub: shapes disagree (" + shape_str(na->val()) + " vs " +
                         shape_str(nb->val()) + ")");
  return a.tape()->make(na->val() - nb->val(), {a, b}, [na, nb](const detail::Node& self) {
    if (na->needs_grad) na->grad += self.grad;
    if (nb->needs_grad) nb->grad -= self.grad;
  });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b, "hadamard");
  detail::Node* na = a.raw();
  detail::Node* nb = b.raw();
  if (na->val().rows() != nb->val().rows() || na->val().cols() != nb->val().cols())
    throw DimensionError("hadamard: shapes disagree (" + shape_str(na->val()) + " vs " +
                         shape_str(nb->val()) + ")");
  return a.tape()->make(na->val().cwiseProduct(nb->val()), {a, b},
                        [na, nb](const detail::Node& self) {
                          if (na->needs_grad) na->grad += self.grad.cwiseProduct(nb->val());
                          if (nb->needs_grad) nb->grad += self.grad.cwiseProduct(na->val());
                        });
}

Var scale(Var a, double s) {
  detail::Node* na = a.raw();
  return a.tape()->make(na->val() * s, {a}, [na, s](const detail::Node& self) {
    if (na->needs_grad) na->grad += self.grad * s;
  });
}

Var add_rowvec(Var a, Var row) {
  require_same_tape(a, row, "add_rowvec");
  detail::Node* na = a.raw();
  detail::Node* nr = row.raw();
  if (nr->val().rows() != 1 || nr->val().cols() != na->val().cols())
    throw DimensionError("add_rowvec: row is " + shape_str(nr->val()) + ", expected 1x" +
                         std::to_string(na->val().cols()));
  Mat v = na->val();
  v.rowwise() += nr->val().row(0);
  return a.tape()->make(std::move(v), {a, row}, [na, nr](const detail::Node& self) {
    if (na->needs_grad) na->grad += self.grad;
    if (nr->needs_grad) nr->grad += self.grad.colwise().sum();
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no parts");
  Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_rows");
    if (p.cols() != cols)
      throw DimensionError("concat_rows: column counts disagree (" +
                           shape_str(parts[0].value()) + " vs " + shape_str(p.value()) + ")");
    rows += p.rows();
  }
  Mat v(rows, cols);
  Eigen::Index off = 0;
  std::vector<detail::Node*> srcs;
  for (const Var& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    off += p.rows();
    srcs.push_back(p.raw());
  }
  Tape* t = parts[0].tape();
  bool needs = false;
  for (detail::Node* s : srcs) needs = needs || s->needs_grad;
  return t->make_with(std::move(v), needs, [srcs](const detail::Node& self) {
    Eigen::Index off = 0;
    for (detail::Node* s : srcs) {
      if (s->needs_grad) s->grad += self.grad.middleRows(off, s->val().rows());
      off += s->val().rows();
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no parts");
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_cols");
    if (p.rows() != rows)
      throw DimensionError("concat_cols: row counts disagree (" + shape_str(parts[0].value()) +
                           " vs " + shape_str(p.value()) + ")");
    cols += p.cols();
  }
  Mat v(rows, cols);
  Eigen::Index off = 0;
  std::vector<detail::Node*> srcs;
  for (const Var& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    srcs.push_back(p.raw());
  }
  Tape* t = parts[0].tape();
  bool needs = false;
  for (detail::Node* s : srcs) needs = needs || s->needs_grad;
  return t->make_with(std::move(v), needs, [srcs](const detail::Node& self) {
    Eigen::Index off = 0;
    for (detail::Node* s : srcs) {
      if (s->needs_grad) s->grad += self.grad.middleCols(off, s->val().cols());
      off += s->val().cols();
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index n) {
  detail::Node* na = a.raw();
  if (start < 0 || n < 0 || start + n > na->val().cols())
    throw IndexError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + n) + ") exceeds " + shape_str(na->val()));
  return a.tape()->make(na->val().middleCols(start, n), {a},
                        [na, start, n](const detail::Node& self) {
                          if (na->needs_grad) na->grad.middleCols(start, n) += self.grad;
                        });
}

Var gather_rows(Var a, std::vector<int> idx) {
  detail::Node* na = a.raw();
  Mat v(Eigen::Index(idx.size()), na->val().cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= na->val().rows())
      throw IndexError("gather_rows: index " + std::to_string(idx[i]) + " out of range [0, " +
                       std::to_string(na->val().rows()) + ")");
    v.row(Eigen::Index(i)) = na->val().row(idx[i]);
  }
  return a.tape()->make(std::move(v), {a}, [na, idx = std::move(idx)](const detail::Node& self) {
    if (!na->needs_grad) return;
    for (size_t i = 0; i < idx.size(); ++i) na->grad.row(idx[i]) += self.grad.row(Eigen::Index(i));
  });
}

Var scatter_rows(Var a, std::vector<int> idx, Eigen::Index total_rows) {
  detail::Node* na = a.raw();
  if (Eigen::Index(idx.size()) != na->val().rows())
    throw DimensionError("scatter_rows: " + std::to_string(idx.size()) + " indices for " +
                         shape_str(na->val()));
  std::vector<char> seen(size_t(total_rows), 0);
  for (int i : idx) {
    if (i < 0 || i >= total_rows)
      throw IndexError("scatter_rows: index " + std::to_string(i) + " out of range [0, " +
                       std::to_string(total_rows) + ")");
    if (seen[size_t(i)]) throw ValidationError("scatter_rows: duplicate index " + std::to_string(i));
    seen[size_t(i)] = 1;
  }
  Mat v = Mat::Zero(total_rows, na->val().cols());
  for (size_t i = 0; i < idx.size(); ++i) v.row(idx[i]) = na->val().row(Eigen::Index(i));
  return a.tape()->make(std::move(v), {a}, [na, idx = std::move(idx)](const detail::Node& self) {
    if (!na->needs_grad) return;
    for (size_t i = 0; i < idx.size(); ++i) na->grad.row(Eigen::Index(i)) += self.grad.row(idx[i]);
  });
}

Var softmax_rows(Var a) {
  detail::Node* na = a.raw();
  Mat y = softmax(na->val(), 1);
  return a.tape()->make(std::move(y), {a}, [na](const detail::Node& self) {
    if (!na->needs_grad) return;
    const Mat& y = self.val();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = self.grad.row(r).dot(y.row(r));
      na->grad.row(r).array() += (self.grad.row(r).array() - dot) * y.row(r).array();
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  detail::Node* nx = x.raw();
  detail::Node* ng = gain.raw();
  detail::Node* nb = bias.raw();
  Eigen::Index cols = nx->val().cols();
  if (ng->val().rows() != 1 || ng->val().cols() != cols)
    throw DimensionError("layer_norm: gain is " + shape_str(ng->val()) + ", expected 1x" +
                         std::to_string(cols));
  if (nb->val().rows() != 1 || nb->val().cols() != cols)
    throw DimensionError("layer_norm: bias is " + shape_str(nb->val()) + ", expected 1x" +
                         std::to_string(cols));
  Eigen::Index rows = nx->val().rows();
  Mat xhat(rows, cols);
  Vec inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mu = nx->val().row(r).mean();
    double var = (nx->val().row(r).array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + eps);
    inv_std(r) = inv;
    xhat.row(r) = (nx->val().row(r).array() - mu) * inv;
  }
  Mat y(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    y.row(r) = xhat.row(r).cwiseProduct(ng->val().row(0)) + nb->val().row(0);
  return x.tape()->make(std::move(y), {x, gain, bias},
                        [nx, ng, nb, xhat = std::move(xhat),
                         inv_std = std::move(inv_std)](const detail::Node& self) {
                          if (ng->needs_grad)
                            ng->grad += self.grad.cwiseProduct(xhat).colwise().sum();
                          if (nb->needs_grad) nb->grad += self.grad.colwise().sum();
                          if (!nx->needs_grad) return;
                          for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                            Eigen::RowVectorXd dxh =
                                self.grad.row(r).cwiseProduct(ng->val().row(0));
                            double m1 = dxh.mean();
                            double m2 = dxh.cwiseProduct(xhat.row(r)).mean();
                            nx->grad.row(r).array() +=
                                inv_std(r) * (dxh.array() - m1 - xhat.row(r).array() * m2);
                          }
                        });
}

Var gelu(Var x) {
  detail::Node* nx = x.raw();
  Mat v = nx->val().unaryExpr(
      [](double t) { return 0.5 * t * (1.0 + std::erf(t * kInvSqrt2)); });
  return x.tape()->make(std::move(v), {x}, [nx](const detail::Node& self) {
    if (!nx->needs_grad) return;
    Mat d = nx->val().unaryExpr([](double t) {
      return 0.5 * (1.0 + std::erf(t * kInvSqrt2)) + t * kInvSqrt2Pi * std::exp(-0.5 * t * t);
    });
    nx->grad.array() += self.grad.array() * d.array();
  });
}

Var tanh_op(Var x) {
  detail::Node* nx = x.raw();
  return x.tape()->make(nx->val().array().tanh().matrix(), {x}, [nx](const detail::Node& self) {
    if (nx->needs_grad)
      nx->grad.array() += self.grad.array() * (1.0 - self.val().array().square());
  });
}

Var sigmoid_clamped(Var logit, double clamp) {
  detail::Node* nl = logit.raw();
  Mat v = nl->val().unaryExpr([clamp](double z) {
    double c = std::min(std::max(z, -clamp), clamp);
    return 1.0 / (1.0 + std::exp(-c));
  });
  return logit.tape()->make(std::move(v), {logit}, [nl, clamp](const detail::Node& self) {
    if (!nl->needs_grad) return;
    const Mat& s = self.val();
    const Mat& z = nl->val();
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index j = 0; j < s.cols(); ++j)
        if (std::abs(z(i, j)) < clamp)
          nl->grad(i, j) += self.grad(i, j) * s(i, j) * (1.0 - s(i, j));
  });
}

Var sum(Var a) {
  detail::Node* na = a.raw();
  return a.tape()->make(Mat::Constant(1, 1, na->val().sum()), {a},
                        [na](const detail::Node& self) {
                          if (na->needs_grad) na->grad.array() += self.grad(0, 0);
                        });
}

Var cross_entropy(Var logits, const std::vector<int>& targets) {
  detail::Node* nl = logits.raw();
  Eigen::Index n = nl->val().rows();
  Eigen::Index c = nl->val().cols();
  if (Eigen::Index(targets.size()) != n)
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(nl->val()));
  for (int t : targets)
    if (t < 0 || t >= c)
      throw IndexError("cross_entropy: target id " + std::to_string(t) + " out of range [0, " +
                       std::to_string(c) + ")");
  Mat probs = softmax(nl->val(), 1);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    double mx = nl->val().row(r).maxCoeff();
    double lse = mx + std::log((nl->val().row(r).array() - mx).exp().sum());
    loss += lse - nl->val()(r, targets[size_t(r)]);
  }
  loss /= double(n);
  return logits.tape()->make(Mat::Constant(1, 1, loss), {logits},
                             [nl, probs = std::move(probs), targets](const detail::Node& self) {
                               if (!nl->needs_grad) return;
                               double g = self.grad(0, 0) / double(probs.rows());
                               Mat d = probs;
                               for (Eigen::Index r = 0; r < d.rows(); ++r)
                                 d(r, targets[size_t(r)]) -= 1.0;
                               nl->grad += g * d;
                             });
}

Var kl_divergence(const Mat& p, Var q_logits) {
  detail::Node* nq = q_logits.raw();
  if (p.rows() != nq->val().rows() || p.cols() != nq->val().cols())
    throw DimensionError("kl_divergence: target is " + shape_str(p) + ", logits are " +
                         shape_str(nq->val()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    double s = p.row(r).sum();
    if (std::abs(s - 1.0) > 1e-6)
      throw ValidationError("kl_divergence: target row " + std::to_string(r) +
                            " sums to " + std::to_string(s) + ", expected 1");
    if (p.row(r).minCoeff() < 0.0)
      throw ValidationError("kl_divergence: target row " + std::to_string(r) +
                            " has a negative entry");
  }
  Eigen::Index n = p.rows();
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    double mx = nq->val().row(r).maxCoeff();
    double lse = mx + std::log((nq->val().row(r).array() - mx).exp().sum());
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      double pj = p(r, j);
      if (pj > 0.0) loss += pj * (std::log(pj) - (nq->val()(r, j) - lse));
    }
  }
  loss /= double(n);
  Mat diff = (softmax(nq->val(), 1) - p) / double(n);
  return q_logits.tape()->make(Mat::Constant(1, 1, loss), {q_logits},
                               [nq, diff = std::move(diff)](const detail::Node& self) {
                                 if (nq->needs_grad) nq->grad += self.grad(0, 0) * diff;
                               });
}

Var binary_cross_entropy(Var score, int label) {
  detail::Node* ns = score.raw();
  if (ns->val().rows() != 1 || ns->val().cols() != 1)
    throw DimensionError("binary_cross_entropy: score is " + shape_str(ns->val()) +
                         ", expected 1x1");
  if (label != 0 && label != 1)
    throw ValidationError("binary_cross_entropy: label " + std::to_string(label) +
                          " is not 0 or 1");
  double s = ns->val()(0, 0);
  if (!(s > 0.0 && s < 1.0))
    throw ValidationError("binary_cross_entropy: score " + std::to_string(s) +
                          " is outside (0, 1)");
  double y = double(label);
  double loss = -y * std::log(s) - (1.0 - y) * std::log(1.0 - s);
  return score.tape()->make(Mat::Constant(1, 1, loss), {score},
                            [ns, y](const detail::Node& self) {
                              if (!ns->needs_grad) return;
                              double s = ns->val()(0, 0);
                              ns->grad(0, 0) += self.grad(0, 0) * (s - y) / (s * (1.0 - s));
                            });
}

Mat softmax(const Mat& x, int axis) {
  if (axis != 0 && axis != 1) throw ValidationError("softmax: axis must be 0 or 1");
  if (x.rows() == 0 || x.cols() == 0)
    throw DimensionError("softmax: input is empty (" + shape_str(x) + ")");
  if (axis == 0) return softmax(x.transpose(), 1).transpose();
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = x.row(r).maxCoeff();
    Eigen::ArrayXd e = (x.row(r).array() - mx).exp();
    y.row(r) = (e / e.sum()).matrix();
  }
  return y;
}

}  // namespace tangled
