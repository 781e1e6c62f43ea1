#include "tangled/optim.hpp"

#include <algorithm>

#include "tangled/graph.hpp"

namespace tangled {

Parameter Parameter::zeros(Eigen::Index rows, Eigen::Index cols) {
  Parameter p;
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  p.adam_m = Mat::Zero(rows, cols);
  p.adam_v = Mat::Zero(rows, cols);
  return p;
}

Parameter Parameter::filled(Eigen::Index rows, Eigen::Index cols, double v) {
  Parameter p = zeros(rows, cols);
  p.value.setConstant(v);
  return p;
}

Parameter Parameter::randn(Eigen::Index rows, Eigen::Index cols, double stdev, Rng& rng) {
  Parameter p = zeros(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) p.value(r, c) = rng.normal() * stdev;
  return p;
}

void adam_step(const std::vector<NamedParam>& params, const AdamConfig& cfg) {
  for (const NamedParam& np : params) {
    Parameter& p = *np.param;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw DimensionError("adam_step: grad shape " + shape_str(p.grad) +
                           " does not match value " + shape_str(p.value) + " for " + np.name);
    p.step_count += 1;
    p.adam_m = cfg.beta1 * p.adam_m + (1.0 - cfg.beta1) * p.grad;
    p.adam_v = cfg.beta2 * p.adam_v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
    double mc = 1.0 - std::pow(cfg.beta1, double(p.step_count));
    double vc = 1.0 - std::pow(cfg.beta2, double(p.step_count));
    Mat m_hat = p.adam_m / mc;
    Mat v_hat = p.adam_v / vc;
    p.value.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
    p.grad.setZero();
  }
}

double scheduled_lr(double peak, int step, int total_steps) {
  if (total_steps <= 0) throw ValidationError("scheduled_lr: total_steps must be positive");
  if (step < 0 || step >= total_steps)
    throw ValidationError("scheduled_lr: step " + std::to_string(step) + " outside 0.." +
                          std::to_string(total_steps - 1));
  const int warmup = std::max(1, total_steps / 10);
  if (step < warmup) return peak * double(step + 1) / double(warmup);
  if (total_steps == warmup) return peak;
  return peak * double(total_steps - step) / double(total_steps - warmup);
}

void compute_gradients(Var loss, const std::vector<NamedParam>& params) {
  for (const NamedParam& np : params) np.param->zero_grad();
  if (!loss.valid()) throw StateError("compute_gradients: loss without a preceding forward pass");
  loss.tape()->backward(loss);
}

}  // namespace tangled
