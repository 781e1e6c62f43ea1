#pragma once

#include "tangled/rng.hpp"
#include "tangled/types.hpp"

#include <string>
#include <vector>

namespace tangled {

// Trainable matrix plus its gradient and Adam state. Biases and layer-norm
// vectors are stored as 1xN matrices.
struct Parameter {
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  long step_count = 0;

  static Parameter zeros(Eigen::Index rows, Eigen::Index cols);
  static Parameter filled(Eigen::Index rows, Eigen::Index cols, double v);
  // entries drawn row-major from rng.normal() * stdev
  static Parameter randn(Eigen::Index rows, Eigen::Index cols, double stdev, Rng& rng);

  void zero_grad() { grad.setZero(); }
};

struct NamedParam {
  std::string name;
  Parameter* param;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // joint L2 bound applied to gradients before the update; <=0 disables
};

// One Adam update with bias correction; zeroes every gradient afterwards.
void adam_step(const std::vector<NamedParam>& params, const AdamConfig& cfg);

// Scale every gradient jointly so their combined L2 norm is at most max_norm.
// Returns the norm seen before scaling; max_norm <= 0 leaves gradients alone.
double clip_gradient_norm(const std::vector<NamedParam>& params, double max_norm);

// Effective learning rate for step `step` of `total_steps`: linear warmup from
// peak/W over the first W = max(1, total/10) steps, then linear decay to zero
// at the end of the run. Keeps the configured peak usable on small batches.
double scheduled_lr(double peak, int step, int total_steps);

class Var;

// Zeroes every listed gradient, then runs backward from `loss`; parameters the
// loss never touched keep a zero gradient.
void compute_gradients(Var loss, const std::vector<NamedParam>& params);

}  // namespace tangled
