#pragma once

#include "tangled/model.hpp"
#include "tangled/sequence.hpp"

#include <vector>

namespace tangled {

struct MaskedWord {
  int text_row;  // row within the text stream
  int target_word;
};

struct MaskedAction {
  int action_row;
  int target_label;
};

struct MaskedRegion {
  int region_row;
  Vec teacher;
};

// Which positions were masked and what each one should predict.
struct MaskingPlan {
  std::vector<MaskedWord> words;
  std::vector<MaskedAction> actions;
  std::vector<MaskedRegion> regions;
};

struct MaskedSequence {
  InputSequence seq;
  MaskingPlan plan;
};

// Independently masks each word (-> [MASK] token), action, and region
// (payload zeroed, spatial vector kept) with the given probability.
// Structural tokens are never touched.
MaskedSequence apply_masking(const InputSequence& seq, double rate, Rng& rng);

// Per-sample losses. Each returns an exact 0 when its masked set is empty.
Var mlm_loss(Var word_logits, const MaskingPlan& plan);
Var action_loss(Var action_logits, const MaskingPlan& plan);
Var object_loss(Var object_logits, const MaskingPlan& plan);
Var matching_loss(Var match_score, int match_label);

// Selects each sample as a negative with probability 0.5 and circulates the
// selected samples' texts through a derangement (a lone selection copies text
// from a random other sample). Selected samples get match_label 0.
std::vector<VideoTextSample> make_negative_pair(std::vector<VideoTextSample> batch, Rng& rng);

struct TaskWeights {
  double mlm = 1.0;
  double action = 1.0;
  double object = 1.0;
  double match = 1.0;
};

struct LossBreakdown {
  double mlm = 0.0;
  double action = 0.0;
  double object = 0.0;
  double matching = 0.0;
  double total = 0.0;
  int masked_words = 0;
  int masked_actions = 0;
  int masked_regions = 0;
  int pairs = 0;
};

struct PreparedSample {
  InputSequence seq;        // masked; drives the three masked-prediction losses
  InputSequence clean_seq;  // unmasked; drives the matching loss
  MaskingPlan plan;
  int match_label = 1;
};

// Negative pairing followed by masking, consuming rng draws in batch order.
std::vector<PreparedSample> prepare_batch(const std::vector<VideoTextSample>& batch, double rate,
                                          Rng& rng);

struct BatchObjective {
  Var mlm, action, object, matching, total;
  LossBreakdown values;
};

// Two forwards per sample: the masked sequence feeds the per-position
// classification losses (averaged over every masked position in the batch),
// the clean sequence feeds the matching score, matching how the pair is
// scored at evaluation time. Matching averages over the samples.
BatchObjective batch_objective(Tape& tape, const std::vector<PreparedSample>& batch,
                               ModelParams& params, const TaskWeights& weights);

// prepare -> forward -> weighted losses -> backward -> Adam. Returns the loss
// values of the step.
LossBreakdown pretrain_step(const std::vector<VideoTextSample>& batch, ModelParams& params,
                            const AdamConfig& adam, const TaskWeights& weights, Rng& rng);

}  // namespace tangled
