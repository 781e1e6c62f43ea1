#include "tangled/objectives.hpp"

#include <optional>
#include <utility>

namespace tangled {

MaskedSequence apply_masking(const InputSequence& seq, double rate, Rng& rng) {
  if (rate < 0.0 || rate > 1.0)
    throw ValidationError("masking: rate " + std::to_string(rate) + " outside [0, 1]");
  MaskedSequence out;
  out.seq = seq;
  int text_row = -1, action_row = -1, region_row = -1;
  for (SeqPosition& p : out.seq.positions) {
    switch (p.stream) {
      case StreamId::kText: ++text_row; break;
      case StreamId::kAction: ++action_row; break;
      case StreamId::kRegion: ++region_row; break;
    }
    if (p.modality == Modality::kSpecial) continue;
    if (!rng.bernoulli(rate)) continue;
    switch (p.modality) {
      case Modality::kText:
        out.plan.words.push_back({text_row, p.word_id});
        p.token_id = kMaskToken;
        break;
      case Modality::kAction:
        out.plan.actions.push_back({action_row, p.action_label});
        p.visual_payload.setZero();
        break;
      case Modality::kRegion:
        out.plan.regions.push_back({region_row, p.teacher});
        p.visual_payload.setZero();  // spatial vector stays
        break;
      case Modality::kSpecial: break;
    }
  }
  return out;
}

Var mlm_loss(Var word_logits, const MaskingPlan& plan) {
  if (plan.words.empty()) return word_logits.tape()->scalar_constant(0.0);
  std::vector<int> rows, targets;
  for (const MaskedWord& m : plan.words) {
    rows.push_back(m.text_row);
    targets.push_back(m.target_word);
  }
  return cross_entropy(gather_rows(word_logits, rows), targets);
}

Var action_loss(Var action_logits, const MaskingPlan& plan) {
  if (plan.actions.empty()) return action_logits.tape()->scalar_constant(0.0);
  std::vector<int> rows, targets;
  for (const MaskedAction& m : plan.actions) {
    rows.push_back(m.action_row);
    targets.push_back(m.target_label);
  }
  return cross_entropy(gather_rows(action_logits, rows), targets);
}

Var object_loss(Var object_logits, const MaskingPlan& plan) {
  if (plan.regions.empty()) return object_logits.tape()->scalar_constant(0.0);
  Mat teachers(Eigen::Index(plan.regions.size()), object_logits.cols());
  std::vector<int> rows;
  for (size_t i = 0; i < plan.regions.size(); ++i) {
    const MaskedRegion& m = plan.regions[i];
    if (m.teacher.size() != object_logits.cols())
      throw DimensionError("object loss: teacher has " + std::to_string(m.teacher.size()) +
                           " classes, logits have " + std::to_string(object_logits.cols()));
    teachers.row(Eigen::Index(i)) = m.teacher.transpose();
    rows.push_back(m.region_row);
  }
  return kl_divergence(teachers, gather_rows(object_logits, rows));
}

Var matching_loss(Var match_score, int match_label) {
  return binary_cross_entropy(match_score, match_label);
}

std::vector<VideoTextSample> make_negative_pair(std::vector<VideoTextSample> batch, Rng& rng) {
  if (batch.size() < 2)
    throw ValidationError("negative pairing needs a batch of at least 2 samples, got " +
                          std::to_string(batch.size()));
  std::vector<size_t> selected;
  for (size_t i = 0; i < batch.size(); ++i) {
    if (rng.bernoulli(0.5)) selected.push_back(i);
    batch[i].match_label = 1;
  }
  if (selected.size() == 1) {
    size_t i = selected[0];
    size_t donor = size_t(rng.below(uint64_t(batch.size()) - 1));
    if (donor >= i) ++donor;  // skip self
    batch[i].text = batch[donor].text;
    batch[i].match_label = 0;
    return batch;
  }
  if (selected.size() >= 2) {
    // random cyclic shift of the selected texts: always a derangement
    std::vector<size_t> from = selected;
    for (size_t k = from.size() - 1; k > 0; --k) {
      size_t j = size_t(rng.below(uint64_t(k)));
      std::swap(from[k], from[j]);
    }
    std::vector<SampleText> texts;
    texts.reserve(from.size());
    for (size_t src : from) texts.push_back(batch[src].text);
    for (size_t i = 0; i < selected.size(); ++i) {
      batch[selected[i]].text = std::move(texts[i]);
      batch[selected[i]].match_label = 0;
    }
  }
  return batch;
}

std::vector<PreparedSample> prepare_batch(const std::vector<VideoTextSample>& batch, double rate,
                                          Rng& rng) {
  if (batch.empty()) throw ValidationError("pretraining: empty batch");
  std::vector<VideoTextSample> paired = make_negative_pair(batch, rng);
  std::vector<PreparedSample> out;
  out.reserve(paired.size());
  for (const VideoTextSample& s : paired) {
    InputSequence clean = build_sequence(s);
    MaskedSequence masked = apply_masking(clean, rate, rng);
    out.push_back({std::move(masked.seq), std::move(clean), std::move(masked.plan),
                   s.match_label});
  }
  return out;
}

BatchObjective batch_objective(Tape& tape, const std::vector<PreparedSample>& batch,
                               ModelParams& params, const TaskWeights& weights) {
  if (batch.empty()) throw ValidationError("pretraining: empty batch");
  std::vector<Var> word_parts, action_parts, object_parts;
  std::vector<int> word_targets, action_targets;
  std::vector<Vec> teachers;
  std::optional<Var> match_sum;

  for (const PreparedSample& ps : batch) {
    Var embedded = embed_sequence(tape, ps.seq, params.emb);
    ForwardResult fwd = forward(embedded, ps.seq, params);
    HeadOutputs h = run_heads(fwd, params);
    ForwardResult clean_fwd =
        forward(embed_sequence(tape, ps.clean_seq, params.emb), ps.clean_seq, params);
    Var clean_score = match_head(clean_fwd, params);

    if (!ps.plan.words.empty()) {
      std::vector<int> rows;
      for (const MaskedWord& m : ps.plan.words) {
        rows.push_back(m.text_row);
        word_targets.push_back(m.target_word);
      }
      word_parts.push_back(gather_rows(h.word_logits, rows));
    }
    if (!ps.plan.actions.empty()) {
      std::vector<int> rows;
      for (const MaskedAction& m : ps.plan.actions) {
        rows.push_back(m.action_row);
        action_targets.push_back(m.target_label);
      }
      action_parts.push_back(gather_rows(h.action_logits, rows));
    }
    if (!ps.plan.regions.empty()) {
      std::vector<int> rows;
      for (const MaskedRegion& m : ps.plan.regions) {
        rows.push_back(m.region_row);
        teachers.push_back(m.teacher);
      }
      object_parts.push_back(gather_rows(h.object_logits, rows));
    }
    Var ml = matching_loss(clean_score, ps.match_label);
    match_sum = match_sum ? add(*match_sum, ml) : ml;
  }

  BatchObjective out;
  out.mlm = word_parts.empty() ? tape.scalar_constant(0.0)
                               : cross_entropy(concat_rows(word_parts), word_targets);
  out.action = action_parts.empty() ? tape.scalar_constant(0.0)
                                    : cross_entropy(concat_rows(action_parts), action_targets);
  if (object_parts.empty()) {
    out.object = tape.scalar_constant(0.0);
  } else {
    Mat p(Eigen::Index(teachers.size()), teachers[0].size());
    for (size_t i = 0; i < teachers.size(); ++i) {
      if (teachers[i].size() != p.cols())
        throw DimensionError("object loss: inconsistent teacher sizes in batch");
      p.row(Eigen::Index(i)) = teachers[i].transpose();
    }
    out.object = kl_divergence(p, concat_rows(object_parts));
  }
  out.matching = scale(*match_sum, 1.0 / double(batch.size()));
  out.total = add(add(scale(out.mlm, weights.mlm), scale(out.action, weights.action)),
                  add(scale(out.object, weights.object), scale(out.matching, weights.match)));

  out.values.mlm = out.mlm.scalar();
  out.values.action = out.action.scalar();
  out.values.object = out.object.scalar();
  out.values.matching = out.matching.scalar();
  out.values.total = out.total.scalar();
  out.values.masked_words = int(word_targets.size());
  out.values.masked_actions = int(action_targets.size());
  out.values.masked_regions = int(teachers.size());
  out.values.pairs = int(batch.size());
  return out;
}

LossBreakdown pretrain_step(const std::vector<VideoTextSample>& batch, ModelParams& params,
                            const AdamConfig& adam, const TaskWeights& weights, Rng& rng) {
  std::vector<PreparedSample> prepared = prepare_batch(batch, params.config.mask_rate, rng);
  Tape tape;
  BatchObjective obj = batch_objective(tape, prepared, params, weights);
  std::vector<NamedParam> named = params.named_params();
  compute_gradients(obj.total, named);
  adam_step(named, adam);
  return obj.values;
}

}  // namespace tangled
