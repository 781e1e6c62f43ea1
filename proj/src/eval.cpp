#include "tangled/eval.hpp"

#include "tangled/corpus.hpp"
#include "tangled/sequence.hpp"

#include <algorithm>

namespace tangled {

void ScoreMatrix::validate() const {
  if (scores.rows() < 1 || scores.cols() < 1)
    throw ValidationError("score matrix: empty (" + shape_str(scores) + ")");
  if (Eigen::Index(ground_truth.size()) != scores.rows())
    throw ValidationError("score matrix: " + std::to_string(ground_truth.size()) +
                          " ground-truth entries for " + std::to_string(scores.rows()) +
                          " queries");
  for (int g : ground_truth)
    if (g < 0 || g >= scores.cols())
      throw ValidationError("score matrix: ground-truth index " + std::to_string(g) +
                            " outside gallery of " + std::to_string(scores.cols()));
}

double match_score(const SampleText& text, const std::vector<Clip>& clips, ModelParams& params) {
  VideoTextSample sample;
  sample.text = text;
  sample.clips = clips;
  InputSequence seq = build_sequence(sample);
  Tape tape;
  ForwardResult fwd = forward(embed_sequence(tape, seq, params.emb), seq, params);
  HeadOutputs h = run_heads(fwd, params);
  return h.match_score.scalar();
}

ScoreMatrix score_pairs(const std::vector<SampleText>& texts,
                        const std::vector<std::vector<Clip>>& clipsets, ModelParams& params,
                        std::vector<int> ground_truth) {
  ScoreMatrix sm;
  sm.scores = Mat(Eigen::Index(texts.size()), Eigen::Index(clipsets.size()));
  sm.ground_truth = std::move(ground_truth);
  for (size_t i = 0; i < texts.size(); ++i)
    for (size_t j = 0; j < clipsets.size(); ++j)
      sm.scores(Eigen::Index(i), Eigen::Index(j)) = match_score(texts[i], clipsets[j], params);
  sm.validate();
  return sm;
}

std::vector<int> ranks(const ScoreMatrix& sm) {
  sm.validate();
  std::vector<int> out(size_t(sm.scores.rows()));
  for (Eigen::Index q = 0; q < sm.scores.rows(); ++q) {
    const Eigen::Index truth = sm.ground_truth[size_t(q)];
    const double s = sm.scores(q, truth);
    int rank = 1;
    for (Eigen::Index j = 0; j < sm.scores.cols(); ++j) {
      if (sm.scores(q, j) > s) ++rank;
      if (sm.scores(q, j) == s && j < truth) ++rank;
    }
    out[size_t(q)] = rank;
  }
  return out;
}

double recall_at_k(const ScoreMatrix& sm, int k) {
  sm.validate();
  if (k < 1) throw ValidationError("recall: k must be at least 1, got " + std::to_string(k));
  if (k > sm.scores.cols())
    throw ValidationError("recall: k=" + std::to_string(k) + " exceeds gallery of " +
                          std::to_string(sm.scores.cols()));
  std::vector<int> r = ranks(sm);
  int hits = 0;
  for (int rank : r) hits += rank <= k;
  return double(hits) / double(r.size());
}

double median_rank(const ScoreMatrix& sm) {
  std::vector<int> r = ranks(sm);
  std::sort(r.begin(), r.end());
  return double(r[(r.size() - 1) / 2]);
}

int localize_step(const std::vector<SampleText>& candidates, const Clip& clip,
                  ModelParams& params) {
  if (candidates.empty()) throw ValidationError("localization: no candidate step texts");
  int best = 0;
  double best_score = match_score(candidates[0], {clip}, params);
  for (size_t i = 1; i < candidates.size(); ++i) {
    double s = match_score(candidates[i], {clip}, params);
    if (s > best_score) {
      best_score = s;
      best = int(i);
    }
  }
  return best;
}

std::vector<SampleText> step_candidate_texts(const WorldSpec& world) {
  std::vector<SampleText> out;
  out.reserve(size_t(world.actions));
  for (int a = 0; a < world.actions; ++a) {
    SampleText t;
    t.word_ids = {verb_word_id(a)};
    t.word_clip = {0};
    out.push_back(std::move(t));
  }
  return out;
}

double masked_action_accuracy(const std::vector<VideoTextSample>& samples, ModelParams& params) {
  if (samples.empty()) throw ValidationError("evaluation: no samples");
  long correct = 0, total = 0;
  for (const VideoTextSample& s : samples) {
    InputSequence seq = build_sequence(s);
    std::vector<int> labels;
    for (SeqPosition& p : seq.positions) {
      if (p.modality != Modality::kAction) continue;
      labels.push_back(p.action_label);
      p.visual_payload.setZero();
    }
    Tape tape;
    ForwardResult fwd = forward(embed_sequence(tape, seq, params.emb), seq, params);
    HeadOutputs h = run_heads(fwd, params);
    const Mat& logits = h.action_logits.value();
    int row = -1;
    for (size_t i = 0; i < seq.action_rows.size(); ++i) {
      const SeqPosition& p = seq.positions[size_t(seq.action_rows[i])];
      if (p.modality != Modality::kAction) continue;
      ++row;
      Eigen::Index pred;
      logits.row(Eigen::Index(i)).maxCoeff(&pred);
      correct += int(pred) == labels[size_t(row)];
      ++total;
    }
  }
  return double(correct) / double(total);
}

double matching_accuracy(const std::vector<VideoTextSample>& samples, ModelParams& params) {
  if (samples.size() < 2)
    throw ValidationError("matching evaluation needs at least 2 samples, got " +
                          std::to_string(samples.size()));
  long correct = 0, total = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const VideoTextSample& s = samples[i];
    const VideoTextSample& other = samples[(i + 1) % samples.size()];
    correct += match_score(s.text, s.clips, params) >= 0.5;
    correct += match_score(other.text, s.clips, params) < 0.5;
    total += 2;
  }
  return double(correct) / double(total);
}

double localization_accuracy(const std::vector<VideoTextSample>& samples, const WorldSpec& world,
                             ModelParams& params) {
  if (samples.empty()) throw ValidationError("evaluation: no samples");
  std::vector<SampleText> candidates = step_candidate_texts(world);
  long correct = 0, total = 0;
  for (const VideoTextSample& s : samples) {
    for (const Clip& clip : s.clips) {
      correct += localize_step(candidates, clip, params) == clip.action_label;
      ++total;
    }
  }
  return double(correct) / double(total);
}

}  // namespace tangled
