#pragma once

#include "tangled/data.hpp"
#include "tangled/model.hpp"

#include <vector>

namespace tangled {

// Relevance of Q text queries against G gallery clip sets, plus the correct
// gallery index per query.
struct ScoreMatrix {
  Mat scores;  // Q x G
  std::vector<int> ground_truth;
  void validate() const;
};

// Match-head score of one (text, clip set) pair through a clean forward.
double match_score(const SampleText& text, const std::vector<Clip>& clips, ModelParams& params);

// scores(i, j) = match score of text i against clip set j.
ScoreMatrix score_pairs(const std::vector<SampleText>& texts,
                        const std::vector<std::vector<Clip>>& clipsets, ModelParams& params,
                        std::vector<int> ground_truth);

// Rank of each query's true item: 1 + #(strictly higher) + #(ties at a
// smaller index). Deterministic under ties.
std::vector<int> ranks(const ScoreMatrix& sm);

double recall_at_k(const ScoreMatrix& sm, int k);
double median_rank(const ScoreMatrix& sm);  // lower median

// Argmax of match scores of (candidate text, clip); ties take the smallest
// index.
int localize_step(const std::vector<SampleText>& candidates, const Clip& clip,
                  ModelParams& params);

// One single-word candidate text per action id: its verb word.
std::vector<SampleText> step_candidate_texts(const WorldSpec& world);

// Fraction of action positions recovered after zeroing every action payload.
double masked_action_accuracy(const std::vector<VideoTextSample>& samples, ModelParams& params);

// Balanced pairs: each sample scored against its own text (label 1) and the
// next sample's text (label 0); prediction thresholds the score at 0.5.
double matching_accuracy(const std::vector<VideoTextSample>& samples, ModelParams& params);

// Fraction of clips whose action id wins the candidate-text argmax.
double localization_accuracy(const std::vector<VideoTextSample>& samples, const WorldSpec& world,
                             ModelParams& params);

}  // namespace tangled
