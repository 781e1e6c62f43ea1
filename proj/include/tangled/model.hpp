#pragma once

#include "tangled/graph.hpp"
#include "tangled/optim.hpp"
#include "tangled/sequence.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tangled {

struct ModelConfig {
  int num_layers = 4;
  int hidden = 64;
  int heads = 4;
  int ff_hidden = 0;  // 0 means 4 * hidden
  int vocab_words = 256;
  int num_actions = 8;
  int num_object_classes = 16;
  int max_positions = 128;
  int max_segments = 8;
  int action_dim = 12;
  int region_dim = 12;
  double mask_rate = 0.15;
  bool cross_stacking = true;  // false runs three independent streams

  int vocab_size() const { return vocab_words + kNumSpecialTokens; }
  int ff() const { return ff_hidden > 0 ? ff_hidden : 4 * hidden; }
  void validate() const;
};

struct LinearParam {
  Parameter W;  // in x out
  Parameter b;  // 1 x out
};

struct AttentionParams {
  LinearParam q, k, v, out;
};

struct StreamLayerParams {
  AttentionParams attn;
  LinearParam ff1, ff2;
  Parameter ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

// Weights tying the streams together inside one block: action-queried
// summaries of the text and region streams, plus the linear maps that turn
// those summaries into extra key/value rows for the other streams.
struct CrossLayerParams {
  Parameter q_over_text, k_text, v_text;        // summary of text, queried by actions
  Parameter q_over_regions, k_region, v_region;  // summary of regions, queried by actions
  LinearParam text_summary_key, text_summary_value;      // appended to action & region streams
  LinearParam region_summary_key, region_summary_value;  // appended to text stream
};

struct LayerParams {
  StreamLayerParams text, action, region;
  CrossLayerParams cross;
};

struct EmbeddingTables {
  Parameter token;     // vocab_size x d
  Parameter position;  // max_positions x d
  Parameter segment;   // max_segments x d
  LinearParam action_proj;  // action_dim -> d
  LinearParam region_proj;  // region_dim -> d
  Parameter spatial;   // 5 x d
  Parameter ln_gain;   // 1 x d, layer norm over the summed embedding
  Parameter ln_bias;   // 1 x d
};

struct HeadParams {
  LinearParam word;    // d -> vocab_size
  LinearParam action;  // d -> A
  LinearParam object;  // d -> C_obj
  LinearParam pool;    // d -> d, tanh
  LinearParam match;   // d -> 1
};

struct ModelParams {
  ModelConfig config;
  EmbeddingTables emb;
  std::vector<LayerParams> layers;
  HeadParams heads;

  static ModelParams init(const ModelConfig& cfg, Rng& rng);

  // fixed walk order; names are stable across runs and checkpoints
  void visit(const std::function<void(const std::string&, Parameter&)>& fn);
  std::vector<NamedParam> named_params();
  void zero_grad();
};

Var linear(Tape& tape, Var x, LinearParam& p);

// softmax(Q_h K_h^T / sqrt(d/heads)) V_h per head, heads concatenated;
// inputs are already projected, no output projection
Var attend_heads(Var q, Var k, Var v, int heads);

// q/k/v projections, per-head attention, output projection
Var multihead_attention(Tape& tape, Var q_in, Var k_in, Var v_in, AttentionParams& p,
                        int heads);

struct StreamStates {
  Var text, action, region;
};

struct BlockTrace {
  int text_keys = 0, action_keys = 0, region_keys = 0;
};

StreamStates split_streams(Var embedded, const InputSequence& seq);

StreamStates tangled_block(const StreamStates& in, LayerParams& lp, const ModelConfig& cfg,
                           BlockTrace* trace = nullptr);

struct ForwardResult {
  StreamStates states;
  Var pooled_cls;  // 1 x d
};

ForwardResult forward(Var embedded, const InputSequence& seq, ModelParams& params);

struct HeadOutputs {
  Var word_logits;    // N_w x vocab_size
  Var action_logits;  // N_a x A
  Var object_logits;  // N_r x C_obj
  Var match_score;    // 1 x 1, in (0,1)
};

HeadOutputs run_heads(const ForwardResult& fwd, ModelParams& params);

// Just the matching score of a forward pass, skipping the per-token heads.
Var match_head(const ForwardResult& fwd, ModelParams& params);

}  // namespace tangled
