#include "tangled/model.hpp"

#include <cmath>

namespace tangled {

void ModelConfig::validate() const {
  if (num_layers < 0) throw ValidationError("model: num_layers must be nonnegative");
  if (hidden <= 0 || heads <= 0) throw ValidationError("model: hidden and heads must be positive");
  if (hidden % heads != 0)
    throw ValidationError("model: hidden (" + std::to_string(hidden) +
                          ") must be divisible by heads (" + std::to_string(heads) + ")");
  if (ff_hidden < 0) throw ValidationError("model: ff_hidden must be nonnegative");
  if (vocab_words <= 0 || num_actions <= 0 || num_object_classes <= 0)
    throw ValidationError("model: vocabulary and class counts must be positive");
  if (max_positions <= 0 || max_segments <= 0)
    throw ValidationError("model: table capacities must be positive");
  if (action_dim <= 0 || region_dim <= 0)
    throw ValidationError("model: feature dims must be positive");
  if (mask_rate < 0.0 || mask_rate > 1.0)
    throw ValidationError("model: mask_rate must be in [0, 1]");
}

namespace {

void visit_linear(const std::string& prefix, LinearParam& p,
                  const std::function<void(const std::string&, Parameter&)>& fn) {
  fn(prefix + ".W", p.W);
  fn(prefix + ".b", p.b);
}

void visit_stream(const std::string& prefix, StreamLayerParams& s,
                  const std::function<void(const std::string&, Parameter&)>& fn) {
  visit_linear(prefix + ".attn.q", s.attn.q, fn);
  visit_linear(prefix + ".attn.k", s.attn.k, fn);
  visit_linear(prefix + ".attn.v", s.attn.v, fn);
  visit_linear(prefix + ".attn.out", s.attn.out, fn);
  visit_linear(prefix + ".ff1", s.ff1, fn);
  visit_linear(prefix + ".ff2", s.ff2, fn);
  fn(prefix + ".ln1_gain", s.ln1_gain);
  fn(prefix + ".ln1_bias", s.ln1_bias);
  fn(prefix + ".ln2_gain", s.ln2_gain);
  fn(prefix + ".ln2_bias", s.ln2_bias);
}

}  // namespace

void ModelParams::visit(const std::function<void(const std::string&, Parameter&)>& fn) {
  fn("emb.token", emb.token);
  fn("emb.position", emb.position);
  fn("emb.segment", emb.segment);
  visit_linear("emb.action_proj", emb.action_proj, fn);
  visit_linear("emb.region_proj", emb.region_proj, fn);
  fn("emb.spatial", emb.spatial);
  fn("emb.ln_gain", emb.ln_gain);
  fn("emb.ln_bias", emb.ln_bias);
  for (size_t i = 0; i < layers.size(); ++i) {
    std::string p = "layers." + std::to_string(i);
    LayerParams& l = layers[i];
    visit_stream(p + ".text", l.text, fn);
    visit_stream(p + ".action", l.action, fn);
    visit_stream(p + ".region", l.region, fn);
    fn(p + ".cross.q_over_text", l.cross.q_over_text);
    fn(p + ".cross.k_text", l.cross.k_text);
    fn(p + ".cross.v_text", l.cross.v_text);
    fn(p + ".cross.q_over_regions", l.cross.q_over_regions);
    fn(p + ".cross.k_region", l.cross.k_region);
    fn(p + ".cross.v_region", l.cross.v_region);
    visit_linear(p + ".cross.text_summary_key", l.cross.text_summary_key, fn);
    visit_linear(p + ".cross.text_summary_value", l.cross.text_summary_value, fn);
    visit_linear(p + ".cross.region_summary_key", l.cross.region_summary_key, fn);
    visit_linear(p + ".cross.region_summary_value", l.cross.region_summary_value, fn);
  }
  visit_linear("heads.word", heads.word, fn);
  visit_linear("heads.action", heads.action, fn);
  visit_linear("heads.object", heads.object, fn);
  visit_linear("heads.pool", heads.pool, fn);
  visit_linear("heads.match", heads.match, fn);
}

std::vector<NamedParam> ModelParams::named_params() {
  std::vector<NamedParam> out;
  visit([&out](const std::string& name, Parameter& p) { out.push_back({name, &p}); });
  return out;
}

void ModelParams::zero_grad() {
  visit([](const std::string&, Parameter& p) { p.zero_grad(); });
}

namespace {

double xavier_std(Eigen::Index in, Eigen::Index out) {
  return std::sqrt(2.0 / double(in + out));
}

LinearParam make_linear(Eigen::Index in, Eigen::Index out, Rng& rng) {
  return LinearParam{Parameter::randn(in, out, xavier_std(in, out), rng),
                     Parameter::zeros(1, out)};
}

StreamLayerParams make_stream(int d, int ff, double resid_scale, Rng& rng) {
  StreamLayerParams s;
  s.attn.q = make_linear(d, d, rng);
  s.attn.k = make_linear(d, d, rng);
  s.attn.v = make_linear(d, d, rng);
  // projections that feed a residual sum start small so depth does not blow
  // up the pre-norm signal; keeps lr in the stable band at every depth
  s.attn.out = make_linear(d, d, rng);
  s.attn.out.W.value *= resid_scale;
  s.ff1 = make_linear(d, ff, rng);
  s.ff2 = make_linear(ff, d, rng);
  s.ff2.W.value *= resid_scale;
  s.ln1_gain = Parameter::filled(1, d, 1.0);
  s.ln1_bias = Parameter::zeros(1, d);
  s.ln2_gain = Parameter::filled(1, d, 1.0);
  s.ln2_bias = Parameter::zeros(1, d);
  return s;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  const int d = cfg.hidden;
  const double emb_std = 0.1;
  p.emb.token = Parameter::randn(cfg.vocab_size(), d, emb_std, rng);
  p.emb.position = Parameter::randn(cfg.max_positions, d, emb_std, rng);
  p.emb.segment = Parameter::randn(cfg.max_segments, d, emb_std, rng);
  p.emb.action_proj = make_linear(cfg.action_dim, d, rng);
  p.emb.region_proj = make_linear(cfg.region_dim, d, rng);
  p.emb.spatial = Parameter::randn(5, d, emb_std, rng);
  p.emb.ln_gain = Parameter::filled(1, d, 1.0);
  p.emb.ln_bias = Parameter::zeros(1, d);
  const double resid_scale = 1.0 / std::sqrt(2.0 * double(cfg.num_layers));
  p.layers.resize(size_t(cfg.num_layers));
  for (LayerParams& l : p.layers) {
    l.text = make_stream(d, cfg.ff(), resid_scale, rng);
    l.action = make_stream(d, cfg.ff(), resid_scale, rng);
    l.region = make_stream(d, cfg.ff(), resid_scale, rng);
    const double cross_std = xavier_std(d, d);
    l.cross.q_over_text = Parameter::randn(d, d, cross_std, rng);
    l.cross.k_text = Parameter::randn(d, d, cross_std, rng);
    l.cross.v_text = Parameter::randn(d, d, cross_std, rng);
    l.cross.q_over_regions = Parameter::randn(d, d, cross_std, rng);
    l.cross.k_region = Parameter::randn(d, d, cross_std, rng);
    l.cross.v_region = Parameter::randn(d, d, cross_std, rng);
    l.cross.text_summary_key = make_linear(d, d, rng);
    l.cross.text_summary_value = make_linear(d, d, rng);
    l.cross.region_summary_key = make_linear(d, d, rng);
    l.cross.region_summary_value = make_linear(d, d, rng);
  }
  p.heads.word = make_linear(d, cfg.vocab_size(), rng);
  p.heads.action = make_linear(d, cfg.num_actions, rng);
  p.heads.object = make_linear(d, cfg.num_object_classes, rng);
  p.heads.pool = make_linear(d, d, rng);
  p.heads.match = make_linear(d, 1, rng);
  return p;
}

Var linear(Tape& tape, Var x, LinearParam& p) {
  return add_rowvec(matmul(x, tape.leaf(p.W)), tape.leaf(p.b));
}

Var attend_heads(Var q, Var k, Var v, int heads) {
  if (k.rows() == 0) throw ValidationError("attention: key set is empty");
  if (heads <= 0) throw ValidationError("attention: head count must be positive");
  if (q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows())
    throw DimensionError("attention: inconsistent shapes q=" + shape_str(q.value()) +
                         " k=" + shape_str(k.value()) + " v=" + shape_str(v.value()));
  if (q.cols() % heads != 0)
    throw DimensionError("attention: width " + std::to_string(q.cols()) +
                         " not divisible by " + std::to_string(heads) + " heads");
  const Eigen::Index hd = q.cols() / heads;
  const double scl = 1.0 / std::sqrt(double(hd));
  std::vector<Var> outs;
  outs.reserve(size_t(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * hd, hd);
    Var kh = slice_cols(k, h * hd, hd);
    Var vh = slice_cols(v, h * hd, hd);
    Var weights = softmax_rows(scale(matmul_nt(qh, kh), scl));
    outs.push_back(matmul(weights, vh));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

Var multihead_attention(Tape& tape, Var q_in, Var k_in, Var v_in, AttentionParams& p,
                        int heads) {
  Var q = linear(tape, q_in, p.q);
  Var k = linear(tape, k_in, p.k);
  Var v = linear(tape, v_in, p.v);
  return linear(tape, attend_heads(q, k, v, heads), p.out);
}

StreamStates split_streams(Var embedded, const InputSequence& seq) {
  if (embedded.rows() != seq.size())
    throw DimensionError("split_streams: embedded has " + std::to_string(embedded.rows()) +
                         " rows for a sequence of " + std::to_string(seq.size()));
  StreamStates s;
  s.text = gather_rows(embedded, seq.text_rows);
  s.action = gather_rows(embedded, seq.action_rows);
  s.region = gather_rows(embedded, seq.region_rows);
  return s;
}

namespace {

Var stream_sublayer(Tape& tape, Var h, StreamLayerParams& sp,
                    const std::optional<Var>& extra_k, const std::optional<Var>& extra_v,
                    int heads, int* key_count) {
  Var q = linear(tape, h, sp.attn.q);
  Var k = linear(tape, h, sp.attn.k);
  Var v = linear(tape, h, sp.attn.v);
  if (extra_k) {
    k = concat_rows({k, *extra_k});
    v = concat_rows({v, *extra_v});
  }
  if (key_count) *key_count = int(k.rows());
  Var att = linear(tape, attend_heads(q, k, v, heads), sp.attn.out);
  Var x = layer_norm(add(h, att), tape.leaf(sp.ln1_gain), tape.leaf(sp.ln1_bias));
  Var ff = linear(tape, gelu(linear(tape, x, sp.ff1)), sp.ff2);
  return layer_norm(add(x, ff), tape.leaf(sp.ln2_gain), tape.leaf(sp.ln2_bias));
}

}  // namespace

StreamStates tangled_block(const StreamStates& in, LayerParams& lp, const ModelConfig& cfg,
                           BlockTrace* trace) {
  Tape& tape = *in.text.tape();
  CrossLayerParams& cross = lp.cross;

  std::optional<Var> text_k, text_v;      // appended to the text stream
  std::optional<Var> visual_k, visual_v;  // appended to action and region streams
  if (cfg.cross_stacking) {
    Var text_summary = attend_heads(matmul(in.action, tape.leaf(cross.q_over_text)),
                                    matmul(in.text, tape.leaf(cross.k_text)),
                                    matmul(in.text, tape.leaf(cross.v_text)), cfg.heads);
    Var region_summary = attend_heads(matmul(in.action, tape.leaf(cross.q_over_regions)),
                                      matmul(in.region, tape.leaf(cross.k_region)),
                                      matmul(in.region, tape.leaf(cross.v_region)), cfg.heads);
    visual_k = linear(tape, text_summary, cross.text_summary_key);
    visual_v = linear(tape, text_summary, cross.text_summary_value);
    text_k = linear(tape, region_summary, cross.region_summary_key);
    text_v = linear(tape, region_summary, cross.region_summary_value);
  }

  StreamStates out;
  out.text = stream_sublayer(tape, in.text, lp.text, text_k, text_v, cfg.heads,
                             trace ? &trace->text_keys : nullptr);
  out.action = stream_sublayer(tape, in.action, lp.action, visual_k, visual_v, cfg.heads,
                               trace ? &trace->action_keys : nullptr);
  out.region = stream_sublayer(tape, in.region, lp.region, visual_k, visual_v, cfg.heads,
                               trace ? &trace->region_keys : nullptr);
  return out;
}

ForwardResult forward(Var embedded, const InputSequence& seq, ModelParams& params) {
  Tape& tape = *embedded.tape();
  if (seq.text_rows.empty() || seq.text_rows[0] != 0)
    throw ValidationError("forward: sequence does not start with [CLS]");
  Var normed = layer_norm(embedded, tape.leaf(params.emb.ln_gain), tape.leaf(params.emb.ln_bias));
  StreamStates s = split_streams(normed, seq);
  for (LayerParams& lp : params.layers) s = tangled_block(s, lp, params.config);
  ForwardResult out;
  out.states = s;
  Var cls = gather_rows(s.text, {0});
  out.pooled_cls = tanh_op(linear(tape, cls, params.heads.pool));
  return out;
}

HeadOutputs run_heads(const ForwardResult& fwd, ModelParams& params) {
  Tape& tape = *fwd.states.text.tape();
  HeadOutputs out;
  out.word_logits = linear(tape, fwd.states.text, params.heads.word);
  out.action_logits = linear(tape, fwd.states.action, params.heads.action);
  out.object_logits = linear(tape, fwd.states.region, params.heads.object);
  out.match_score = match_head(fwd, params);
  return out;
}

Var match_head(const ForwardResult& fwd, ModelParams& params) {
  Tape& tape = *fwd.pooled_cls.tape();
  return sigmoid_clamped(linear(tape, fwd.pooled_cls, params.heads.match));
}

}  // namespace tangled
