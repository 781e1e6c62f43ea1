#include "tangled/commands.hpp"

#include "tangled/checkpoint.hpp"
#include "tangled/corpus.hpp"
#include "tangled/eval.hpp"
#include "tangled/io.hpp"
#include "tangled/objectives.hpp"

#include <algorithm>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace tangled {

namespace {

// rng substream ids; the corpus generator owns 0 and 16+, these must not clash
constexpr uint64_t kStreamInit = 1;
constexpr uint64_t kStreamTraining = 2;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void require_seed(const RunConfig& cfg) {
  if (!cfg.has_seed)
    throw ValidationError("seed is required: pass --seed or set seed= in the config file");
}

void require_path(const std::string& v, const std::string& what) {
  if (v.empty()) throw ValidationError(what + " path is required");
}

std::string train_path(const RunConfig& cfg) { return cfg.dataset + ".train.abtd"; }
std::string val_path(const RunConfig& cfg) { return cfg.dataset + ".val.abtd"; }
std::string loss_log_path(const RunConfig& cfg) {
  return cfg.loss_log.empty() ? cfg.checkpoint + ".losses.tsv" : cfg.loss_log;
}

// the dimensions a model and a dataset must agree on before they can meet
void check_dims(const WorldSpec& w, const ModelConfig& m, const std::string& origin) {
  auto bad = [&origin](const char* field, int have, int want) {
    throw ValidationError(origin + ": dataset has " + field + "=" + std::to_string(have) +
                          " but the model config says " + std::to_string(want));
  };
  if (w.vocab_words != m.vocab_words) bad("vocab_words", w.vocab_words, m.vocab_words);
  if (w.actions != m.num_actions) bad("actions", w.actions, m.num_actions);
  if (w.object_classes != m.num_object_classes)
    bad("object_classes", w.object_classes, m.num_object_classes);
  if (w.action_dim != m.action_dim) bad("action_dim", w.action_dim, m.action_dim);
  if (w.region_dim != m.region_dim) bad("region_dim", w.region_dim, m.region_dim);
}

using ReportRows = std::vector<std::pair<std::string, std::string>>;

void emit_report(const ReportRows& rows, const std::string& path) {
  std::string text;
  for (const auto& [k, v] : rows) text += k + "\t" + v + "\n";
  std::fputs(text.c_str(), stdout);
  if (!path.empty()) write_file_atomic(path, text);
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg) {
  require_seed(cfg);
  require_path(cfg.dataset, "dataset");
  GeneratedData data = generate(cfg.world_spec());
  write_dataset(data.train, train_path(cfg));
  write_dataset(data.val, val_path(cfg));
  emit_report({{"train_records", std::to_string(data.train.samples.size())},
               {"val_records", std::to_string(data.val.samples.size())},
               {"train_file", train_path(cfg)},
               {"val_file", val_path(cfg)}},
              "");
}

void cmd_pretrain(const RunConfig& cfg) {
  require_seed(cfg);
  require_path(cfg.dataset, "dataset");
  require_path(cfg.checkpoint, "checkpoint");
  if (cfg.steps < 0) throw ValidationError("steps must be nonnegative");
  if (cfg.steps > 0 && cfg.batch_size < 2)
    throw ValidationError("batch_size must be at least 2");

  Dataset train = read_dataset(train_path(cfg));
  ModelConfig mc = cfg.model_config();
  mc.validate();
  check_dims(train.world, mc, train_path(cfg));
  if (cfg.steps > 0 && train.samples.empty())
    throw ValidationError(train_path(cfg) + ": training split is empty");

  Rng master(cfg.seed);
  Rng init_rng = master.substream(kStreamInit);
  Rng train_rng = master.substream(kStreamTraining);
  ModelParams params = ModelParams::init(mc, init_rng);
  AdamConfig adam;
  TaskWeights weights = cfg.task_weights();

  std::string log;
  LossBreakdown last;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<VideoTextSample> batch;
    batch.reserve(size_t(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b)
      batch.push_back(train.samples[train_rng.below(train.samples.size())]);
    adam.lr = scheduled_lr(cfg.lr, step, cfg.steps);
    last = pretrain_step(batch, params, adam, weights, train_rng);
    log += std::to_string(step) + "\t" + fmt_double(last.mlm) + "\t" + fmt_double(last.action) +
           "\t" + fmt_double(last.object) + "\t" + fmt_double(last.matching) + "\t" +
           fmt_double(last.total) + "\n";
  }
  save_checkpoint(params, cfg.checkpoint);
  write_file_atomic(loss_log_path(cfg), log);

  ReportRows rows = {{"steps", std::to_string(cfg.steps)},
                     {"train_records", std::to_string(train.samples.size())},
                     {"checkpoint", cfg.checkpoint},
                     {"loss_log", loss_log_path(cfg)}};
  if (cfg.steps > 0) rows.emplace_back("final_total", fmt_double(last.total));
  emit_report(rows, "");
}

void cmd_eval_retrieval(const RunConfig& cfg) {
  require_seed(cfg);
  require_path(cfg.dataset, "dataset");
  require_path(cfg.checkpoint, "checkpoint");
  if (cfg.gallery < 1) throw ValidationError("gallery must be positive");

  ModelParams params = load_checkpoint(cfg.checkpoint);
  Dataset val = read_dataset(val_path(cfg));
  check_dims(val.world, params.config, val_path(cfg));
  if (val.samples.empty()) throw ValidationError(val_path(cfg) + ": validation split is empty");

  int g = std::min(cfg.gallery, int(val.samples.size()));
  std::vector<SampleText> texts;
  std::vector<std::vector<Clip>> clipsets;
  std::vector<int> gt;
  for (int i = 0; i < g; ++i) {
    texts.push_back(val.samples[size_t(i)].text);
    clipsets.push_back(val.samples[size_t(i)].clips);
    gt.push_back(i);
  }
  ScoreMatrix sm = score_pairs(texts, clipsets, params, std::move(gt));

  ReportRows rows = {{"gallery", std::to_string(g)}, {"R@1", fmt_double(recall_at_k(sm, 1))}};
  if (g >= 5) rows.emplace_back("R@5", fmt_double(recall_at_k(sm, 5)));
  if (g >= 10) rows.emplace_back("R@10", fmt_double(recall_at_k(sm, 10)));
  rows.emplace_back("MedianR", fmt_double(median_rank(sm)));
  emit_report(rows, cfg.report);
}

void cmd_eval_localize(const RunConfig& cfg) {
  require_seed(cfg);
  require_path(cfg.dataset, "dataset");
  require_path(cfg.checkpoint, "checkpoint");
  if (cfg.eval_samples < 0) throw ValidationError("eval_samples must be nonnegative");

  ModelParams params = load_checkpoint(cfg.checkpoint);
  Dataset val = read_dataset(val_path(cfg));
  check_dims(val.world, params.config, val_path(cfg));
  if (val.samples.empty()) throw ValidationError(val_path(cfg) + ": validation split is empty");

  size_t n = cfg.eval_samples > 0 ? std::min(size_t(cfg.eval_samples), val.samples.size())
                                  : val.samples.size();
  std::vector<VideoTextSample> subset(val.samples.begin(),
                                      val.samples.begin() + long(n));
  size_t clips = 0;
  for (const VideoTextSample& s : subset) clips += s.clips.size();

  double acc = localization_accuracy(subset, val.world, params);
  emit_report({{"samples", std::to_string(n)},
               {"clips", std::to_string(clips)},
               {"localization_accuracy", fmt_double(acc)},
               {"chance", fmt_double(1.0 / val.world.actions)}},
              cfg.report);
}

}  // namespace tangled
