#pragma once

#include "tangled/data.hpp"
#include "tangled/model.hpp"
#include "tangled/objectives.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tangled {

// Every knob of the tool in one flat struct: corpus shape, model shape,
// training schedule, evaluation sizes, and file paths. Dimensions shared by
// the corpus and the model (vocabulary, actions, object classes, feature
// widths) appear exactly once.
struct RunConfig {
  // corpus
  int actions = 8;
  int object_classes = 16;
  int vocab_words = 256;
  int action_dim = 12;
  int region_dim = 12;
  int clips_per_sample = 3;
  int frames_per_clip = 2;
  int regions_per_frame = 5;
  int words_per_clip = 4;
  int frame_px = 256;
  double noise_sigma = 0.1;
  int train_samples = 512;
  int val_samples = 128;

  // model
  int num_layers = 4;
  int hidden = 64;
  int heads = 4;
  int ff_hidden = 0;  // 0 means 4 * hidden
  int max_positions = 128;
  int max_segments = 8;
  double mask_rate = 0.15;
  bool cross_stacking = true;

  // training
  int steps = 1000;
  int batch_size = 8;
  double lr = 1e-3;
  double w_mlm = 1.0;
  double w_action = 1.0;
  double w_object = 1.0;
  double w_match = 1.0;

  // evaluation
  int gallery = 100;
  int eval_samples = 0;  // 0 means the whole split

  // paths
  std::string dataset;   // prefix; files are <dataset>.train.abtd / <dataset>.val.abtd
  std::string checkpoint;
  std::string report;
  std::string loss_log;  // empty means <checkpoint>.losses.tsv

  // every command needs an explicit seed, from the file or from --seed
  uint64_t seed = 0;
  bool has_seed = false;

  WorldSpec world_spec() const;
  ModelConfig model_config() const;
  TaskWeights task_weights() const;
};

// One settable/printable field of RunConfig; the same table drives the config
// file parser and the per-field CLI flags.
struct ConfigField {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;  // ParseError on bad value
};

const std::vector<ConfigField>& config_fields();

// Flat key-value text: one "key=value" per line, '#' comments, blank lines
// ignored, whitespace around keys and values trimmed. Unknown keys raise
// ParseError naming the key.
RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Every field as "key=value" lines; parses back to an identical config.
std::string format_run_config(const RunConfig& cfg);

}  // namespace tangled
