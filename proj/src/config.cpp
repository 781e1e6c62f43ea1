#include "tangled/config.hpp"

#include "tangled/io.hpp"

#include <cstdint>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace tangled {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& name, const std::string& v) {
  throw ParseError("bad value for '" + name + "': '" + v + "'");
}

int parse_int(const std::string& name, const std::string& v) {
  try {
    size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size() || x < INT32_MIN || x > INT32_MAX) bad_value(name, v);
    return int(x);
  } catch (const std::invalid_argument&) {
    bad_value(name, v);
  } catch (const std::out_of_range&) {
    bad_value(name, v);
  }
}

double parse_double(const std::string& name, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) bad_value(name, v);
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(name, v);
  } catch (const std::out_of_range&) {
    bad_value(name, v);
  }
}

uint64_t parse_u64(const std::string& name, const std::string& v) {
  try {
    if (!v.empty() && v[0] == '-') bad_value(name, v);
    size_t pos = 0;
    uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) bad_value(name, v);
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(name, v);
  } catch (const std::out_of_range&) {
    bad_value(name, v);
  }
}

bool parse_bool(const std::string& name, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  bad_value(name, v);
}

std::vector<ConfigField> build_fields() {
  std::vector<ConfigField> f;
  auto add_int = [&f](const std::string& name, int RunConfig::*mem, const std::string& help) {
    f.push_back({name, help, [mem](const RunConfig& c) { return std::to_string(c.*mem); },
                 [mem, name](RunConfig& c, const std::string& v) { c.*mem = parse_int(name, v); }});
  };
  auto add_double = [&f](const std::string& name, double RunConfig::*mem,
                         const std::string& help) {
    f.push_back({name, help, [mem](const RunConfig& c) { return fmt_double(c.*mem); },
                 [mem, name](RunConfig& c, const std::string& v) {
                   c.*mem = parse_double(name, v);
                 }});
  };
  auto add_bool = [&f](const std::string& name, bool RunConfig::*mem, const std::string& help) {
    f.push_back({name, help, [mem](const RunConfig& c) { return c.*mem ? "1" : "0"; },
                 [mem, name](RunConfig& c, const std::string& v) {
                   c.*mem = parse_bool(name, v);
                 }});
  };
  auto add_string = [&f](const std::string& name, std::string RunConfig::*mem,
                         const std::string& help) {
    f.push_back({name, help, [mem](const RunConfig& c) { return c.*mem; },
                 [mem](RunConfig& c, const std::string& v) { c.*mem = v; }});
  };

  add_int("actions", &RunConfig::actions, "distinct action labels");
  add_int("object_classes", &RunConfig::object_classes, "distinct region object classes");
  add_int("vocab_words", &RunConfig::vocab_words, "word vocabulary size (specials excluded)");
  add_int("action_dim", &RunConfig::action_dim, "action feature width");
  add_int("region_dim", &RunConfig::region_dim, "region feature width");
  add_int("clips_per_sample", &RunConfig::clips_per_sample, "clips in every sample");
  add_int("frames_per_clip", &RunConfig::frames_per_clip, "frames in every clip");
  add_int("regions_per_frame", &RunConfig::regions_per_frame, "max regions per frame");
  add_int("words_per_clip", &RunConfig::words_per_clip, "words in every sentence");
  add_int("frame_px", &RunConfig::frame_px, "frame width and height in pixels");
  add_double("noise_sigma", &RunConfig::noise_sigma, "feature noise around prototypes");
  add_int("train_samples", &RunConfig::train_samples, "training split size");
  add_int("val_samples", &RunConfig::val_samples, "validation split size");

  add_int("num_layers", &RunConfig::num_layers, "stacked blocks");
  add_int("hidden", &RunConfig::hidden, "model width");
  add_int("heads", &RunConfig::heads, "attention heads");
  add_int("ff_hidden", &RunConfig::ff_hidden, "feed-forward width, 0 = 4x hidden");
  add_int("max_positions", &RunConfig::max_positions, "position table rows");
  add_int("max_segments", &RunConfig::max_segments, "segment table rows");
  add_double("mask_rate", &RunConfig::mask_rate, "per-position masking probability");
  add_bool("cross_stacking", &RunConfig::cross_stacking,
           "exchange key/values between streams (0 = independent streams)");

  add_int("steps", &RunConfig::steps, "optimizer steps");
  add_int("batch_size", &RunConfig::batch_size, "samples per step");
  add_double("lr", &RunConfig::lr, "Adam learning rate");
  add_double("w_mlm", &RunConfig::w_mlm, "masked word loss weight");
  add_double("w_action", &RunConfig::w_action, "masked action loss weight");
  add_double("w_object", &RunConfig::w_object, "masked region loss weight");
  add_double("w_match", &RunConfig::w_match, "text-video matching loss weight");

  add_int("gallery", &RunConfig::gallery, "retrieval gallery size");
  add_int("eval_samples", &RunConfig::eval_samples, "validation samples to score, 0 = all");

  add_string("dataset", &RunConfig::dataset, "dataset path prefix");
  add_string("checkpoint", &RunConfig::checkpoint, "checkpoint path");
  add_string("report", &RunConfig::report, "metrics report path (stdout too)");
  add_string("loss_log", &RunConfig::loss_log, "loss log path, default <checkpoint>.losses.tsv");

  f.push_back({"seed", "master random seed (required)",
               [](const RunConfig& c) { return std::to_string(c.seed); },
               [](RunConfig& c, const std::string& v) {
                 c.seed = parse_u64("seed", v);
                 c.has_seed = true;
               }});
  return f;
}

const std::map<std::string, size_t>& field_index() {
  static const std::map<std::string, size_t> idx = [] {
    std::map<std::string, size_t> m;
    const std::vector<ConfigField>& f = config_fields();
    for (size_t i = 0; i < f.size(); ++i) m[f[i].name] = i;
    return m;
  }();
  return idx;
}

}  // namespace

WorldSpec RunConfig::world_spec() const {
  WorldSpec w;
  w.actions = actions;
  w.object_classes = object_classes;
  w.vocab_words = vocab_words;
  w.action_dim = action_dim;
  w.region_dim = region_dim;
  w.clips_per_sample = clips_per_sample;
  w.frames_per_clip = frames_per_clip;
  w.regions_per_frame = regions_per_frame;
  w.words_per_clip = words_per_clip;
  w.frame_px = frame_px;
  w.noise_sigma = noise_sigma;
  w.train_samples = train_samples;
  w.val_samples = val_samples;
  w.seed = seed;
  return w;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.num_layers = num_layers;
  m.hidden = hidden;
  m.heads = heads;
  m.ff_hidden = ff_hidden;
  m.vocab_words = vocab_words;
  m.num_actions = actions;
  m.num_object_classes = object_classes;
  m.max_positions = max_positions;
  m.max_segments = max_segments;
  m.action_dim = action_dim;
  m.region_dim = region_dim;
  m.mask_rate = mask_rate;
  m.cross_stacking = cross_stacking;
  return m;
}

TaskWeights RunConfig::task_weights() const { return {w_mlm, w_action, w_object, w_match}; }

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = build_fields();
  return fields;
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  size_t start = 0;
  int lineno = 0;
  while (start <= text.size()) {
    size_t nl = text.find('\n', start);
    std::string raw = text.substr(start, nl == std::string::npos ? nl : nl - start);
    start = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" +
                       line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    auto it = field_index().find(key);
    if (it == field_index().end())
      throw ParseError(origin + ":" + std::to_string(lineno) + ": unknown config key '" + key +
                       "'");
    config_fields()[it->second].set(cfg, val);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path), path);
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto it = field_index().find(key);
  if (it == field_index().end()) throw ParseError("unknown config key '" + key + "'");
  config_fields()[it->second].set(cfg, value);
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const ConfigField& f : config_fields()) out += f.name + "=" + f.get(cfg) + "\n";
  return out;
}

}  // namespace tangled
