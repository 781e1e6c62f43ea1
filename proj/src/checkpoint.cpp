#include "tangled/checkpoint.hpp"

#include "tangled/io.hpp"
#include "wire.hpp"

#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>

namespace tangled {

namespace {

constexpr char kMagic[] = "ABTC1\n";

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string config_text(const ModelConfig& c) {
  std::string h;
  auto kv = [&h](const std::string& k, const std::string& v) { h += k + "=" + v + "\n"; };
  kv("num_layers", std::to_string(c.num_layers));
  kv("hidden", std::to_string(c.hidden));
  kv("heads", std::to_string(c.heads));
  kv("ff_hidden", std::to_string(c.ff_hidden));
  kv("vocab_words", std::to_string(c.vocab_words));
  kv("num_actions", std::to_string(c.num_actions));
  kv("num_object_classes", std::to_string(c.num_object_classes));
  kv("max_positions", std::to_string(c.max_positions));
  kv("max_segments", std::to_string(c.max_segments));
  kv("action_dim", std::to_string(c.action_dim));
  kv("region_dim", std::to_string(c.region_dim));
  kv("mask_rate", fmt_double(c.mask_rate));
  kv("cross_stacking", c.cross_stacking ? "1" : "0");
  h += "\n";
  return h;
}

ModelConfig parse_config(wire::Cursor& cur, const std::string& path) {
  ModelConfig c;
  int seen = 0;
  while (true) {
    std::string line = cur.get_line();
    if (line.empty()) break;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ": malformed config line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    try {
      if (key == "num_layers") {
        c.num_layers = std::stoi(val);
      } else if (key == "hidden") {
        c.hidden = std::stoi(val);
      } else if (key == "heads") {
        c.heads = std::stoi(val);
      } else if (key == "ff_hidden") {
        c.ff_hidden = std::stoi(val);
      } else if (key == "vocab_words") {
        c.vocab_words = std::stoi(val);
      } else if (key == "num_actions") {
        c.num_actions = std::stoi(val);
      } else if (key == "num_object_classes") {
        c.num_object_classes = std::stoi(val);
      } else if (key == "max_positions") {
        c.max_positions = std::stoi(val);
      } else if (key == "max_segments") {
        c.max_segments = std::stoi(val);
      } else if (key == "action_dim") {
        c.action_dim = std::stoi(val);
      } else if (key == "region_dim") {
        c.region_dim = std::stoi(val);
      } else if (key == "mask_rate") {
        c.mask_rate = std::stod(val);
      } else if (key == "cross_stacking") {
        c.cross_stacking = std::stoi(val) != 0;
      } else {
        throw ParseError(path + ": unknown config key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ParseError(path + ": bad value for config key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw ParseError(path + ": bad value for config key '" + key + "'");
    }
    ++seen;
  }
  if (seen != 13) throw ParseError(path + ": config block has " + std::to_string(seen) +
                                   " keys, expected 13");
  return c;
}

}  // namespace

void save_checkpoint(ModelParams& params, const std::string& path) {
  std::string bytes = kMagic + config_text(params.config);
  std::vector<NamedParam> named = params.named_params();
  wire::put_u32(bytes, uint32_t(named.size()));
  for (const NamedParam& np : named) {
    const Mat& m = np.param->value;
    wire::put_u32(bytes, uint32_t(np.name.size()));
    bytes += np.name;
    wire::put_u64(bytes, uint64_t(m.rows()));
    wire::put_u64(bytes, uint64_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) wire::put_f64(bytes, m(i, j));
  }
  write_file_atomic(path, bytes);
}

ModelParams load_checkpoint(const std::string& path) {
  std::string bytes = read_file(path);
  wire::Cursor cur(bytes, path);
  constexpr size_t kMagicLen = sizeof(kMagic) - 1;
  if (bytes.size() < kMagicLen || bytes.compare(0, kMagicLen, kMagic) != 0)
    throw ParseError(path + ": bad magic, not a checkpoint file");
  cur.take(kMagicLen);

  ModelConfig cfg = parse_config(cur, path);
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ParseError(path + ": stored config is invalid: " + std::string(e.what()));
  }
  Rng scratch(0);
  ModelParams params = ModelParams::init(cfg, scratch);

  std::map<std::string, Parameter*> by_name;
  for (const NamedParam& np : params.named_params()) by_name[np.name] = np.param;

  uint32_t count = cur.get_u32();
  if (count != by_name.size())
    throw ParseError(path + ": holds " + std::to_string(count) + " parameters, config needs " +
                     std::to_string(by_name.size()));
  std::map<std::string, bool> seen;
  for (uint32_t k = 0; k < count; ++k) {
    uint32_t name_len = cur.get_u32();
    std::string name(cur.take(name_len), name_len);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError(path + ": unknown parameter '" + name + "'");
    if (seen[name]) throw ParseError(path + ": duplicate parameter '" + name + "'");
    seen[name] = true;
    uint64_t rows = cur.get_u64();
    uint64_t cols = cur.get_u64();
    Mat& m = it->second->value;
    if (rows != uint64_t(m.rows()) || cols != uint64_t(m.cols()))
      throw ParseError(path + ": parameter '" + name + "' is " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", config needs " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = cur.get_f64();
  }
  if (!cur.at_end())
    throw ParseError(path + ": " + std::to_string(cur.remaining()) + " trailing bytes");
  return params;
}

}  // namespace tangled
