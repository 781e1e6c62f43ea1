#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tangled/corpus.hpp"
#include "tangled/graph.hpp"
#include "tangled/io.hpp"
#include "tangled/optim.hpp"

#include <cstdio>
#include <filesystem>
#include <set>

using namespace tangled;
namespace fs = std::filesystem;

namespace {

const GeneratedData& default_data() {
  static GeneratedData data = generate(WorldSpec{});
  return data;
}

WorldSpec tiny_spec() {
  WorldSpec w;
  w.actions = 2;
  w.object_classes = 2;
  w.vocab_words = 8;
  w.action_dim = 3;
  w.region_dim = 3;
  w.clips_per_sample = 1;
  w.frames_per_clip = 1;
  w.regions_per_frame = 1;
  w.words_per_clip = 2;
  w.frame_px = 16;
  w.train_samples = 1;
  w.val_samples = 1;
  w.seed = 7;
  return w;
}

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("tangled_corpus_" + name)).string();
}

std::string to_hex(const std::string& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xf]);
  }
  return out;
}

// full file bytes for tiny_spec()'s train split, frozen
const std::string kGoldenHex =
    "41425444310a73706c69743d747261696e0a73616d706c65733d310a616374696f6e733d320a6f626a6563745f636c61"
    "737365733d320a766f6361625f776f7264733d380a616374696f6e5f64696d3d330a726567696f6e5f64696d3d330a63"
    "6c6970735f7065725f73616d706c653d310a6672616d65735f7065725f636c69703d310a726567696f6e735f7065725f"
    "6672616d653d310a776f7264735f7065725f636c69703d320a6672616d655f70783d31360a6e6f6973655f7369676d61"
    "3d302e31303030303030303030303030303030310a747261696e5f73616d706c65733d310a76616c5f73616d706c6573"
    "3d310a736565643d370a0aac000000000000000000000000000000020000000500000008000000000000000000000000"
    "00000001000000010000000000000003000000daccfccf0791e6bf789b9d035c61e9bfb4e3cd85b375e03f0100000001"
    "000000010000000000000000002c400000000000002a400000000000002e400000000000002c40100000001000000003"
    "0000003861dd0c8d08f73f2586926859d8d63f641244c89066ebbf020000009f5c050dca95d93fb0517df91a35e33f";

}  // namespace

TEST_CASE("world: word id layout") {
  WorldSpec w;
  CHECK(verb_word_id(0) == kFirstWordId);
  CHECK(verb_word_id(3) == kFirstWordId + 3);
  CHECK(noun_word_id(w, 0) == kFirstWordId + w.actions);
  CHECK(filler_word_id(w, 0) == kFirstWordId + w.actions + w.object_classes);
  CHECK(filler_word_id(w, w.filler_words() - 1) == kFirstWordId + w.vocab_words - 1);
}

TEST_CASE("world: validation rejects impossible shapes") {
  WorldSpec w;
  w.vocab_words = w.actions + w.object_classes;
  CHECK_THROWS_AS(w.validate(), ValidationError);
  w = WorldSpec{};
  w.clips_per_sample = 0;
  CHECK_THROWS_AS(w.validate(), ValidationError);
  w = WorldSpec{};
  w.noise_sigma = -0.1;
  CHECK_THROWS_AS(w.validate(), ValidationError);
}

TEST_CASE("generate: deterministic in the seed") {
  WorldSpec w = tiny_spec();
  w.train_samples = 6;
  w.val_samples = 3;
  GeneratedData a = generate(w);
  GeneratedData b = generate(w);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);

  w.seed = 8;
  GeneratedData c = generate(w);
  CHECK_FALSE(a.train == c.train);
}

TEST_CASE("generate: split tags and disjoint sequential ids") {
  const GeneratedData& d = default_data();
  CHECK(d.train.split == "train");
  CHECK(d.val.split == "val");
  CHECK(d.train.samples.size() == 512);
  CHECK(d.val.samples.size() == 128);
  std::set<int64_t> ids;
  for (const auto& s : d.train.samples) ids.insert(s.id);
  for (const auto& s : d.val.samples) ids.insert(s.id);
  CHECK(ids.size() == 640);
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == 639);
}

TEST_CASE("generate: samples satisfy the dataset contract") {
  const GeneratedData& d = default_data();
  for (const auto& s : d.train.samples) validate_sample(s, d.train.world);
  for (const auto& s : d.val.samples) validate_sample(s, d.val.world);
}

TEST_CASE("generate: text structure follows the clips") {
  const GeneratedData& d = default_data();
  const WorldSpec& w = d.train.world;
  for (const auto& s : d.train.samples) {
    REQUIRE(int(s.text.word_ids.size()) == w.clips_per_sample * w.words_per_clip);
    for (int c = 0; c < w.clips_per_sample; ++c) {
      int first = c * w.words_per_clip;
      CHECK(s.text.word_ids[size_t(first)] == verb_word_id(s.clips[size_t(c)].action_label));
      for (int k = 0; k < w.words_per_clip; ++k) CHECK(s.text.word_clip[size_t(first + k)] == c);
    }
    REQUIRE(int(s.text.sentence_break_after.size()) == w.clips_per_sample - 1);
    for (int c = 0; c + 1 < w.clips_per_sample; ++c)
      CHECK(s.text.sentence_break_after[size_t(c)] == (c + 1) * w.words_per_clip - 1);
  }
}

TEST_CASE("generate: zero noise collapses features onto prototypes") {
  WorldSpec w = tiny_spec();
  w.noise_sigma = 0.0;
  w.train_samples = 20;
  w.val_samples = 0;
  GeneratedData d = generate(w);
  World world = World::from_spec(w);
  for (const auto& s : d.train.samples) {
    for (const auto& clip : s.clips) {
      Vec proto = world.action_prototypes.row(clip.action_label).transpose();
      CHECK(vec_equal(clip.action_feature, proto));
    }
  }
}

TEST_CASE("teacher: near one-hot at default noise over 10k regions") {
  const GeneratedData& d = default_data();
  long total = 0, argmax_hits = 0;
  double peak_sum = 0.0;
  auto scan = [&](const Dataset& ds) {
    for (const auto& s : ds.samples)
      for (const auto& clip : s.clips)
        for (const auto& frame : clip.frames)
          for (const auto& r : frame.regions) {
            Eigen::Index am;
            double peak = r.teacher.maxCoeff(&am);
            total += 1;
            argmax_hits += (int(am) == r.object_class) ? 1 : 0;
            peak_sum += peak;
          }
  };
  scan(d.train);
  scan(d.val);
  CHECK(total >= 10000);
  CHECK(double(argmax_hits) / double(total) >= 0.99);
  CHECK(peak_sum / double(total) >= 0.9);
}

TEST_CASE("teacher: matches the definition on a hand case") {
  WorldSpec w = tiny_spec();
  World world = World::from_spec(w);
  Vec f = world.object_prototypes.row(0).transpose();
  Vec t = teacher_distribution(world, f);
  double d2 = (world.object_prototypes.row(1) - world.object_prototypes.row(0)).squaredNorm();
  double expected0 = 1.0 / (1.0 + std::exp(-0.5 * d2));
  CHECK(t(0) == doctest::Approx(expected0).epsilon(1e-12));
  CHECK(std::abs(t.sum() - 1.0) < 1e-12);
  CHECK_THROWS_AS(teacher_distribution(world, Vec::Zero(5)), DimensionError);
}

TEST_CASE("probe: logistic regression on action features separates actions") {
  WorldSpec w;
  w.train_samples = 128;
  w.val_samples = 64;
  w.clips_per_sample = 2;
  GeneratedData d = generate(w);

  auto collect = [&](const Dataset& ds, Mat& x, std::vector<int>& y) {
    std::vector<Vec> feats;
    for (const auto& s : ds.samples)
      for (const auto& clip : s.clips) {
        feats.push_back(clip.action_feature);
        y.push_back(clip.action_label);
      }
    x = Mat(Eigen::Index(feats.size()), w.action_dim);
    for (size_t i = 0; i < feats.size(); ++i) x.row(Eigen::Index(i)) = feats[i].transpose();
  };
  Mat xtr, xva;
  std::vector<int> ytr, yva;
  collect(d.train, xtr, ytr);
  collect(d.val, xva, yva);

  Rng rng(99);
  Parameter W = Parameter::randn(w.action_dim, w.actions, 0.02, rng);
  Parameter b = Parameter::zeros(1, w.actions);
  std::vector<NamedParam> params{{"W", &W}, {"b", &b}};
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int step = 0; step < 300; ++step) {
    Tape t(true);
    Var logits = add_rowvec(matmul(t.constant(xtr), t.leaf(W)), t.leaf(b));
    compute_gradients(cross_entropy(logits, ytr), params);
    adam_step(params, cfg);
  }
  Mat logits = xva * W.value;
  logits.rowwise() += b.value.row(0);
  long hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index am;
    logits.row(r).maxCoeff(&am);
    hits += (int(am) == yva[size_t(r)]) ? 1 : 0;
  }
  CHECK(double(hits) / double(logits.rows()) > 0.95);
}

TEST_CASE("dataset io: round trip preserves everything") {
  WorldSpec w = tiny_spec();
  w.train_samples = 5;
  w.val_samples = 2;
  GeneratedData d = generate(w);
  std::string path = temp_path("roundtrip.abtd");
  write_dataset(d.train, path);
  Dataset back = read_dataset(path);
  CHECK(back == d.train);
  std::remove(path.c_str());
}

TEST_CASE("dataset io: same dataset writes identical bytes") {
  WorldSpec w = tiny_spec();
  w.train_samples = 4;
  GeneratedData d = generate(w);
  std::string p1 = temp_path("bytes1.abtd");
  std::string p2 = temp_path("bytes2.abtd");
  write_dataset(d.train, p1);
  write_dataset(d.train, p2);
  CHECK(read_file(p1) == read_file(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("dataset io: empty split round trips") {
  WorldSpec w = tiny_spec();
  w.train_samples = 0;
  w.val_samples = 0;
  GeneratedData d = generate(w);
  std::string path = temp_path("empty.abtd");
  write_dataset(d.train, path);
  Dataset back = read_dataset(path);
  CHECK(back.samples.empty());
  CHECK(back.world == w);
  std::remove(path.c_str());
}

TEST_CASE("dataset io: truncation and corruption are detected") {
  WorldSpec w = tiny_spec();
  w.train_samples = 3;
  GeneratedData d = generate(w);
  std::string path = temp_path("broken.abtd");
  write_dataset(d.train, path);
  std::string bytes = read_file(path);

  write_file_atomic(path, bytes.substr(0, bytes.size() - 10));
  CHECK_THROWS_AS(read_dataset(path), ParseError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  write_file_atomic(path, bad_magic);
  CHECK_THROWS_AS(read_dataset(path), ParseError);

  write_file_atomic(path, bytes + "zz");
  CHECK_THROWS_AS(read_dataset(path), ParseError);

  std::string bad_key = bytes;
  size_t pos = bad_key.find("actions=");
  bad_key.replace(pos, 7, "actoins");
  write_file_atomic(path, bad_key);
  CHECK_THROWS_AS(read_dataset(path), ParseError);

  std::remove(path.c_str());
  CHECK_THROWS_AS(read_dataset(path), IoError);
}

TEST_CASE("dataset io: golden bytes for a pinned tiny world") {
  GeneratedData d = generate(tiny_spec());
  std::string path = temp_path("golden.abtd");
  write_dataset(d.train, path);
  std::string hex = to_hex(read_file(path));
  std::remove(path.c_str());
  CHECK(hex == kGoldenHex);
}
