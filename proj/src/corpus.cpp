#include "tangled/corpus.hpp"

#include "tangled/io.hpp"
#include "wire.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>

namespace tangled {

namespace {

constexpr char kMagic[] = "ABTD1\n";
constexpr uint64_t kStreamPrototypes = 0;
constexpr uint64_t kStreamSampleBase = 16;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void Box::validate() const {
  if (frame_w <= 0 || frame_h <= 0)
    throw ValidationError("box: frame size " + std::to_string(frame_w) + "x" +
                          std::to_string(frame_h) + " is not positive");
  if (!(x1 >= 0 && x1 < x2 && x2 <= frame_w && y1 >= 0 && y1 < y2 && y2 <= frame_h))
    throw ValidationError("box: corners (" + fmt_double(x1) + ", " + fmt_double(y1) + ", " +
                          fmt_double(x2) + ", " + fmt_double(y2) + ") are degenerate or outside " +
                          std::to_string(frame_w) + "x" + std::to_string(frame_h));
}

void WorldSpec::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ValidationError(std::string("world: ") + name + " must be positive");
  };
  positive(actions, "actions");
  positive(object_classes, "object_classes");
  positive(vocab_words, "vocab_words");
  positive(action_dim, "action_dim");
  positive(region_dim, "region_dim");
  positive(clips_per_sample, "clips_per_sample");
  positive(frames_per_clip, "frames_per_clip");
  positive(words_per_clip, "words_per_clip");
  if (regions_per_frame < 0)
    throw ValidationError("world: regions_per_frame must be nonnegative");
  if (frame_px < 2) throw ValidationError("world: frame_px must be at least 2");
  if (noise_sigma < 0) throw ValidationError("world: noise_sigma must be nonnegative");
  if (train_samples < 0 || val_samples < 0)
    throw ValidationError("world: sample counts must be nonnegative");
  if (filler_words() < 1)
    throw ValidationError("world: vocab_words (" + std::to_string(vocab_words) +
                          ") must exceed actions + object_classes (" +
                          std::to_string(actions + object_classes) + ")");
}

int verb_word_id(int action_label) { return kFirstWordId + action_label; }

int noun_word_id(const WorldSpec& w, int object_class) {
  return kFirstWordId + w.actions + object_class;
}

int filler_word_id(const WorldSpec& w, int k) {
  return kFirstWordId + w.actions + w.object_classes + k;
}

World World::from_spec(const WorldSpec& spec) {
  spec.validate();
  World w;
  w.spec = spec;
  Rng rng = Rng(spec.seed).substream(kStreamPrototypes);
  w.action_prototypes = Mat(spec.actions, spec.action_dim);
  for (int r = 0; r < spec.actions; ++r)
    for (int c = 0; c < spec.action_dim; ++c) w.action_prototypes(r, c) = rng.normal();
  w.object_prototypes = Mat(spec.object_classes, spec.region_dim);
  for (int r = 0; r < spec.object_classes; ++r)
    for (int c = 0; c < spec.region_dim; ++c) w.object_prototypes(r, c) = rng.normal();
  return w;
}

Vec teacher_distribution(const World& world, const Vec& region_feature) {
  if (region_feature.size() != world.spec.region_dim)
    throw DimensionError("teacher: feature has " + std::to_string(region_feature.size()) +
                         " dims, world expects " + std::to_string(world.spec.region_dim));
  int c = world.spec.object_classes;
  Vec logits(c);
  for (int j = 0; j < c; ++j) {
    double d2 = (region_feature - world.object_prototypes.row(j).transpose()).squaredNorm();
    logits(j) = -0.5 * d2;
  }
  double mx = logits.maxCoeff();
  Vec e = (logits.array() - mx).exp();
  return e / e.sum();
}

namespace {

Vec noisy_prototype(const Mat& prototypes, int row, double sigma, Rng& rng) {
  Vec f(prototypes.cols());
  for (Eigen::Index j = 0; j < prototypes.cols(); ++j)
    f(j) = prototypes(row, j) + sigma * rng.normal();
  return f;
}

VideoTextSample generate_sample(const World& world, int64_t id, Rng rng) {
  const WorldSpec& w = world.spec;
  VideoTextSample s;
  s.id = id;
  s.match_label = 1;
  for (int c = 0; c < w.clips_per_sample; ++c) {
    Clip clip;
    clip.action_label = int(rng.below(uint64_t(w.actions)));
    clip.action_feature =
        noisy_prototype(world.action_prototypes, clip.action_label, w.noise_sigma, rng);
    for (int f = 0; f < w.frames_per_clip; ++f) {
      Frame frame;
      int n_regions = w.regions_per_frame > 0
                          ? 1 + int(rng.below(uint64_t(w.regions_per_frame)))
                          : 0;
      for (int r = 0; r < n_regions; ++r) {
        Region region;
        region.object_class = int(rng.below(uint64_t(w.object_classes)));
        region.feature =
            noisy_prototype(world.object_prototypes, region.object_class, w.noise_sigma, rng);
        double x1 = double(rng.below(uint64_t(w.frame_px - 1)));
        double y1 = double(rng.below(uint64_t(w.frame_px - 1)));
        double x2 = x1 + 1.0 + double(rng.below(uint64_t(w.frame_px) - uint64_t(x1) - 1));
        double y2 = y1 + 1.0 + double(rng.below(uint64_t(w.frame_px) - uint64_t(y1) - 1));
        region.box = Box{x1, y1, x2, y2, w.frame_px, w.frame_px};
        region.teacher = teacher_distribution(world, region.feature);
        frame.regions.push_back(std::move(region));
      }
      clip.frames.push_back(std::move(frame));
    }
    s.clips.push_back(std::move(clip));
  }
  // text: per clip one verb word, then nouns for objects in order of first
  // appearance, padded with filler words
  for (int c = 0; c < w.clips_per_sample; ++c) {
    const Clip& clip = s.clips[size_t(c)];
    std::vector<int> words;
    words.push_back(verb_word_id(clip.action_label));
    std::vector<int> seen;
    for (const Frame& frame : clip.frames)
      for (const Region& region : frame.regions)
        if (std::find(seen.begin(), seen.end(), region.object_class) == seen.end())
          seen.push_back(region.object_class);
    for (int obj : seen) {
      if (int(words.size()) >= w.words_per_clip) break;
      words.push_back(noun_word_id(w, obj));
    }
    while (int(words.size()) < w.words_per_clip)
      words.push_back(filler_word_id(w, int(rng.below(uint64_t(w.filler_words())))));
    for (int word : words) {
      s.text.word_ids.push_back(word);
      s.text.word_clip.push_back(c);
    }
    if (c + 1 < w.clips_per_sample)
      s.text.sentence_break_after.push_back(int(s.text.word_ids.size()) - 1);
  }
  return s;
}

}  // namespace

GeneratedData generate(const WorldSpec& spec) {
  spec.validate();
  World world = World::from_spec(spec);
  GeneratedData out;
  out.train.split = "train";
  out.train.world = spec;
  out.val.split = "val";
  out.val.world = spec;
  Rng master(spec.seed);
  int64_t id = 0;
  for (int i = 0; i < spec.train_samples; ++i, ++id)
    out.train.samples.push_back(
        generate_sample(world, id, master.substream(kStreamSampleBase + uint64_t(id))));
  for (int i = 0; i < spec.val_samples; ++i, ++id)
    out.val.samples.push_back(
        generate_sample(world, id, master.substream(kStreamSampleBase + uint64_t(id))));
  return out;
}

void validate_sample(const VideoTextSample& s, const WorldSpec& w) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("sample " + std::to_string(s.id) + ": " + why);
  };
  size_t n_words = s.text.word_ids.size();
  if (n_words == 0) fail("no words");
  if (s.text.word_clip.size() != n_words) fail("word_clip size mismatch");
  for (int id : s.text.word_ids)
    if (id < kFirstWordId || id >= kFirstWordId + w.vocab_words)
      fail("word id " + std::to_string(id) + " out of range");
  if (s.clips.size() != size_t(w.clips_per_sample))
    fail("expected " + std::to_string(w.clips_per_sample) + " clips, found " +
         std::to_string(s.clips.size()));
  for (int c : s.text.word_clip)
    if (c < 0 || c >= int(s.clips.size())) fail("word aligned to missing clip");
  int prev = -1;
  for (int b : s.text.sentence_break_after) {
    if (b <= prev) fail("sentence breaks not strictly increasing");
    if (b < 0 || b >= int(n_words) - 1) fail("sentence break after word " + std::to_string(b));
    prev = b;
  }
  if (s.match_label != 0 && s.match_label != 1) fail("match label is not 0 or 1");
  for (const Clip& clip : s.clips) {
    if (clip.action_label < 0 || clip.action_label >= w.actions) fail("action label out of range");
    if (clip.action_feature.size() != w.action_dim) fail("action feature dim mismatch");
    if (clip.frames.size() != size_t(w.frames_per_clip)) fail("frame count mismatch");
    for (const Frame& frame : clip.frames) {
      if (int(frame.regions.size()) > w.regions_per_frame) fail("too many regions in a frame");
      for (const Region& r : frame.regions) {
        if (r.feature.size() != w.region_dim) fail("region feature dim mismatch");
        if (r.teacher.size() != w.object_classes) fail("teacher size mismatch");
        if (std::abs(r.teacher.sum() - 1.0) > 1e-9 || r.teacher.minCoeff() < 0)
          fail("teacher is not a distribution");
        if (r.object_class < 0 || r.object_class >= w.object_classes)
          fail("object class out of range");
        r.box.validate();
        if (r.box.frame_w != w.frame_px || r.box.frame_h != w.frame_px)
          fail("box frame size does not match world frame_px");
      }
    }
  }
}

namespace {

void serialize_sample(std::string& b, const VideoTextSample& s) {
  wire::put_i64(b, s.id);
  wire::put_u32(b, uint32_t(s.text.word_ids.size()));
  for (int v : s.text.word_ids) wire::put_i32(b, v);
  for (int v : s.text.word_clip) wire::put_i32(b, v);
  wire::put_u32(b, uint32_t(s.text.sentence_break_after.size()));
  for (int v : s.text.sentence_break_after) wire::put_i32(b, v);
  wire::put_i32(b, s.match_label);
  wire::put_u32(b, uint32_t(s.clips.size()));
  for (const Clip& clip : s.clips) {
    wire::put_i32(b, clip.action_label);
    wire::put_u32(b, uint32_t(clip.action_feature.size()));
    for (Eigen::Index i = 0; i < clip.action_feature.size(); ++i)
      wire::put_f64(b, clip.action_feature(i));
    wire::put_u32(b, uint32_t(clip.frames.size()));
    for (const Frame& frame : clip.frames) {
      wire::put_u32(b, uint32_t(frame.regions.size()));
      for (const Region& r : frame.regions) {
        wire::put_i32(b, r.object_class);
        wire::put_f64(b, r.box.x1);
        wire::put_f64(b, r.box.y1);
        wire::put_f64(b, r.box.x2);
        wire::put_f64(b, r.box.y2);
        wire::put_i32(b, r.box.frame_w);
        wire::put_i32(b, r.box.frame_h);
        wire::put_u32(b, uint32_t(r.feature.size()));
        for (Eigen::Index i = 0; i < r.feature.size(); ++i) wire::put_f64(b, r.feature(i));
        wire::put_u32(b, uint32_t(r.teacher.size()));
        for (Eigen::Index i = 0; i < r.teacher.size(); ++i) wire::put_f64(b, r.teacher(i));
      }
    }
  }
}

VideoTextSample parse_sample(wire::Cursor& cur) {
  VideoTextSample s;
  s.id = cur.get_i64();
  uint32_t n_words = cur.get_u32();
  s.text.word_ids.resize(n_words);
  for (auto& v : s.text.word_ids) v = cur.get_i32();
  s.text.word_clip.resize(n_words);
  for (auto& v : s.text.word_clip) v = cur.get_i32();
  uint32_t n_breaks = cur.get_u32();
  s.text.sentence_break_after.resize(n_breaks);
  for (auto& v : s.text.sentence_break_after) v = cur.get_i32();
  s.match_label = cur.get_i32();
  uint32_t n_clips = cur.get_u32();
  s.clips.resize(n_clips);
  for (Clip& clip : s.clips) {
    clip.action_label = cur.get_i32();
    uint32_t da = cur.get_u32();
    clip.action_feature.resize(da);
    for (uint32_t i = 0; i < da; ++i) clip.action_feature(i) = cur.get_f64();
    uint32_t n_frames = cur.get_u32();
    clip.frames.resize(n_frames);
    for (Frame& frame : clip.frames) {
      uint32_t n_regions = cur.get_u32();
      frame.regions.resize(n_regions);
      for (Region& r : frame.regions) {
        r.object_class = cur.get_i32();
        r.box.x1 = cur.get_f64();
        r.box.y1 = cur.get_f64();
        r.box.x2 = cur.get_f64();
        r.box.y2 = cur.get_f64();
        r.box.frame_w = cur.get_i32();
        r.box.frame_h = cur.get_i32();
        uint32_t dr = cur.get_u32();
        r.feature.resize(dr);
        for (uint32_t i = 0; i < dr; ++i) r.feature(i) = cur.get_f64();
        uint32_t nc = cur.get_u32();
        r.teacher.resize(nc);
        for (uint32_t i = 0; i < nc; ++i) r.teacher(i) = cur.get_f64();
      }
    }
  }
  return s;
}

std::string header_text(const Dataset& ds) {
  const WorldSpec& w = ds.world;
  std::string h;
  auto kv = [&h](const std::string& k, const std::string& v) { h += k + "=" + v + "\n"; };
  kv("split", ds.split);
  kv("samples", std::to_string(ds.samples.size()));
  kv("actions", std::to_string(w.actions));
  kv("object_classes", std::to_string(w.object_classes));
  kv("vocab_words", std::to_string(w.vocab_words));
  kv("action_dim", std::to_string(w.action_dim));
  kv("region_dim", std::to_string(w.region_dim));
  kv("clips_per_sample", std::to_string(w.clips_per_sample));
  kv("frames_per_clip", std::to_string(w.frames_per_clip));
  kv("regions_per_frame", std::to_string(w.regions_per_frame));
  kv("words_per_clip", std::to_string(w.words_per_clip));
  kv("frame_px", std::to_string(w.frame_px));
  kv("noise_sigma", fmt_double(w.noise_sigma));
  kv("train_samples", std::to_string(w.train_samples));
  kv("val_samples", std::to_string(w.val_samples));
  kv("seed", std::to_string(w.seed));
  h += "\n";
  return h;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  if (ds.split != "train" && ds.split != "val")
    throw ValidationError("dataset: split must be train or val, got " + ds.split);
  for (const VideoTextSample& s : ds.samples) validate_sample(s, ds.world);
  std::string bytes = kMagic + header_text(ds);
  for (const VideoTextSample& s : ds.samples) {
    std::string rec;
    serialize_sample(rec, s);
    wire::put_u64(bytes, rec.size());
    bytes += rec;
  }
  write_file_atomic(path, bytes);
}

Dataset read_dataset(const std::string& path) {
  std::string bytes = read_file(path);
  wire::Cursor cur(bytes, path);
  constexpr size_t kMagicLen = sizeof(kMagic) - 1;
  if (bytes.size() < kMagicLen || bytes.compare(0, kMagicLen, kMagic) != 0)
    throw ParseError(path + ": bad magic, not a dataset file");
  cur.take(kMagicLen);

  Dataset ds;
  size_t declared = 0;
  bool have_split = false, have_samples = false;
  for (;;) {
    std::string line = cur.get_line();
    if (line.empty()) break;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ": malformed header line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    WorldSpec& w = ds.world;
    try {
      if (key == "split") {
        ds.split = val;
        have_split = true;
      } else if (key == "samples") {
        declared = std::stoul(val);
        have_samples = true;
      } else if (key == "actions") {
        w.actions = std::stoi(val);
      } else if (key == "object_classes") {
        w.object_classes = std::stoi(val);
      } else if (key == "vocab_words") {
        w.vocab_words = std::stoi(val);
      } else if (key == "action_dim") {
        w.action_dim = std::stoi(val);
      } else if (key == "region_dim") {
        w.region_dim = std::stoi(val);
      } else if (key == "clips_per_sample") {
        w.clips_per_sample = std::stoi(val);
      } else if (key == "frames_per_clip") {
        w.frames_per_clip = std::stoi(val);
      } else if (key == "regions_per_frame") {
        w.regions_per_frame = std::stoi(val);
      } else if (key == "words_per_clip") {
        w.words_per_clip = std::stoi(val);
      } else if (key == "frame_px") {
        w.frame_px = std::stoi(val);
      } else if (key == "noise_sigma") {
        w.noise_sigma = std::stod(val);
      } else if (key == "train_samples") {
        w.train_samples = std::stoi(val);
      } else if (key == "val_samples") {
        w.val_samples = std::stoi(val);
      } else if (key == "seed") {
        w.seed = std::stoull(val);
      } else {
        throw ParseError(path + ": unknown header key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw ParseError(path + ": bad value for header key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw ParseError(path + ": bad value for header key '" + key + "'");
    }
  }
  if (!have_split || !have_samples)
    throw ParseError(path + ": header is missing split or samples");
  if (ds.split != "train" && ds.split != "val")
    throw ParseError(path + ": split '" + ds.split + "' is not train or val");
  ds.world.validate();

  for (size_t i = 0; i < declared; ++i) {
    uint64_t len = cur.get_u64();
    if (cur.remaining() < len)
      throw ParseError(path + ": truncated record " + std::to_string(i) + " (declared " +
                       std::to_string(len) + " bytes, " + std::to_string(cur.remaining()) +
                       " left)");
    size_t start = cur.pos();
    VideoTextSample s = parse_sample(cur);
    if (cur.pos() - start != len)
      throw ParseError(path + ": record " + std::to_string(i) + " length mismatch");
    validate_sample(s, ds.world);
    ds.samples.push_back(std::move(s));
  }
  if (!cur.at_end())
    throw ParseError(path + ": " + std::to_string(cur.remaining()) +
                     " trailing bytes after last record");
  return ds;
}

}  // namespace tangled
