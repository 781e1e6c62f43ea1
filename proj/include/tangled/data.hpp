#pragma once

#include "tangled/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tangled {

// Token id layout of the shared vocabulary: five reserved ids, then words.
enum SpecialToken : int {
  kClsToken = 0,
  kSepToken = 1,
  kMaskToken = 2,
  kActToken = 3,
  kRegionToken = 4,
};
inline constexpr int kNumSpecialTokens = 5;
inline constexpr int kFirstWordId = 5;

// Axis-aligned box in pixel coordinates of a frame_w x frame_h frame.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  int frame_w = 0, frame_h = 0;
  void validate() const;
};

struct Region {
  Vec feature;       // region_dim
  Box box;
  Vec teacher;       // soft distribution over object classes
  int object_class;  // generating class, recoverable as argmax(teacher)
};

struct Frame {
  std::vector<Region> regions;
};

struct Clip {
  Vec action_feature;  // action_dim
  int action_label = -1;
  std::vector<Frame> frames;
};

struct SampleText {
  std::vector<int> word_ids;              // vocabulary ids, all >= kFirstWordId
  std::vector<int> word_clip;             // clip each word describes
  std::vector<int> sentence_break_after;  // word positions followed by a sentence boundary
};

struct VideoTextSample {
  int64_t id = 0;
  SampleText text;
  std::vector<Clip> clips;
  int match_label = 1;  // 1 = text describes the clips
};

// Shape of the synthetic world; also the schema of a dataset file header.
struct WorldSpec {
  int actions = 8;
  int object_classes = 16;
  int vocab_words = 256;
  int action_dim = 12;
  int region_dim = 12;
  int clips_per_sample = 3;
  int frames_per_clip = 2;
  int regions_per_frame = 5;  // upper bound; actual counts vary per frame
  int words_per_clip = 4;
  int frame_px = 256;
  double noise_sigma = 0.1;
  int train_samples = 512;
  int val_samples = 128;
  uint64_t seed = 1;

  int vocab_size() const { return vocab_words + kNumSpecialTokens; }
  int filler_words() const { return vocab_words - actions - object_classes; }
  void validate() const;
};

struct Dataset {
  std::string split;  // "train" or "val"
  WorldSpec world;
  std::vector<VideoTextSample> samples;
};

void validate_sample(const VideoTextSample& s, const WorldSpec& w);

inline bool operator==(const Box& a, const Box& b) {
  return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2 &&
         a.frame_w == b.frame_w && a.frame_h == b.frame_h;
}

inline bool vec_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() && a == b;
}

inline bool operator==(const Region& a, const Region& b) {
  return vec_equal(a.feature, b.feature) && a.box == b.box && vec_equal(a.teacher, b.teacher) &&
         a.object_class == b.object_class;
}

inline bool operator==(const Frame& a, const Frame& b) { return a.regions == b.regions; }

inline bool operator==(const Clip& a, const Clip& b) {
  return vec_equal(a.action_feature, b.action_feature) && a.action_label == b.action_label &&
         a.frames == b.frames;
}

inline bool operator==(const SampleText& a, const SampleText& b) {
  return a.word_ids == b.word_ids && a.word_clip == b.word_clip &&
         a.sentence_break_after == b.sentence_break_after;
}

inline bool operator==(const VideoTextSample& a, const VideoTextSample& b) {
  return a.id == b.id && a.text == b.text && a.clips == b.clips &&
         a.match_label == b.match_label;
}

inline bool operator==(const WorldSpec& a, const WorldSpec& b) {
  return a.actions == b.actions && a.object_classes == b.object_classes &&
         a.vocab_words == b.vocab_words && a.action_dim == b.action_dim &&
         a.region_dim == b.region_dim && a.clips_per_sample == b.clips_per_sample &&
         a.frames_per_clip == b.frames_per_clip && a.regions_per_frame == b.regions_per_frame &&
         a.words_per_clip == b.words_per_clip && a.frame_px == b.frame_px &&
         a.noise_sigma == b.noise_sigma && a.train_samples == b.train_samples &&
         a.val_samples == b.val_samples && a.seed == b.seed;
}

inline bool operator==(const Dataset& a, const Dataset& b) {
  return a.split == b.split && a.world == b.world && a.samples == b.samples;
}

}  // namespace tangled
