#pragma once

#include "tangled/data.hpp"
#include "tangled/rng.hpp"

#include <string>

namespace tangled {

// Word-id conventions of the synthetic language: one verb word per action,
// one noun word per object class, the rest of the vocabulary is filler.
int verb_word_id(int action_label);
int noun_word_id(const WorldSpec& w, int object_class);
int filler_word_id(const WorldSpec& w, int k);

// Prototype vectors the generator perturbs with gaussian noise.
struct World {
  WorldSpec spec;
  Mat action_prototypes;  // actions x action_dim
  Mat object_prototypes;  // object_classes x region_dim

  static World from_spec(const WorldSpec& spec);
};

// softmax over -||f - prototype_j||^2 / 2; near one-hot at small noise
Vec teacher_distribution(const World& world, const Vec& region_feature);

struct GeneratedData {
  Dataset train;
  Dataset val;
};

// Deterministic in spec.seed; sample ids are disjoint across splits.
GeneratedData generate(const WorldSpec& spec);

// Binary dataset file ("ABTD1"): text header, then length-prefixed
// little-endian records. Writes are atomic (temp file + rename).
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace tangled
