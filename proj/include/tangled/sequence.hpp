#pragma once

#include "tangled/data.hpp"
#include "tangled/graph.hpp"

#include <vector>

namespace tangled {

enum class Modality { kSpecial, kText, kAction, kRegion };
enum class StreamId : int { kText = 0, kAction = 1, kRegion = 2 };

// One position of the unified token sequence. Prediction targets ride along
// so masking and the losses need no lookups back into the sample.
struct SeqPosition {
  int token_id = kSepToken;
  Modality modality = Modality::kSpecial;
  StreamId stream = StreamId::kText;
  int position_index = 0;
  int segment_index = 0;
  Vec visual_payload;  // action/region feature; zeroed when masked
  Vec spatial;         // 5-vector, regions only
  int word_id = -1;       // original word id, text positions
  int action_label = -1;  // action positions
  Vec teacher;            // region positions
  // source pointers back into the sample (-1 where not applicable)
  int src_word = -1;
  int src_clip = -1;
  int src_frame = -1;
  int src_region = -1;
};

struct InputSequence {
  std::vector<SeqPosition> positions;
  // sequence indices owned by each stream, in sequence order; the text list
  // always starts with position 0 ([CLS])
  std::vector<int> text_rows;
  std::vector<int> action_rows;
  std::vector<int> region_rows;

  int size() const { return int(positions.size()); }
};

// (x1/W, y1/H, x2/W, y2/H, area/(W*H))
Vec spatial_position_vector(const Box& box);

// Unified layout: {[CLS], words with inter-sentence [SEP]s, [SEP], actions,
// [SEP], regions with [SEP] between clips' region runs, [SEP]}.
InputSequence build_sequence(const VideoTextSample& sample);

struct EmbeddingTables;

// Sum of position, segment, token, and visual embeddings per position.
Var embed_sequence(Tape& tape, const InputSequence& seq, EmbeddingTables& tables);

}  // namespace tangled
