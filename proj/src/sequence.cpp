#include "tangled/sequence.hpp"

#include "tangled/model.hpp"

#include <algorithm>

namespace tangled {

Vec spatial_position_vector(const Box& box) {
  box.validate();
  double w = double(box.frame_w);
  double h = double(box.frame_h);
  Vec v(5);
  v << box.x1 / w, box.y1 / h, box.x2 / w, box.y2 / h,
      (box.x2 - box.x1) * (box.y2 - box.y1) / (w * h);
  return v;
}

InputSequence build_sequence(const VideoTextSample& sample) {
  if (sample.text.word_ids.empty()) throw ValidationError("build_sequence: sample has no words");
  if (sample.clips.empty()) throw ValidationError("build_sequence: sample has no clips");
  if (sample.text.word_clip.size() != sample.text.word_ids.size())
    throw ValidationError("build_sequence: word_clip size mismatch");

  InputSequence seq;
  int next_pos = 0;
  auto push = [&seq](SeqPosition p) {
    int idx = int(seq.positions.size());
    switch (p.stream) {
      case StreamId::kText: seq.text_rows.push_back(idx); break;
      case StreamId::kAction: seq.action_rows.push_back(idx); break;
      case StreamId::kRegion: seq.region_rows.push_back(idx); break;
    }
    seq.positions.push_back(std::move(p));
  };
  auto special = [&](StreamId stream, int segment) {
    SeqPosition p;
    p.token_id = kSepToken;
    p.modality = Modality::kSpecial;
    p.stream = stream;
    p.position_index = next_pos++;
    p.segment_index = segment;
    return p;
  };

  {
    SeqPosition cls;
    cls.token_id = kClsToken;
    cls.modality = Modality::kSpecial;
    cls.stream = StreamId::kText;
    cls.position_index = next_pos++;
    cls.segment_index = 0;
    push(std::move(cls));
  }

  const auto& breaks = sample.text.sentence_break_after;
  for (size_t i = 0; i < sample.text.word_ids.size(); ++i) {
    SeqPosition p;
    p.token_id = sample.text.word_ids[i];
    p.modality = Modality::kText;
    p.stream = StreamId::kText;
    p.position_index = next_pos++;
    p.segment_index = sample.text.word_clip[i];
    p.word_id = sample.text.word_ids[i];
    p.src_word = int(i);
    push(std::move(p));
    if (std::find(breaks.begin(), breaks.end(), int(i)) != breaks.end())
      push(special(StreamId::kText, sample.text.word_clip[i]));
  }
  push(special(StreamId::kText, 0));

  for (size_t c = 0; c < sample.clips.size(); ++c) {
    SeqPosition p;
    p.token_id = kActToken;
    p.modality = Modality::kAction;
    p.stream = StreamId::kAction;
    p.position_index = next_pos++;
    p.segment_index = int(c);
    p.visual_payload = sample.clips[c].action_feature;
    p.action_label = sample.clips[c].action_label;
    p.src_clip = int(c);
    push(std::move(p));
  }
  push(special(StreamId::kAction, 0));

  for (size_t c = 0; c < sample.clips.size(); ++c) {
    if (c > 0) push(special(StreamId::kRegion, int(c)));
    const Clip& clip = sample.clips[c];
    for (size_t f = 0; f < clip.frames.size(); ++f) {
      const Frame& frame = clip.frames[f];
      if (frame.regions.empty()) continue;
      int frame_pos = next_pos++;  // all regions of this frame share it
      for (size_t r = 0; r < frame.regions.size(); ++r) {
        const Region& region = frame.regions[r];
        SeqPosition p;
        p.token_id = kRegionToken;
        p.modality = Modality::kRegion;
        p.stream = StreamId::kRegion;
        p.position_index = frame_pos;
        p.segment_index = int(c);
        p.visual_payload = region.feature;
        p.spatial = spatial_position_vector(region.box);
        p.teacher = region.teacher;
        p.src_clip = int(c);
        p.src_frame = int(f);
        p.src_region = int(r);
        push(std::move(p));
      }
    }
  }
  push(special(StreamId::kRegion, 0));
  return seq;
}

Var embed_sequence(Tape& tape, const InputSequence& seq, EmbeddingTables& tables) {
  const int T = seq.size();
  if (T == 0) throw ValidationError("embed_sequence: empty sequence");
  const Eigen::Index max_positions = tables.position.value.rows();
  const Eigen::Index max_segments = tables.segment.value.rows();
  const Eigen::Index vocab = tables.token.value.rows();

  const size_t n = size_t(T);
  std::vector<int> token_ids(n), pos_idx(n), seg_idx(n);
  std::vector<int> action_rows, region_rows;
  for (int i = 0; i < T; ++i) {
    const SeqPosition& p = seq.positions[size_t(i)];
    if (p.position_index >= max_positions)
      throw CapacityError("embed_sequence: position index " + std::to_string(p.position_index) +
                          " exceeds table size " + std::to_string(max_positions));
    if (p.segment_index >= max_segments)
      throw CapacityError("embed_sequence: segment index " + std::to_string(p.segment_index) +
                          " exceeds table size " + std::to_string(max_segments));
    if (p.token_id < 0 || p.token_id >= vocab)
      throw IndexError("embed_sequence: token id " + std::to_string(p.token_id) +
                       " outside vocabulary of " + std::to_string(vocab));
    token_ids[size_t(i)] = p.token_id;
    pos_idx[size_t(i)] = p.position_index;
    seg_idx[size_t(i)] = p.segment_index;
    if (p.modality == Modality::kAction) action_rows.push_back(i);
    if (p.modality == Modality::kRegion) region_rows.push_back(i);
  }

  Var total = add(add(gather_rows(tape.leaf(tables.token), token_ids),
                      gather_rows(tape.leaf(tables.position), pos_idx)),
                  gather_rows(tape.leaf(tables.segment), seg_idx));

  if (!action_rows.empty()) {
    Mat feats(Eigen::Index(action_rows.size()), tables.action_proj.W.value.rows());
    for (size_t i = 0; i < action_rows.size(); ++i) {
      const Vec& f = seq.positions[size_t(action_rows[i])].visual_payload;
      if (f.size() != feats.cols())
        throw DimensionError("embed_sequence: action feature has " + std::to_string(f.size()) +
                             " dims, projection expects " + std::to_string(feats.cols()));
      feats.row(Eigen::Index(i)) = f.transpose();
    }
    Var projected = linear(tape, tape.constant(std::move(feats)), tables.action_proj);
    total = add(total, scatter_rows(projected, action_rows, T));
  }

  if (!region_rows.empty()) {
    Mat feats(Eigen::Index(region_rows.size()), tables.region_proj.W.value.rows());
    Mat spatial(Eigen::Index(region_rows.size()), 5);
    for (size_t i = 0; i < region_rows.size(); ++i) {
      const SeqPosition& p = seq.positions[size_t(region_rows[i])];
      if (p.visual_payload.size() != feats.cols())
        throw DimensionError("embed_sequence: region feature has " +
                             std::to_string(p.visual_payload.size()) + " dims, projection expects " +
                             std::to_string(feats.cols()));
      if (p.spatial.size() != 5)
        throw DimensionError("embed_sequence: spatial vector has " +
                             std::to_string(p.spatial.size()) + " dims, expected 5");
      feats.row(Eigen::Index(i)) = p.visual_payload.transpose();
      spatial.row(Eigen::Index(i)) = p.spatial.transpose();
    }
    Var projected = linear(tape, tape.constant(std::move(feats)), tables.region_proj);
    Var embedded_spatial = matmul(tape.constant(std::move(spatial)), tape.leaf(tables.spatial));
    total = add(total, scatter_rows(add(projected, embedded_spatial), region_rows, T));
  }

  return total;
}

}  // namespace tangled
