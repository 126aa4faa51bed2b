#pragma once

#include "ibdiar/features.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ibd {

enum class SegmentKind { fixed, varying };

struct SegmentList {
  std::vector<Interval> segments;
  SegmentKind kind = SegmentKind::fixed;
  double fixed_len = 2.5;
  double min_len = 2.0;
  double max_len = 5.0;
  int phn_rate = 23;

  std::size_t size() const { return segments.size(); }
  std::vector<double> durations() const;
};

struct PhonemeBoundaryList {
  std::vector<Interval> boundaries;
};

PhonemeBoundaryList load_phoneme_boundaries(const std::filesystem::path &path);
PhonemeBoundaryList parse_phoneme_boundaries(const std::string &text);
void write_phoneme_boundaries(const std::filesystem::path &path,
                              const PhonemeBoundaryList &phn);

// Tiles each speech region left to right with fixed_len segments; the last
// segment of a region keeps whatever is left over.
SegmentList fixed_length_init(const SpeechMask &mask, double fixed_len);

struct VaryingParams {
  double min_len = 2.0;
  double max_len = 5.0;
  int phn_rate = 23;
};

// Phoneme-rate driven segmentation, run independently inside every speech
// region. A phoneme belongs to (t1, t2] when its end time does, and segment
// boundaries are placed on phoneme end times.
SegmentList varying_length_init(const SpeechMask &mask, const PhonemeBoundaryList &phn,
                                const VaryingParams &params = {});

// Folds segments spanning fewer than `min_frames` frames into the preceding
// segment of the same region (or the following one when first). Regions that
// are shorter than min_frames overall are dropped.
SegmentList merge_short_segments(const SegmentList &segs, double frame_period,
                                 std::size_t min_frames = 2);

// Number of phonemes whose end time falls in (seg.start, seg.end].
std::size_t count_phonemes(const PhonemeBoundaryList &phn, const Interval &seg);

void write_segments_csv(const std::filesystem::path &path, const SegmentList &segs);

}  // namespace ibd
