#pragma once

#include "ibdiar/features.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ibd {

struct Turn {
  double start = 0.0;
  double duration = 0.0;
  std::string speaker;

  double end() const { return start + duration; }
};

// Time-stamped speaker-labelled intervals for one recording.
struct Diarization {
  std::string recording_id;
  std::vector<Turn> entries;

  std::vector<std::string> speakers() const;  // sorted, unique
  std::map<std::string, double> speaker_totals() const;
  void sort();
};

// Builds a diarization from a per-frame label sequence (negative = no
// speech), splitting runs at region edges and snapping run ends that touch a
// region edge to that edge.
Diarization labels_to_diarization(const std::vector<int> &frame_labels, const SpeechMask &mask,
                                  double frame_period, const std::string &recording_id);

// Per-frame label index into diar.speakers(); -1 where no entry covers the
// frame centre.
std::vector<int> diarization_to_labels(const Diarization &diar, std::size_t num_frames,
                                       double frame_period);

// NIST RTTM "SPEAKER <file> 1 <tbeg> <tdur> <NA> <NA> <name> <NA> <NA>".
Diarization parse_rttm(const std::string &text);
Diarization read_rttm(const std::filesystem::path &path);
std::string format_rttm(const Diarization &diar);
void write_rttm(const std::filesystem::path &path, const Diarization &diar);

}  // namespace ibd
