#pragma once

#include "ibdiar/aib.hpp"
#include "ibdiar/diarization.hpp"
#include "ibdiar/discriminative.hpp"
#include "ibdiar/features.hpp"
#include "ibdiar/fusion.hpp"
#include "ibdiar/segmentation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ibd {

enum class Mode {
  ib,
  varib,
  tpib_nn,
  tpib_lda,
  tpib_fused,
  vartpib_nn,
  vartpib_lda,
  vartpib_fused,
};

Mode parse_mode(std::string_view name);  // throws DataError on unknown names
std::string mode_name(Mode mode);
const std::vector<Mode> &all_modes();

bool uses_varying_init(Mode mode);
bool is_two_pass(Mode mode);
bool uses_nn(Mode mode);   // nn and fused
bool uses_lda(Mode mode);  // lda and fused
bool is_fused(Mode mode);

struct PipelineConfig {
  Mode mode = Mode::ib;
  double seg_len = 2.5;
  double min_len = 2.0;
  double max_len = 5.0;
  int phn_rate = 23;
  double nmi = 0.4;
  double beta = 10.0;
  std::size_t first_pass_count = 20;
  double prune_min = 3.0;
  double min_dur = 2.5;
  // Unset: (0.2, 0.8) for tpib-fused, (0.6, 0.4) for vartpib-fused.
  std::optional<FusionWeights> fusion;
  std::uint64_t seed = 0;
  MfnnConfig mfnn;  // seed is overridden by `seed`

  FusionWeights effective_fusion() const;
  void validate() const;
};

struct PipelineInput {
  FeatureStream features;        // ignored when audio is set
  std::optional<Audio> audio;    // extracted inside the timed run
  SpeechMask mask;
  std::optional<PhonemeBoundaryList> phonemes;
};

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

struct RtfReport {
  double audio_duration = 0.0;
  std::vector<StageTime> stages;
  double wall_seconds = 0.0;

  double total_seconds() const;
  double total_rtf() const { return audio_duration > 0.0 ? total_seconds() / audio_duration : 0.0; }
  double wall_rtf() const { return audio_duration > 0.0 ? wall_seconds / audio_duration : 0.0; }
  // Sum of the seconds of every stage with this name.
  double stage_seconds(std::string_view name) const;
  std::size_t stage_count(std::string_view name) const;
};

struct PassReport {
  std::size_t num_segments = 0;
  std::size_t clusters = 0;  // after clustering, before realignment
  bool realigned = false;
  std::vector<MergeRecord> trajectory;
};

struct DiarizeResult {
  Diarization diarization;
  Diarization first_pass;  // equals diarization for single-pass modes
  PassReport pass1;
  std::optional<PassReport> pass2;
  std::size_t realign_count = 0;
  bool fell_back = false;
  bool pca_on_nn = false;
  bool pca_on_lda = false;
  std::optional<double> mfnn_initial_loss;
  std::optional<double> mfnn_final_loss;
  std::optional<double> input_fisher;
  std::optional<double> lda_fisher;
  std::vector<std::string> kept_clusters;
  std::vector<std::string> warnings;
  RtfReport rtf;
};

DiarizeResult diarize(const PipelineInput &input, const PipelineConfig &config);

SegmentList initial_segments(const SpeechMask &mask, const std::optional<PhonemeBoundaryList> &phn,
                             const PipelineConfig &config, double frame_period);

}  // namespace ibd
