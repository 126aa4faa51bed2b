#pragma once

#include "ibdiar/aib.hpp"
#include "ibdiar/diarization.hpp"
#include "ibdiar/features.hpp"
#include "ibdiar/segmentation.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ibd {

// Synthetic conversation: K diagonal-Gaussian speakers in feature space,
// round-robin turns, per-speaker phoneme rates.
struct SynthSpec {
  int num_speakers = 3;
  double duration = 300.0;
  int dims = 19;
  double mean_radius = 6.0;
  double turn_min = 3.0;
  double turn_max = 12.0;
  double rate_min = 6.0;  // phonemes per second
  double rate_max = 14.0;
  std::uint64_t seed = 0;
  double frame_period = 0.010;
};

inline constexpr double kMinTurnDuration = 2.5;

struct SynthCorpus {
  FeatureStream features;
  SpeechMask mask;
  PhonemeBoundaryList phonemes;
  Diarization reference;
  Matrix speaker_means;      // K x dims
  Matrix speaker_variances;  // K x dims
  std::vector<double> speaker_rates;
};

SynthCorpus synth_conversation(const SynthSpec &spec, const std::string &recording_id = "synth");

// Writes <id>.feat, <id>.mask, <id>.phn and <id>.rttm into dir.
void write_corpus(const std::filesystem::path &dir, const SynthCorpus &corpus);

// ---------------------------------------------------------------------------
// Exhaustive greedy IB reference for small instances. Every candidate merge
// is scored by recomputing I(Y,C) - I(C,X)/beta from the full joint
// distribution; it shares no code with the incremental clusterer.

struct BruteForceResult {
  std::vector<int> assignment;  // cluster id = smallest member index
  std::vector<std::pair<int, int>> merges;
  std::vector<double> deltas;   // F(before) - F(after) per merge
  std::vector<double> nmi;      // after each merge, initial value first
};

inline constexpr std::size_t kBruteForceMaxSegments = 12;

BruteForceResult brute_force_reference(const PosteriorMatrix &seg_post, const Vector &p_x,
                                       double beta, const StoppingRule &stop);

// F = I(Y,C) - I(C,X)/beta for an arbitrary hard assignment, from definitions.
double ib_objective_direct(const Matrix &p_y_given_x, const Vector &p_x,
                           const std::vector<int> &assignment, double beta);

}  // namespace ibd
