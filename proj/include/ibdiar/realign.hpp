#pragma once

#include "ibdiar/aib.hpp"
#include "ibdiar/diarization.hpp"
#include "ibdiar/gmm.hpp"

#include <string>
#include <vector>

namespace ibd {

struct RealignOptions {
  double min_dur = 2.5;     // seconds
  double floor = 1e-10;     // applied to both distributions before KL
};

struct RealignResult {
  Diarization diarization;
  // Per-frame output cluster index (0-based, ordered by first appearance);
  // -1 outside speech.
  std::vector<int> frame_labels;
  // One multinomial over the relevance components per output cluster.
  Matrix models;
  double first_cost = 0.0;
  double second_cost = 0.0;
};

// cost(t, c) = KL(q_c || p_t) with both vectors floored and renormalised.
Matrix kl_cost_matrix(const PosteriorMatrix &frame_post, const Matrix &models, double floor);

struct DecodedPath {
  std::vector<int> labels;
  double cost = 0.0;  // sum of cost(t, labels[t]) in frame order
};

// Minimum-cost labelling of cost.rows() frames in which every run of a label
// spans at least min_frames frames. Sequences shorter than min_frames get the
// single label of least total cost.
DecodedPath min_duration_viterbi(const Matrix &cost, std::size_t min_frames);

// Decode against the initial cluster models, re-estimate each model from its
// frames, decode again. The re-estimate is the normalised geometric mean of
// the assigned (floored) frame posteriors, which minimises the summed
// KL(q || p_t) over the frames a cluster owns. Clusters left without frames
// are dropped.
RealignResult kl_hmm_realign(const PosteriorMatrix &frame_post, const Matrix &models,
                             const SpeechMask &mask, double frame_period,
                             const RealignOptions &options, const std::string &recording_id);

// Models taken from the live clusters of an IB solution.
RealignResult kl_hmm_realign(const PosteriorMatrix &frame_post, const IbState &clusters,
                             const SpeechMask &mask, double frame_period,
                             const RealignOptions &options, const std::string &recording_id);

}  // namespace ibd
