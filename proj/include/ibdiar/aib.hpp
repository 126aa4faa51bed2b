#pragma once

#include "ibdiar/gmm.hpp"

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace ibd {

// Information-theoretic helpers on discrete distributions, natural log.
double entropy(std::span<const double> p);
// pi-weighted Jensen-Shannon divergence between p and q.
double js_divergence(std::span<const double> p, std::span<const double> q, double pi_p,
                     double pi_q);

struct MergeRecord {
  std::size_t num_clusters = 0;  // after the merge
  double i_yc = 0.0;
  double i_cx = 0.0;
  double nmi = 1.0;
  int merged_a = -1;  // surviving cluster id
  int merged_b = -1;  // absorbed cluster id
  double delta = 0.0;
};

// Agglomerative IB state. Clusters are identified by their smallest member
// segment index; merging a < b keeps id a.
struct IbState {
  Vector p_x;
  Matrix p_y_given_x;
  std::vector<int> assignment;
  std::vector<bool> live;
  Vector p_c;
  Matrix p_y_given_c;
  double beta = 10.0;
  double i_xy = 0.0;
  double i_yc = 0.0;  // maintained incrementally
  double i_cx = 0.0;  // equals H(C) for a hard clustering
  bool zero_information = false;
  std::vector<MergeRecord> trajectory;

  std::size_t num_segments() const { return assignment.size(); }
  std::size_t num_live() const;
  std::vector<int> live_clusters() const;
  // F = I(Y,C) - I(C,X)/beta
  double objective() const { return i_yc - i_cx / beta; }
};

struct StoppingRule {
  enum class Kind { nmi_threshold, cluster_count };
  Kind kind = Kind::nmi_threshold;
  double nmi = 0.4;
  std::size_t count = 20;

  static StoppingRule threshold(double nmi) { return {Kind::nmi_threshold, nmi, 0}; }
  static StoppingRule clusters(std::size_t count) { return {Kind::cluster_count, 0.0, count}; }
};

// Prior over segments: uniform, or proportional to the durations.
Vector segment_prior(Weighting weighting, std::span<const double> durations);

IbState init_ib_state(const PosteriorMatrix &seg_post, Weighting weighting,
                      std::span<const double> durations, double beta);

// F(before) - F(after) for merging live clusters a and b:
// (p_a + p_b) * [JS_pi(p(y|a), p(y|b)) - H(pi) / beta].
double merge_delta(const IbState &state, int a, int b);

// Greedy merging of the minimum-delta pair (lowest (a, b) on ties) until the
// stopping rule fires. With an NMI rule, merging stops before the first
// merge that would take NMI below the threshold.
IbState run_aib(IbState state, const StoppingRule &stop);

// I(Y,C) / I(X,Y) clamped to [0, 1]; 1 for zero-information input.
double nmi(const IbState &state);

// I(Y,C) and I(C,X) recomputed from the joint p(x) p(y|x) and the assignment.
std::pair<double, double> information_from_scratch(const IbState &state);

void write_trajectory_csv(const std::filesystem::path &path,
                          std::span<const MergeRecord> trajectory);

}  // namespace ibd
