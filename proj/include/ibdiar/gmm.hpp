#pragma once

#include "ibdiar/features.hpp"
#include "ibdiar/segmentation.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <vector>

namespace ibd {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Weighting { uniform, duration };

inline Weighting weighting_for(SegmentKind kind) {
  return kind == SegmentKind::varying ? Weighting::duration : Weighting::uniform;
}

// One diagonal Gaussian per segment. Row i of `means`/`variances` belongs to
// component i.
struct GmmModel {
  Matrix means;
  Matrix variances;
  Vector weights;

  std::size_t size() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(means.cols()); }
};

enum class PosteriorLevel { frame, segment };

// Row-stochastic matrix over the N relevance components.
struct PosteriorMatrix {
  Matrix rows;
  PosteriorLevel level = PosteriorLevel::frame;

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t components() const { return static_cast<std::size_t>(rows.cols()); }
};

inline constexpr double kVarianceFloor = 1e-4;

GmmModel estimate_gmm(const FeatureStream &stream, const SegmentList &segs,
                      Weighting weighting);

// a_i N(f_k; mu_i, Sigma_i) normalised over i, evaluated with log-sum-exp.
PosteriorMatrix frame_posteriors(const GmmModel &gmm, const FeatureStream &stream);

// Mean of the frame rows inside each segment.
PosteriorMatrix segment_posteriors(const PosteriorMatrix &frame_post, const SegmentList &segs,
                                   double frame_period);

void write_posteriors_csv(const std::filesystem::path &path, const PosteriorMatrix &post);

}  // namespace ibd
