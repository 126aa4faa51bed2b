#include "ibdiar/gmm.hpp"

#include "ibdiar/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

namespace ibd {

GmmModel estimate_gmm(const FeatureStream &stream, const SegmentList &segs,
                      Weighting weighting) {
  const std::size_t n = segs.size();
  if (n == 0) throw DataError("cannot build a GMM from an empty segment list");
  const auto dims = static_cast<Eigen::Index>(stream.dims());

  GmmModel gmm;
  gmm.means.resize(static_cast<Eigen::Index>(n), dims);
  gmm.variances.resize(static_cast<Eigen::Index>(n), dims);
  gmm.weights.resize(static_cast<Eigen::Index>(n));

  double total_duration = 0.0;
  for (const auto &s : segs.segments) total_duration += s.length();

  for (std::size_t i = 0; i < n; ++i) {
    const auto [first, last] =
        frame_range(segs.segments[i], stream.frame_period, stream.num_frames());
    if (last - first < 2)
      throw DegenerateSegmentError("segment " + std::to_string(i) + " spans fewer than 2 frames");
    const auto block = stream.frames
                           .middleRows(static_cast<Eigen::Index>(first),
                                       static_cast<Eigen::Index>(last - first))
                           .cast<double>();
    const Eigen::RowVectorXd mean = block.colwise().mean();
    const Eigen::RowVectorXd var =
        (block.rowwise() - mean).array().square().colwise().mean().matrix();
    const auto row = static_cast<Eigen::Index>(i);
    gmm.means.row(row) = mean;
    gmm.variances.row(row) = var.array().max(kVarianceFloor).matrix();
    gmm.weights(row) = weighting == Weighting::duration
                           ? segs.segments[i].length() / total_duration
                           : 1.0 / static_cast<double>(n);
  }
  return gmm;
}

PosteriorMatrix frame_posteriors(const GmmModel &gmm, const FeatureStream &stream) {
  if (stream.dims() != gmm.dims())
    throw DataError("feature dims " + std::to_string(stream.dims()) + " != model dims " +
                    std::to_string(gmm.dims()));
  const auto n = static_cast<Eigen::Index>(gmm.size());
  const auto frames = static_cast<Eigen::Index>(stream.num_frames());

  // log a_i - 1/2 sum_d log(2 pi var_id) is constant per component.
  const Matrix inv_var = gmm.variances.cwiseInverse();
  Vector log_norm(n);
  for (Eigen::Index i = 0; i < n; ++i)
    log_norm(i) = std::log(gmm.weights(i)) -
                  0.5 * (gmm.variances.row(i).array() * (2.0 * std::numbers::pi)).log().sum();

  PosteriorMatrix out;
  out.level = PosteriorLevel::frame;
  out.rows.resize(frames, n);
  constexpr Eigen::Index kBlock = 1024;
  for (Eigen::Index k0 = 0; k0 < frames; k0 += kBlock) {
    const Eigen::Index len = std::min(kBlock, frames - k0);
    const Eigen::ArrayXXd x = stream.frames.middleRows(k0, len).cast<double>().array();
    Matrix loglik(len, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::ArrayXXd diff = x.rowwise() - gmm.means.row(i).array();
      loglik.col(i) =
          (log_norm(i) - 0.5 * (diff.square().rowwise() * inv_var.row(i).array()).rowwise().sum())
              .matrix();
    }
    for (Eigen::Index k = 0; k < len; ++k) {
      auto row = loglik.row(k);
      const double peak = row.maxCoeff();
      if (!std::isfinite(peak)) throw NumericError("non-finite frame likelihood");
      row = (row.array() - peak).exp().matrix();
      out.rows.row(k0 + k) = row / row.sum();
    }
  }
  return out;
}

PosteriorMatrix segment_posteriors(const PosteriorMatrix &frame_post, const SegmentList &segs,
                                   double frame_period) {
  PosteriorMatrix out;
  out.level = PosteriorLevel::segment;
  out.rows.resize(static_cast<Eigen::Index>(segs.size()), frame_post.rows.cols());
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto [first, last] = frame_range(segs.segments[s], frame_period, frame_post.size());
    if (last == first)
      throw DegenerateSegmentError("segment " + std::to_string(s) + " covers no frames");
    out.rows.row(static_cast<Eigen::Index>(s)) =
        frame_post.rows
            .middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last - first))
            .colwise()
            .mean();
  }
  return out;
}

void write_posteriors_csv(const std::filesystem::path &path, const PosteriorMatrix &post) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < post.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < post.rows.cols(); ++c) out << (c ? "," : "") << post.rows(r, c);
    out << '\n';
  }
}

}  // namespace ibd
