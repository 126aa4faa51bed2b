#include "ibdiar/realign.hpp"

#include "ibdiar/error.hpp"

#include <cmath>
#include <limits>

namespace ibd {

namespace {

Matrix floor_rows(const Matrix &m, double floor) {
  Matrix out = m.cwiseMax(floor);
  for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) /= out.row(r).sum();
  return out;
}

// Label runs are decoded independently per speech region.
std::vector<std::pair<std::size_t, std::size_t>> region_frames(const SpeechMask &mask,
                                                                double frame_period,
                                                                std::size_t num_frames) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto &iv : mask.intervals) {
    auto r = frame_range(iv, frame_period, num_frames);
    if (r.second > r.first) out.push_back(r);
  }
  return out;
}

double decode_regions(const Matrix &cost,
                      const std::vector<std::pair<std::size_t, std::size_t>> &regions,
                      std::size_t min_frames, std::vector<int> &labels) {
  double total = 0.0;
  for (const auto &[first, last] : regions) {
    const Matrix block = cost.middleRows(static_cast<Eigen::Index>(first),
                                         static_cast<Eigen::Index>(last - first));
    const DecodedPath path = min_duration_viterbi(block, min_frames);
    std::copy(path.labels.begin(), path.labels.end(),
              labels.begin() + static_cast<std::ptrdiff_t>(first));
    total += path.cost;
  }
  return total;
}

}  // namespace

Matrix kl_cost_matrix(const PosteriorMatrix &frame_post, const Matrix &models, double floor) {
  if (frame_post.components() != static_cast<std::size_t>(models.cols()))
    throw DataError("cluster models and posteriors disagree on component count");
  const Matrix q = floor_rows(models, floor);
  const Matrix log_p = floor_rows(frame_post.rows, floor).array().log().matrix();
  const Vector neg_entropy = (q.array() * q.array().log()).rowwise().sum();
  Matrix cost = -(log_p * q.transpose());
  cost.rowwise() += neg_entropy.transpose();
  return cost.cwiseMax(0.0);
}

DecodedPath min_duration_viterbi(const Matrix &cost, std::size_t min_frames) {
  const auto frames = static_cast<std::size_t>(cost.rows());
  const auto k = static_cast<std::size_t>(cost.cols());
  DecodedPath path;
  if (frames == 0) return path;
  if (k == 0) throw DataError("viterbi needs at least one label");
  const std::size_t d = std::max<std::size_t>(min_frames, 1);

  auto path_cost = [&](const std::vector<int> &labels) {
    double s = 0.0;
    for (std::size_t t = 0; t < frames; ++t)
      s += cost(static_cast<Eigen::Index>(t), labels[t]);
    return s;
  };

  if (frames < d) {
    const Eigen::RowVectorXd sums = cost.colwise().sum();
    Eigen::Index best = 0;
    sums.minCoeff(&best);
    path.labels.assign(frames, static_cast<int>(best));
    path.cost = path_cost(path.labels);
    return path;
  }

  // prefix(t, c) = sum of cost(0..t-1, c)
  Matrix prefix = Matrix::Zero(static_cast<Eigen::Index>(frames + 1), static_cast<Eigen::Index>(k));
  for (std::size_t t = 0; t < frames; ++t)
    prefix.row(static_cast<Eigen::Index>(t + 1)) =
        prefix.row(static_cast<Eigen::Index>(t)) + cost.row(static_cast<Eigen::Index>(t));
  auto run_sum = [&](std::size_t from, std::size_t to, std::size_t c) {  // frames [from, to]
    return prefix(static_cast<Eigen::Index>(to + 1), static_cast<Eigen::Index>(c)) -
           prefix(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(c));
  };

  // best(t, c): least cost of frames 0..t with frame t labelled c and its run
  // already at least d long. from(t, c) = -1 extends the run; otherwise the
  // run of c started at t-d+1 after a run of label from(t, c) (or at 0 if -2).
  const double inf = std::numeric_limits<double>::infinity();
  Matrix best = Matrix::Constant(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(k), inf);
  std::vector<int> from(frames * k, -1);
  for (std::size_t t = d - 1; t < frames; ++t) {
    const std::size_t s = t + 1 - d;  // first frame of a fresh run ending at t
    double m1 = inf, m2 = inf;
    int a1 = -1;
    if (s > 0) {
      for (std::size_t c = 0; c < k; ++c) {
        const double v = best(static_cast<Eigen::Index>(s - 1), static_cast<Eigen::Index>(c));
        if (v < m1) {
          m2 = m1;
          m1 = v;
          a1 = static_cast<int>(c);
        } else if (v < m2) {
          m2 = v;
        }
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      const auto ti = static_cast<Eigen::Index>(t);
      const auto ci = static_cast<Eigen::Index>(c);
      double v = inf;
      int arg = -1;
      if (t >= d && best(ti - 1, ci) < inf) v = best(ti - 1, ci) + cost(ti, ci);
      if (s == 0) {
        const double fresh = run_sum(0, t, c);
        if (fresh < v) {
          v = fresh;
          arg = -2;
        }
      } else {
        int prev = a1;
        double base = m1;
        if (a1 == static_cast<int>(c)) {
          base = m2;
          prev = -1;
          if (base < inf)
            for (std::size_t c2 = 0; c2 < k; ++c2)
              if (c2 != c && best(static_cast<Eigen::Index>(s - 1), static_cast<Eigen::Index>(c2)) == m2) {
                prev = static_cast<int>(c2);
                break;
              }
        }
        if (prev >= 0 && base < inf) {
          const double fresh = base + run_sum(s, t, c);
          if (fresh < v) {
            v = fresh;
            arg = prev;
          }
        }
      }
      best(ti, ci) = v;
      from[t * k + c] = arg;
    }
  }

  Eigen::Index last = 0;
  best.row(static_cast<Eigen::Index>(frames - 1)).minCoeff(&last);
  path.labels.assign(frames, -1);
  std::size_t t = frames - 1;
  int c = static_cast<int>(last);
  while (true) {
    const int arg = from[t * k + static_cast<std::size_t>(c)];
    if (arg == -1) {
      path.labels[t] = c;
      --t;
      continue;
    }
    const std::size_t s = t + 1 - d;
    for (std::size_t u = s; u <= t; ++u) path.labels[u] = c;
    if (arg == -2) break;
    t = s - 1;
    c = arg;
  }
  path.cost = path_cost(path.labels);
  return path;
}

RealignResult kl_hmm_realign(const PosteriorMatrix &frame_post, const Matrix &models,
                             const SpeechMask &mask, double frame_period,
                             const RealignOptions &options, const std::string &recording_id) {
  if (frame_post.level != PosteriorLevel::frame)
    throw DataError("realignment needs frame-level posteriors");
  if (models.rows() < 1) throw DataError("realignment needs at least one cluster");
  if (options.min_dur < frame_period - 1e-12)
    throw DataError("min_dur must be at least one frame period");

  const std::size_t frames = frame_post.size();
  const auto min_frames = static_cast<std::size_t>(std::llround(options.min_dur / frame_period));
  const auto regions = region_frames(mask, frame_period, frames);

  RealignResult result;
  std::vector<int> labels(frames, -1);
  result.first_cost = decode_regions(kl_cost_matrix(frame_post, models, options.floor), regions,
                                     min_frames, labels);

  // Re-estimate from owned frames; the geometric mean of floored rows already
  // satisfies the floor, so the cost matrix floor leaves it unchanged.
  const Matrix log_p = floor_rows(frame_post.rows, options.floor).array().log().matrix();
  const auto k = static_cast<std::size_t>(models.rows());
  Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), models.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t t = 0; t < frames; ++t) {
    if (labels[t] < 0) continue;
    sums.row(labels[t]) += log_p.row(static_cast<Eigen::Index>(t));
    ++counts[static_cast<std::size_t>(labels[t])];
  }
  std::vector<Eigen::RowVectorXd> kept;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    Eigen::RowVectorXd g = (sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c])).array().exp();
    kept.push_back(g / g.sum());
  }
  if (kept.empty()) {
    // No speech frames at all.
    result.diarization.recording_id = recording_id;
    result.frame_labels = std::move(labels);
    result.models = models;
    return result;
  }
  Matrix refit(static_cast<Eigen::Index>(kept.size()), models.cols());
  for (std::size_t c = 0; c < kept.size(); ++c) refit.row(static_cast<Eigen::Index>(c)) = kept[c];

  std::fill(labels.begin(), labels.end(), -1);
  result.second_cost = decode_regions(kl_cost_matrix(frame_post, refit, options.floor), regions,
                                      min_frames, labels);

  // Renumber by first appearance and drop clusters that lost all frames.
  std::vector<int> remap(kept.size(), -1);
  int next = 0;
  for (int &l : labels) {
    if (l < 0) continue;
    if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = next++;
    l = remap[static_cast<std::size_t>(l)];
  }
  result.models.resize(next, models.cols());
  for (std::size_t c = 0; c < kept.size(); ++c)
    if (remap[c] >= 0) result.models.row(remap[c]) = refit.row(static_cast<Eigen::Index>(c));

  result.diarization = labels_to_diarization(labels, mask, frame_period, recording_id);
  result.frame_labels = std::move(labels);
  return result;
}

RealignResult kl_hmm_realign(const PosteriorMatrix &frame_post, const IbState &clusters,
                             const SpeechMask &mask, double frame_period,
                             const RealignOptions &options, const std::string &recording_id) {
  const auto ids = clusters.live_clusters();
  Matrix models(static_cast<Eigen::Index>(ids.size()), clusters.p_y_given_c.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    models.row(static_cast<Eigen::Index>(i)) = clusters.p_y_given_c.row(ids[i]);
  return kl_hmm_realign(frame_post, models, mask, frame_period, options, recording_id);
}

}  // namespace ibd
