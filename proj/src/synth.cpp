#include "ibdiar/synth.hpp"

#include "ibdiar/error.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace ibd {

SynthCorpus synth_conversation(const SynthSpec &spec, const std::string &recording_id) {
  if (spec.num_speakers < 2) throw DataError("synthetic corpus needs at least 2 speakers");
  if (spec.dims < 1) throw DataError("synthetic corpus needs dims >= 1");
  if (spec.mean_radius < 0.0) throw DataError("mean radius must be non-negative");
  if (spec.turn_min < kMinTurnDuration || spec.turn_max < spec.turn_min)
    throw DataError("turn range must satisfy 2.5 <= min <= max");
  if (spec.duration < spec.turn_min) throw DataError("duration shorter than one turn");
  if (!(spec.rate_min > 0.0) || spec.rate_max < spec.rate_min)
    throw DataError("phoneme rate range must satisfy 0 < min <= max");
  if (!(spec.frame_period > 0.0)) throw DataError("frame period must be positive");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int k = spec.num_speakers;
  const int dims = spec.dims;
  SynthCorpus out;
  out.speaker_means.resize(k, dims);
  out.speaker_variances.resize(k, dims);
  for (int s = 0; s < k; ++s) {
    Eigen::RowVectorXd dir(dims);
    for (int d = 0; d < dims; ++d) dir(d) = normal(rng);
    out.speaker_means.row(s) = spec.mean_radius * dir / dir.norm();
    for (int d = 0; d < dims; ++d) out.speaker_variances(s, d) = uniform(0.5, 1.5);
    out.speaker_rates.push_back(uniform(spec.rate_min, spec.rate_max));
  }

  // Turn boundaries live on the frame grid, counted in frames.
  const auto total_frames = static_cast<long>(std::llround(spec.duration / spec.frame_period));
  const double fp = spec.frame_period;
  out.reference.recording_id = recording_id;
  std::vector<int> frame_speaker(static_cast<std::size_t>(total_frames), 0);
  long pos = 0;
  for (int turn = 0; pos < total_frames; ++turn) {
    const int spk = turn % k;
    long len = std::llround(uniform(spec.turn_min, spec.turn_max) / fp);
    len = std::min(len, total_frames - pos);
    std::fill(frame_speaker.begin() + pos, frame_speaker.begin() + pos + len, spk);
    const double t0 = static_cast<double>(pos) * fp;
    const double t1 = static_cast<double>(pos + len) * fp;
    out.reference.entries.push_back({t0, t1 - t0, "S" + std::to_string(spk)});

    // Phonemes tile the turn with jittered durations around 1 / rate.
    double t = t0;
    const double mean_len = 1.0 / out.speaker_rates[static_cast<std::size_t>(spk)];
    while (t < t1 - 1e-9) {
      const double end = std::min(t + mean_len * uniform(0.6, 1.4), t1);
      out.phonemes.boundaries.push_back({t, end});
      t = end;
    }
    pos += len;
  }

  out.features.recording_id = recording_id;
  out.features.frame_period = fp;
  out.features.frames.resize(total_frames, dims);
  for (long f = 0; f < total_frames; ++f) {
    const int s = frame_speaker[static_cast<std::size_t>(f)];
    for (int d = 0; d < dims; ++d) {
      const double v =
          out.speaker_means(s, d) + std::sqrt(out.speaker_variances(s, d)) * normal(rng);
      out.features.frames(f, d) = static_cast<float>(v);
    }
  }
  out.mask.intervals.push_back({0.0, static_cast<double>(total_frames) * fp});
  return out;
}

void write_corpus(const std::filesystem::path &dir, const SynthCorpus &corpus) {
  std::filesystem::create_directories(dir);
  const std::string id = corpus.features.recording_id;
  write_features(dir / (id + ".feat"), corpus.features);
  write_speech_mask(dir / (id + ".mask"), corpus.mask);
  write_phoneme_boundaries(dir / (id + ".phn"), corpus.phonemes);
  write_rttm(dir / (id + ".rttm"), corpus.reference);
}

// ---------------------------------------------------------------------------
// Brute-force IB reference

namespace {

double plogp_ratio(double joint, double a, double b) {
  return joint > 0.0 ? joint * std::log(joint / (a * b)) : 0.0;
}

struct Information {
  double i_yc;
  double i_cx;
};

Information information_direct(const Matrix &p_y_given_x, const Vector &p_x,
                               const std::vector<int> &assignment) {
  const Eigen::Index nx = p_y_given_x.rows();
  const Eigen::Index ny = p_y_given_x.cols();
  std::map<int, std::vector<Eigen::Index>> members;
  for (Eigen::Index x = 0; x < nx; ++x) members[assignment[static_cast<std::size_t>(x)]].push_back(x);

  std::vector<double> p_y(static_cast<std::size_t>(ny), 0.0);
  for (Eigen::Index x = 0; x < nx; ++x)
    for (Eigen::Index y = 0; y < ny; ++y) p_y[static_cast<std::size_t>(y)] += p_x(x) * p_y_given_x(x, y);

  Information info{0.0, 0.0};
  for (const auto &[c, xs] : members) {
    double p_c = 0.0;
    for (auto x : xs) p_c += p_x(x);
    for (Eigen::Index y = 0; y < ny; ++y) {
      double joint = 0.0;
      for (auto x : xs) joint += p_x(x) * p_y_given_x(x, y);
      info.i_yc += plogp_ratio(joint, p_c, p_y[static_cast<std::size_t>(y)]);
    }
    // p(c, x) = p(x) for members, 0 otherwise.
    for (auto x : xs) info.i_cx += plogp_ratio(p_x(x), p_c, p_x(x));
  }
  return info;
}

double mutual_information_xy(const Matrix &p_y_given_x, const Vector &p_x) {
  std::vector<int> singletons(static_cast<std::size_t>(p_y_given_x.rows()));
  for (std::size_t i = 0; i < singletons.size(); ++i) singletons[i] = static_cast<int>(i);
  return information_direct(p_y_given_x, p_x, singletons).i_yc;
}

}  // namespace

double ib_objective_direct(const Matrix &p_y_given_x, const Vector &p_x,
                           const std::vector<int> &assignment, double beta) {
  const Information info = information_direct(p_y_given_x, p_x, assignment);
  return info.i_yc - info.i_cx / beta;
}

BruteForceResult brute_force_reference(const PosteriorMatrix &seg_post, const Vector &p_x,
                                       double beta, const StoppingRule &stop) {
  const auto n = static_cast<int>(seg_post.size());
  if (static_cast<std::size_t>(n) > kBruteForceMaxSegments)
    throw DataError("brute-force reference is limited to 12 segments");
  if (n < 1) throw DataError("empty instance");
  if (stop.kind == StoppingRule::Kind::cluster_count &&
      (stop.count < 1 || stop.count > static_cast<std::size_t>(n)))
    throw DataError("stopping rule unsatisfiable");

  const Matrix &cond = seg_post.rows;
  BruteForceResult res;
  res.assignment.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) res.assignment[static_cast<std::size_t>(i)] = i;

  const double i_xy = mutual_information_xy(cond, p_x);
  const bool zero_info = i_xy <= 1e-12;
  auto nmi_of = [&](const std::vector<int> &a) {
    if (zero_info) return 1.0;
    return std::clamp(information_direct(cond, p_x, a).i_yc / i_xy, 0.0, 1.0);
  };
  res.nmi.push_back(nmi_of(res.assignment));
  if (zero_info) return res;

  std::vector<bool> live(static_cast<std::size_t>(n), true);
  std::size_t num_live = static_cast<std::size_t>(n);
  while (num_live > 1) {
    if (stop.kind == StoppingRule::Kind::cluster_count && num_live <= stop.count) break;
    const double f_before = ib_objective_direct(cond, p_x, res.assignment, beta);
    int best_a = -1, best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
      if (!live[static_cast<std::size_t>(a)]) continue;
      for (int b = a + 1; b < n; ++b) {
        if (!live[static_cast<std::size_t>(b)]) continue;
        std::vector<int> trial = res.assignment;
        for (int &c : trial)
          if (c == b) c = a;
        const double delta = f_before - ib_objective_direct(cond, p_x, trial, beta);
        if (best_a < 0 || delta < best - 1e-13) {
          best = delta;
          best_a = a;
          best_b = b;
        }
      }
    }
    std::vector<int> next = res.assignment;
    for (int &c : next)
      if (c == best_b) c = best_a;
    const double next_nmi = nmi_of(next);
    if (stop.kind == StoppingRule::Kind::nmi_threshold && next_nmi < stop.nmi) break;
    res.assignment = std::move(next);
    live[static_cast<std::size_t>(best_b)] = false;
    --num_live;
    res.merges.emplace_back(best_a, best_b);
    res.deltas.push_back(best);
    res.nmi.push_back(next_nmi);
  }
  return res;
}

}  // namespace ibd
