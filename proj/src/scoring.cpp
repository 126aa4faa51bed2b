#include "ibdiar/scoring.hpp"

#include "ibdiar/error.hpp"

#include <algorithm>
#include <limits>

namespace ibd {

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>> &weights) {
  const std::size_t rows = weights.size();
  const std::size_t cols = rows ? weights[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};

  // Square cost matrix, 1-based as in the classic potentials formulation.
  // Padding cells carry weight 0.
  double wmax = 0.0;
  for (const auto &r : weights)
    for (double w : r) wmax = std::max(wmax, w);
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, wmax));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) cost[i + 1][j + 1] = wmax - weights[i][j];

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> match(rows, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] <= rows && j <= cols) match[p[j] - 1] = static_cast<int>(j - 1);
  return match;
}

namespace {

struct Region {
  double duration;
  std::vector<int> ref;  // speaker indices
  std::vector<int> hyp;
};

std::vector<int> active_at(const Diarization &d, const std::vector<std::string> &names,
                           double t) {
  std::vector<int> ids;
  for (const auto &e : d.entries)
    if (e.start <= t && t < e.end()) {
      const int id = static_cast<int>(std::lower_bound(names.begin(), names.end(), e.speaker) -
                                      names.begin());
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  return ids;
}

}  // namespace

ScoreReport compute_ser(const Diarization &ref, const Diarization &hyp,
                        const ScoreOptions &options) {
  if (ref.entries.empty()) throw DataError("empty reference: score undefined");
  if (!ref.recording_id.empty() && !hyp.recording_id.empty() &&
      ref.recording_id != hyp.recording_id)
    throw DataError("recording ids differ: " + ref.recording_id + " vs " + hyp.recording_id);
  if (options.collar < 0.0) throw DataError("collar must be non-negative");

  const auto ref_names = ref.speakers();
  const auto hyp_names = hyp.speakers();

  std::vector<std::pair<double, double>> zones;
  std::vector<double> cuts;
  for (const auto &e : ref.entries) {
    for (double b : {e.start, e.end()}) {
      cuts.push_back(b);
      if (options.collar > 0.0) {
        zones.emplace_back(b - options.collar, b + options.collar);
        cuts.push_back(b - options.collar);
        cuts.push_back(b + options.collar);
      }
    }
  }
  for (const auto &e : hyp.entries) {
    cuts.push_back(e.start);
    cuts.push_back(e.end());
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<Region> regions;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double d = cuts[k + 1] - cuts[k];
    if (d <= 0.0) continue;
    const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
    const bool excluded = std::any_of(zones.begin(), zones.end(), [&](const auto &z) {
      return z.first <= mid && mid < z.second;
    });
    if (excluded) continue;
    Region r{d, active_at(ref, ref_names, mid), active_at(hyp, hyp_names, mid)};
    if (r.ref.empty() && r.hyp.empty()) continue;
    if (!options.score_overlap && r.ref.size() > 1) continue;
    regions.push_back(std::move(r));
  }

  // weights[h][r] = time where hyp h and ref r are both active.
  std::vector<std::vector<double>> overlap(hyp_names.size(),
                                           std::vector<double>(ref_names.size(), 0.0));
  for (const auto &r : regions)
    for (int h : r.hyp)
      for (int s : r.ref) overlap[static_cast<std::size_t>(h)][static_cast<std::size_t>(s)] += r.duration;
  const std::vector<int> match = max_weight_assignment(overlap);

  ScoreReport rep;
  for (std::size_t h = 0; h < match.size(); ++h)
    if (match[h] >= 0 && overlap[h][static_cast<std::size_t>(match[h])] > 0.0)
      rep.mapping[hyp_names[h]] = ref_names[static_cast<std::size_t>(match[h])];

  double ser = 0.0, ms = 0.0, fa = 0.0, total = 0.0;
  for (const auto &r : regions) {
    const double n_ref = static_cast<double>(r.ref.size());
    const double n_hyp = static_cast<double>(r.hyp.size());
    double n_correct = 0.0;
    for (int h : r.hyp) {
      const int m = match[static_cast<std::size_t>(h)];
      if (m >= 0 && std::find(r.ref.begin(), r.ref.end(), m) != r.ref.end()) n_correct += 1.0;
    }
    total += r.duration * n_ref;
    ser += r.duration * (std::min(n_ref, n_hyp) - n_correct);
    ms += r.duration * std::max(0.0, n_ref - n_hyp);
    fa += r.duration * std::max(0.0, n_hyp - n_ref);
  }
  if (total <= 0.0) throw DataError("no scorable reference speech after collar");
  rep.scored_time = total;
  rep.ser_time = ser;
  rep.ms_time = ms;
  rep.fa_time = fa;
  rep.ser = 100.0 * ser / total;
  rep.ms = 100.0 * ms / total;
  rep.fa = 100.0 * fa / total;
  rep.der = rep.ser + rep.ms + rep.fa;
  return rep;
}

}  // namespace ibd
