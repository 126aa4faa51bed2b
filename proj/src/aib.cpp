#include "ibdiar/aib.hpp"

#include "ibdiar/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace ibd {

namespace {

// Candidate deltas closer than this are treated as tied so that the
// lexicographic rule, not rounding noise, decides.
constexpr double kTieTolerance = 1e-13;
constexpr double kZeroInformation = 1e-12;

std::span<const double> row_span(const Matrix &m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

double binary_entropy(double a, double b) {
  double h = 0.0;
  if (a > 0.0) h -= a * std::log(a);
  if (b > 0.0) h -= b * std::log(b);
  return h;
}

}  // namespace

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double js_divergence(std::span<const double> p, std::span<const double> q, double pi_p,
                     double pi_q) {
  double js = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    const double m = pi_p * p[y] + pi_q * q[y];
    if (p[y] > 0.0) js += pi_p * p[y] * std::log(p[y] / m);
    if (q[y] > 0.0) js += pi_q * q[y] * std::log(q[y] / m);
  }
  return std::max(js, 0.0);
}

std::size_t IbState::num_live() const {
  return static_cast<std::size_t>(std::count(live.begin(), live.end(), true));
}

std::vector<int> IbState::live_clusters() const {
  std::vector<int> ids;
  for (std::size_t c = 0; c < live.size(); ++c)
    if (live[c]) ids.push_back(static_cast<int>(c));
  return ids;
}

Vector segment_prior(Weighting weighting, std::span<const double> durations) {
  const auto n = static_cast<Eigen::Index>(durations.size());
  Vector p(n);
  if (weighting == Weighting::uniform) {
    p.setConstant(1.0 / static_cast<double>(n));
    return p;
  }
  double total = 0.0;
  for (double d : durations) {
    if (!(d > 0.0)) throw DataError("segment durations must be positive");
    total += d;
  }
  for (Eigen::Index i = 0; i < n; ++i) p(i) = durations[static_cast<std::size_t>(i)] / total;
  return p;
}

IbState init_ib_state(const PosteriorMatrix &seg_post, Weighting weighting,
                      std::span<const double> durations, double beta) {
  if (seg_post.level != PosteriorLevel::segment)
    throw DataError("IB clustering needs segment-level posteriors");
  if (seg_post.size() < 2) throw DataError("IB clustering needs at least 2 segments");
  if (durations.size() != seg_post.size())
    throw DataError("duration count does not match segment count");
  if (!(beta > 0.0)) throw DataError("beta must be positive");

  const auto n = static_cast<Eigen::Index>(seg_post.size());
  IbState st;
  st.beta = beta;
  st.p_x = segment_prior(weighting, durations);
  st.p_y_given_x = seg_post.rows;
  st.p_y_given_c = seg_post.rows;
  st.p_c = st.p_x;
  st.live.assign(static_cast<std::size_t>(n), true);
  st.assignment.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) st.assignment[static_cast<std::size_t>(i)] = static_cast<int>(i);

  const Eigen::RowVectorXd p_y = st.p_x.transpose() * st.p_y_given_x;
  double ixy = 0.0;
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < p_y.size(); ++y) {
      const double c = st.p_y_given_x(x, y);
      if (c > 0.0) ixy += st.p_x(x) * c * std::log(c / p_y(y));
    }
  st.i_xy = std::max(ixy, 0.0);
  st.i_yc = st.i_xy;
  st.i_cx = entropy({st.p_x.data(), static_cast<std::size_t>(n)});
  st.zero_information = st.i_xy <= kZeroInformation;
  st.trajectory.push_back({static_cast<std::size_t>(n), st.i_yc, st.i_cx, 1.0, -1, -1, 0.0});
  return st;
}

double merge_delta(const IbState &state, int a, int b) {
  const auto n = static_cast<int>(state.live.size());
  if (a == b || a < 0 || b < 0 || a >= n || b >= n ||
      !state.live[static_cast<std::size_t>(a)] || !state.live[static_cast<std::size_t>(b)])
    throw DataError("merge_delta on dead or identical clusters");
  const double pa = state.p_c(a), pb = state.p_c(b);
  const double p = pa + pb;
  const double pi_a = pa / p, pi_b = pb / p;
  const double js = js_divergence(row_span(state.p_y_given_c, a), row_span(state.p_y_given_c, b),
                                  pi_a, pi_b);
  return p * (js - binary_entropy(pi_a, pi_b) / state.beta);
}

double nmi(const IbState &state) {
  if (state.zero_information) return 1.0;
  return std::clamp(state.i_yc / state.i_xy, 0.0, 1.0);
}

namespace {

void merge_clusters(IbState &st, int a, int b, double delta) {
  const double pa = st.p_c(a), pb = st.p_c(b);
  const double p = pa + pb;
  const double pi_a = pa / p, pi_b = pb / p;
  st.i_yc -= p * js_divergence(row_span(st.p_y_given_c, a), row_span(st.p_y_given_c, b), pi_a,
                               pi_b);
  st.i_cx -= p * binary_entropy(pi_a, pi_b);
  st.p_y_given_c.row(a) = pi_a * st.p_y_given_c.row(a) + pi_b * st.p_y_given_c.row(b);
  st.p_y_given_c.row(b).setZero();
  st.p_c(a) = p;
  st.p_c(b) = 0.0;
  st.live[static_cast<std::size_t>(b)] = false;
  for (auto &c : st.assignment)
    if (c == b) c = a;
  st.trajectory.push_back({st.num_live(), st.i_yc, st.i_cx, nmi(st), a, b, delta});
}

}  // namespace

IbState run_aib(IbState state, const StoppingRule &stop) {
  const std::size_t live0 = state.num_live();
  if (live0 < 1) throw DataError("no live clusters");
  if (stop.kind == StoppingRule::Kind::cluster_count) {
    if (stop.count < 1) throw DataError("target cluster count must be at least 1");
    if (stop.count > live0)
      throw DataError("stopping rule unsatisfiable: " + std::to_string(stop.count) +
                      " clusters requested from " + std::to_string(live0));
  }
  if (state.zero_information) return state;

  const auto n = static_cast<int>(state.live.size());
  const double inf = std::numeric_limits<double>::infinity();
  Matrix delta = Matrix::Constant(n, n, inf);
  for (int a = 0; a < n; ++a) {
    if (!state.live[static_cast<std::size_t>(a)]) continue;
    for (int b = a + 1; b < n; ++b)
      if (state.live[static_cast<std::size_t>(b)]) delta(a, b) = merge_delta(state, a, b);
  }

  std::size_t live = live0;
  while (live > 1) {
    if (stop.kind == StoppingRule::Kind::cluster_count && live <= stop.count) break;
    int best_a = -1, best_b = -1;
    double best = inf;
    for (int a = 0; a < n; ++a) {
      if (!state.live[static_cast<std::size_t>(a)]) continue;
      for (int b = a + 1; b < n; ++b) {
        const double d = delta(a, b);
        if (best_a < 0 ? d < inf : d < best - kTieTolerance) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (stop.kind == StoppingRule::Kind::nmi_threshold) {
      // A merge that would leave less than the required share of relevant
      // information is not applied.
      const double pa = state.p_c(best_a), pb = state.p_c(best_b);
      const double loss = (pa + pb) * js_divergence(row_span(state.p_y_given_c, best_a),
                                                    row_span(state.p_y_given_c, best_b),
                                                    pa / (pa + pb), pb / (pa + pb));
      if (std::clamp((state.i_yc - loss) / state.i_xy, 0.0, 1.0) < stop.nmi) break;
    }
    merge_clusters(state, best_a, best_b, best);
    --live;
    delta.row(best_b).setConstant(inf);
    delta.col(best_b).setConstant(inf);
    for (int c = 0; c < n; ++c) {
      if (c == best_a || !state.live[static_cast<std::size_t>(c)]) continue;
      const int lo = std::min(c, best_a), hi = std::max(c, best_a);
      delta(lo, hi) = merge_delta(state, lo, hi);
    }
  }
  return state;
}

std::pair<double, double> information_from_scratch(const IbState &state) {
  const auto n = static_cast<Eigen::Index>(state.num_segments());
  const Eigen::Index ny = state.p_y_given_x.cols();
  Matrix joint_cy = Matrix::Zero(n, ny);
  Vector pc = Vector::Zero(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const int c = state.assignment[static_cast<std::size_t>(x)];
    joint_cy.row(c) += state.p_x(x) * state.p_y_given_x.row(x);
    pc(c) += state.p_x(x);
  }
  const Eigen::RowVectorXd py = joint_cy.colwise().sum();
  double iyc = 0.0;
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index y = 0; y < ny; ++y) {
      const double j = joint_cy(c, y);
      if (j > 0.0) iyc += j * std::log(j / (pc(c) * py(y)));
    }
  // Hard assignment: I(C,X) = sum_x p(x) log(1/p(c(x))).
  double icx = 0.0;
  for (Eigen::Index x = 0; x < n; ++x)
    if (state.p_x(x) > 0.0)
      icx -= state.p_x(x) * std::log(pc(state.assignment[static_cast<std::size_t>(x)]));
  return {iyc, icx};
}

void write_trajectory_csv(const std::filesystem::path &path,
                          std::span<const MergeRecord> trajectory) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "num_clusters,I_yc,I_cx,NMI,delta\n" << std::setprecision(12);
  for (const auto &r : trajectory)
    out << r.num_clusters << ',' << r.i_yc << ',' << r.i_cx << ',' << r.nmi << ',' << r.delta
        << '\n';
}

}  // namespace ibd
