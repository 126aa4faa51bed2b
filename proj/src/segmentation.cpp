#include "ibdiar/segmentation.hpp"

#include "ibdiar/error.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace ibd {

namespace {
// Times are compared with this slack so that boundaries written as decimals
// (0.2 * 23 vs 4.6) land on the intended side of an interval edge.
constexpr double kTimeEps = 1e-9;
}  // namespace

std::vector<double> SegmentList::durations() const {
  std::vector<double> d;
  d.reserve(segments.size());
  for (const auto &s : segments) d.push_back(s.length());
  return d;
}

PhonemeBoundaryList parse_phoneme_boundaries(const std::string &text) {
  PhonemeBoundaryList phn;
  phn.boundaries = detail::parse_interval_lines(text, "phoneme boundaries");
  for (std::size_t i = 1; i < phn.boundaries.size(); ++i)
    if (phn.boundaries[i].start < phn.boundaries[i - 1].end - kTimeEps)
      throw FormatError("phoneme boundaries overlap at line " + std::to_string(i + 1));
  return phn;
}

PhonemeBoundaryList load_phoneme_boundaries(const std::filesystem::path &path) {
  return parse_phoneme_boundaries(detail::read_text_file(path));
}

void write_phoneme_boundaries(const std::filesystem::path &path,
                              const PhonemeBoundaryList &phn) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::fixed << std::setprecision(6);
  for (const auto &b : phn.boundaries) out << b.start << ' ' << b.end << '\n';
}

SegmentList fixed_length_init(const SpeechMask &mask, double fixed_len) {
  if (!(fixed_len > 0.0)) throw DataError("fixed segment length must be positive");
  SegmentList out;
  out.kind = SegmentKind::fixed;
  out.fixed_len = fixed_len;
  for (const auto &region : mask.intervals) {
    // Index-based boundaries avoid accumulating rounding error.
    for (long k = 0;; ++k) {
      const double start = region.start + static_cast<double>(k) * fixed_len;
      if (start >= region.end - kTimeEps) break;
      double end = region.start + static_cast<double>(k + 1) * fixed_len;
      if (end >= region.end - kTimeEps) end = region.end;
      out.segments.push_back({start, end});
    }
  }
  return out;
}

namespace {

// End times of phonemes inside [lo, hi], ascending.
std::vector<double> end_times_within(const PhonemeBoundaryList &phn, double lo, double hi) {
  std::vector<double> ends;
  for (const auto &b : phn.boundaries)
    if (b.end > lo + kTimeEps && b.end <= hi + kTimeEps) ends.push_back(b.end);
  std::sort(ends.begin(), ends.end());
  return ends;
}

// Ends in (t1, t2] from an ascending list.
std::pair<std::size_t, std::size_t> phn_list(const std::vector<double> &ends, double t1,
                                             double t2) {
  auto first = std::upper_bound(ends.begin(), ends.end(), t1 + kTimeEps);
  auto last = std::upper_bound(first, ends.end(), t2 + kTimeEps);
  return {static_cast<std::size_t>(first - ends.begin()),
          static_cast<std::size_t>(last - ends.begin())};
}

}  // namespace

SegmentList varying_length_init(const SpeechMask &mask, const PhonemeBoundaryList &phn,
                                const VaryingParams &params) {
  if (!(params.min_len > 0.0) || params.max_len < params.min_len)
    throw DataError("varying init requires 0 < min_len <= max_len");
  if (params.phn_rate < 1) throw DataError("phoneme rate must be at least 1");

  SegmentList out;
  out.kind = SegmentKind::varying;
  out.min_len = params.min_len;
  out.max_len = params.max_len;
  out.phn_rate = params.phn_rate;
  const auto rate = static_cast<std::size_t>(params.phn_rate);

  for (const auto &region : mask.intervals) {
    const std::vector<double> ends = end_times_within(phn, region.start, region.end);
    double ptr = region.start;
    while (ptr < region.end - kTimeEps) {
      const double start = ptr;
      double end = ptr + params.min_len;
      if (end >= region.end - kTimeEps) {
        out.segments.push_back({start, region.end});
        break;
      }
      const auto [a0, a1] = phn_list(ends, start, end);
      const std::size_t len_a = a1 - a0;
      if (len_a >= rate) {
        out.segments.push_back({start, end});
        ptr = end;
        continue;
      }
      const double horizon = std::min(start + params.max_len, region.end);
      const auto [b0, b1] = phn_list(ends, end, horizon);
      const std::size_t len_b = b1 - b0;
      if (len_b == 0) {
        // No phoneme ends before the horizon: take the longest allowed span.
        end = horizon;
      } else if (len_a + len_b <= rate) {
        end = ends[b1 - 1];
      } else {
        end = ends[b0 + (rate - len_a) - 1];
      }
      out.segments.push_back({start, end});
      ptr = end;
    }
  }
  return out;
}

SegmentList merge_short_segments(const SegmentList &segs, double frame_period,
                                 std::size_t min_frames) {
  SegmentList out = segs;
  out.segments.clear();
  auto frames_of = [&](const Interval &iv) {
    return frame_at(iv.end, frame_period) - frame_at(iv.start, frame_period);
  };
  // Segments touching end-to-start belong to the same speech region.
  std::vector<std::vector<Interval>> regions;
  for (const auto &s : segs.segments) {
    if (regions.empty() || std::abs(regions.back().back().end - s.start) > kTimeEps)
      regions.emplace_back();
    regions.back().push_back(s);
  }
  for (auto &region : regions) {
    std::vector<Interval> merged;
    for (const auto &s : region) {
      if (!merged.empty() && frames_of(s) < min_frames)
        merged.back().end = s.end;
      else
        merged.push_back(s);
    }
    if (merged.size() > 1 && frames_of(merged.front()) < min_frames) {
      merged[1].start = merged[0].start;
      merged.erase(merged.begin());
    }
    if (merged.size() == 1 && frames_of(merged.front()) < min_frames) continue;
    out.segments.insert(out.segments.end(), merged.begin(), merged.end());
  }
  return out;
}

std::size_t count_phonemes(const PhonemeBoundaryList &phn, const Interval &seg) {
  return static_cast<std::size_t>(
      std::count_if(phn.boundaries.begin(), phn.boundaries.end(), [&](const Interval &b) {
        return b.end > seg.start + kTimeEps && b.end <= seg.end + kTimeEps;
      }));
}

void write_segments_csv(const std::filesystem::path &path, const SegmentList &segs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "start,end\n" << std::fixed << std::setprecision(6);
  for (const auto &s : segs.segments) out << s.start << ',' << s.end << '\n';
}

}  // namespace ibd
