#include "ibdiar/diarization.hpp"

#include "ibdiar/error.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ibd {

std::vector<std::string> Diarization::speakers() const {
  std::set<std::string> s;
  for (const auto &e : entries) s.insert(e.speaker);
  return {s.begin(), s.end()};
}

std::map<std::string, double> Diarization::speaker_totals() const {
  std::map<std::string, double> totals;
  for (const auto &e : entries) totals[e.speaker] += e.duration;
  return totals;
}

void Diarization::sort() {
  std::stable_sort(entries.begin(), entries.end(), [](const Turn &a, const Turn &b) {
    return a.start < b.start || (a.start == b.start && a.speaker < b.speaker);
  });
}

Diarization labels_to_diarization(const std::vector<int> &frame_labels, const SpeechMask &mask,
                                  double frame_period, const std::string &recording_id) {
  Diarization diar;
  diar.recording_id = recording_id;
  for (const auto &region : mask.intervals) {
    const auto [first, last] = frame_range(region, frame_period, frame_labels.size());
    std::size_t run = first;
    for (std::size_t k = first; k <= last; ++k) {
      if (k < last && frame_labels[k] == frame_labels[run]) continue;
      if (k > run && frame_labels[run] >= 0) {
        const double start = run == first ? region.start : static_cast<double>(run) * frame_period;
        const double end = k == last ? region.end : static_cast<double>(k) * frame_period;
        if (end > start)
          diar.entries.push_back({start, end - start, "spk" + std::to_string(frame_labels[run])});
      }
      run = k;
    }
  }
  return diar;
}

std::vector<int> diarization_to_labels(const Diarization &diar, std::size_t num_frames,
                                       double frame_period) {
  const auto names = diar.speakers();
  std::vector<int> labels(num_frames, -1);
  for (const auto &e : diar.entries) {
    const int id = static_cast<int>(std::lower_bound(names.begin(), names.end(), e.speaker) -
                                    names.begin());
    const auto [first, last] = frame_range({e.start, e.end()}, frame_period, num_frames);
    for (std::size_t k = first; k < last; ++k) labels[k] = id;
  }
  return labels;
}

namespace {

bool to_double(const std::string &tok, double &out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

}  // namespace

Diarization parse_rttm(const std::string &text) {
  Diarization diar;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<std::string> f;
    for (std::string tok; ss >> tok;) f.push_back(tok);
    if (f.empty() || f[0][0] == '#') continue;
    auto fail = [&](const std::string &why) {
      throw FormatError("RTTM line " + std::to_string(lineno) + ": " + why);
    };
    if (f[0] != "SPEAKER") continue;  // other RTTM record types are not scored
    if (f.size() < 8) fail("expected at least 8 fields");
    Turn t;
    if (!to_double(f[3], t.start) || !to_double(f[4], t.duration)) fail("non-numeric time");
    if (t.start < 0.0) fail("negative start");
    if (t.duration <= 0.0) fail("non-positive duration");
    t.speaker = f[7];
    if (diar.recording_id.empty())
      diar.recording_id = f[1];
    else if (diar.recording_id != f[1])
      fail("mixed recording ids (" + diar.recording_id + ", " + f[1] + ")");
    diar.entries.push_back(std::move(t));
  }
  diar.sort();
  return diar;
}

Diarization read_rttm(const std::filesystem::path &path) {
  return parse_rttm(detail::read_text_file(path));
}

std::string format_rttm(const Diarization &diar) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  const std::string id = diar.recording_id.empty() ? "rec" : diar.recording_id;
  for (const auto &e : diar.entries)
    out << "SPEAKER " << id << " 1 " << e.start << ' ' << e.duration << " <NA> <NA> "
        << e.speaker << " <NA> <NA>\n";
  return out.str();
}

void write_rttm(const std::filesystem::path &path, const Diarization &diar) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_rttm(diar);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace ibd
