#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ibd {

using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Frame-indexed features. Feature files store 32-bit floats; the extractor
// and the synthetic generator emit float-representable values so that files
// round-trip exactly. Frame k covers
// [k * frame_period, k * frame_period + window_length).
struct FeatureStream {
  FeatureMatrix frames;
  double frame_period = 0.010;
  double window_length = 0.025;
  std::string recording_id;

  std::size_t num_frames() const { return static_cast<std::size_t>(frames.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(frames.cols()); }
  double duration() const { return static_cast<double>(num_frames()) * frame_period; }
  bool empty() const { return frames.rows() == 0; }
};

struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const Interval &) const = default;
};

// Sorted, disjoint speech regions in seconds.
struct SpeechMask {
  std::vector<Interval> intervals;

  double total() const;
};

// Frame index nearest to time t. Every time-to-frame conversion in the
// library goes through this so that segment and region edges agree.
std::size_t frame_at(double t, double frame_period);

// Half-open frame range [first, last) covered by an interval.
std::pair<std::size_t, std::size_t> frame_range(const Interval &iv,
                                                double frame_period,
                                                std::size_t num_frames);

struct Audio {
  std::vector<double> samples;
  int sample_rate = 0;
};

// RIFF/WAVE, PCM 16-bit mono only.
Audio decode_wav(const std::filesystem::path &path);
void write_wav(const std::filesystem::path &path, std::span<const double> samples,
               int sample_rate);

struct MfccConfig {
  int num_filters = 26;
  int num_ceps = 19;  // c1..c19; c0 is never emitted
  double preemphasis = 0.97;
  double frame_period = 0.010;
  double window_length = 0.025;
  double energy_floor = 1e-10;
};

FeatureStream extract_mfcc(std::span<const double> samples, int sample_rate,
                           const MfccConfig &config = {});

// Binary feature file: "IBFT", u32 dims, f64 frame_period, u64 frames,
// then row-major f32 values. Little-endian.
void write_features(const std::filesystem::path &path, const FeatureStream &stream);
FeatureStream read_features(const std::filesystem::path &path);
void write_features_csv(const std::filesystem::path &path, const FeatureStream &stream);

// Text: one "start end" pair per line, seconds.
SpeechMask load_speech_mask(const std::filesystem::path &path);
SpeechMask parse_speech_mask(const std::string &text);
void write_speech_mask(const std::filesystem::path &path, const SpeechMask &mask);

}  // namespace ibd
