#include "ibdiar/features.hpp"

#include "ibdiar/error.hpp"
#include "text_io.hpp"

#include <fftw3.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <numbers>

namespace ibd {

double SpeechMask::total() const {
  double t = 0.0;
  for (const auto &iv : intervals) t += iv.length();
  return t;
}

std::size_t frame_at(double t, double frame_period) {
  if (t <= 0.0) return 0;
  return static_cast<std::size_t>(std::llround(t / frame_period));
}

std::pair<std::size_t, std::size_t> frame_range(const Interval &iv, double frame_period,
                                                std::size_t num_frames) {
  std::size_t a = std::min(frame_at(iv.start, frame_period), num_frames);
  std::size_t b = std::min(frame_at(iv.end, frame_period), num_frames);
  return {a, std::max(a, b)};
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t le32(const unsigned char *p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
std::uint16_t le16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream &out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char *>(b), 4);
}
void put16(std::ostream &out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char *>(b), 2);
}

}  // namespace

Audio decode_wav(const std::filesystem::path &path) {
  std::string bytes = detail::read_text_file(path);
  const auto *p = reinterpret_cast<const unsigned char *>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12) throw IoError("truncated WAV header: " + path.string());
  if (std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path.string());

  bool have_fmt = false;
  int rate = 0;
  std::size_t pos = 12;
  while (true) {
    if (pos + 8 > n) throw IoError("WAV ended before data chunk: " + path.string());
    const unsigned char *chunk = p + pos;
    std::uint32_t size = le32(chunk + 4);
    const unsigned char *body = chunk + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || pos + 8 + size > n) throw IoError("truncated fmt chunk");
      std::uint16_t format = le16(body);
      std::uint16_t channels = le16(body + 2);
      std::uint16_t bits = le16(body + 14);
      rate = static_cast<int>(le32(body + 4));
      if (format != 1) throw FormatError("unsupported WAV encoding (PCM only)");
      if (channels != 1)
        throw FormatError("unsupported channel count " + std::to_string(channels));
      if (bits != 16) throw FormatError("unsupported sample width " + std::to_string(bits));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      if (pos + 8 + size > n) throw IoError("truncated WAV data: " + path.string());
      if (size < 2) throw FormatError("WAV has no samples");
      Audio audio;
      audio.sample_rate = rate;
      audio.samples.resize(size / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        auto v = static_cast<std::int16_t>(le16(body + 2 * i));
        audio.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return audio;
    }
    pos += 8 + size + (size & 1u);
  }
}

void write_wav(const std::filesystem::path &path, std::span<const double> samples,
               int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate * 2));
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, data_bytes);
  for (double s : samples) {
    double c = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(c)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// MFCC

namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex fftw_plan_mutex;

struct PlanDeleter {
  void operator()(fftw_plan_s *plan) const {
    std::lock_guard lock(fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
  void operator()(void *p) const { fftw_free(p); }
};

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters equally spaced on the mel scale between 0 and Nyquist,
// evaluated on the FFT bin grid.
std::vector<std::vector<double>> mel_filterbank(int num_filters, int fft_size,
                                                int sample_rate) {
  const int bins = fft_size / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(num_filters + 2);
  for (int m = 0; m < num_filters + 2; ++m)
    centers[m] = mel_to_hz(mel_hi * m / (num_filters + 1));

  std::vector<std::vector<double>> bank(num_filters, std::vector<double>(bins, 0.0));
  for (int m = 0; m < num_filters; ++m) {
    const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      if (f > lo && f < mid)
        bank[m][k] = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        bank[m][k] = (hi - f) / (hi - mid);
    }
  }
  return bank;
}

}  // namespace

FeatureStream extract_mfcc(std::span<const double> samples, int sample_rate,
                           const MfccConfig &config) {
  if (sample_rate != 8000 && sample_rate != 16000)
    throw DataError("unsupported sample rate " + std::to_string(sample_rate));
  if (config.num_ceps < 1 || config.num_ceps >= config.num_filters)
    throw DataError("num_ceps must be in [1, num_filters)");

  const auto win = static_cast<std::size_t>(std::lround(config.window_length * sample_rate));
  const auto shift = static_cast<std::size_t>(std::lround(config.frame_period * sample_rate));
  if (samples.size() < win) throw DataError("audio shorter than one analysis window");
  const std::size_t num_frames = (samples.size() - win) / shift + 1;

  std::size_t fft_size = 1;
  while (fft_size < win) fft_size <<= 1;
  const std::size_t bins = fft_size / 2 + 1;

  std::vector<double> emphasized(samples.size());
  emphasized[0] = samples[0];
  for (std::size_t i = 1; i < samples.size(); ++i)
    emphasized[i] = samples[i] - config.preemphasis * samples[i - 1];

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (win - 1));

  const auto bank = mel_filterbank(config.num_filters, static_cast<int>(fft_size), sample_rate);

  const int M = config.num_filters;
  std::vector<std::vector<double>> dct(config.num_ceps, std::vector<double>(M));
  for (int n = 0; n < config.num_ceps; ++n)
    for (int m = 0; m < M; ++m)
      dct[n][m] = std::sqrt(2.0 / M) * std::cos(std::numbers::pi * (n + 1) * (m + 0.5) / M);

  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(fft_size));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(bins));
  Plan plan;
  {
    std::lock_guard lock(fftw_plan_mutex);
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(fft_size), in.get(), out.get(),
                                    FFTW_ESTIMATE));
  }

  FeatureStream stream;
  stream.frame_period = config.frame_period;
  stream.window_length = config.window_length;
  stream.frames.resize(static_cast<Eigen::Index>(num_frames), config.num_ceps);

  std::vector<double> power(bins), logmel(M);
  for (std::size_t f = 0; f < num_frames; ++f) {
    const double *src = emphasized.data() + f * shift;
    for (std::size_t i = 0; i < win; ++i) in.get()[i] = src[i] * window[i];
    std::fill(in.get() + win, in.get() + fft_size, 0.0);
    fftw_execute_dft_r2c(plan.get(), in.get(), out.get());
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = out.get()[k][0], im = out.get()[k][1];
      power[k] = re * re + im * im;
    }
    for (int m = 0; m < M; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += bank[m][k] * power[k];
      logmel[m] = std::log(std::max(e, config.energy_floor));
    }
    for (int n = 0; n < config.num_ceps; ++n) {
      double c = 0.0;
      for (int m = 0; m < M; ++m) c += dct[n][m] * logmel[m];
      stream.frames(static_cast<Eigen::Index>(f), n) = static_cast<float>(c);  // f32 grid
    }
  }
  return stream;
}

// ---------------------------------------------------------------------------
// Feature files

namespace {
constexpr std::array<char, 4> kMagic = {'I', 'B', 'F', 'T'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;
}  // namespace

void write_features(const std::filesystem::path &path, const FeatureStream &stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto dims = static_cast<std::uint32_t>(stream.dims());
  const auto frames = static_cast<std::uint64_t>(stream.num_frames());
  out.write(kMagic.data(), 4);
  out.write(reinterpret_cast<const char *>(&dims), sizeof dims);
  out.write(reinterpret_cast<const char *>(&stream.frame_period), sizeof(double));
  out.write(reinterpret_cast<const char *>(&frames), sizeof frames);
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> body =
      stream.frames.cast<float>();
  out.write(reinterpret_cast<const char *>(body.data()),
            static_cast<std::streamsize>(frames * dims * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureStream read_features(const std::filesystem::path &path) {
  const std::string bytes = detail::read_text_file(path);
  if (bytes.size() < kHeaderBytes) throw IoError("truncated feature header: " + path.string());
  if (std::memcmp(bytes.data(), kMagic.data(), 4) != 0)
    throw FormatError("bad feature file magic: " + path.string());
  std::uint32_t dims = 0;
  double period = 0.0;
  std::uint64_t frames = 0;
  std::memcpy(&dims, bytes.data() + 4, 4);
  std::memcpy(&period, bytes.data() + 8, 8);
  std::memcpy(&frames, bytes.data() + 16, 8);
  if (dims == 0 || dims > (1u << 20)) throw FormatError("feature dims out of range");
  if (!(period > 0.0) || !std::isfinite(period)) throw FormatError("bad frame period");
  if (frames > (std::uint64_t(1) << 40) / dims) throw FormatError("feature frame count out of range");
  const std::uint64_t body = frames * static_cast<std::uint64_t>(dims) * sizeof(float);
  if (bytes.size() - kHeaderBytes < body)
    throw IoError("truncated feature body: " + path.string());
  if (bytes.size() - kHeaderBytes > body)
    throw FormatError("trailing bytes after feature body: " + path.string());

  FeatureStream stream;
  stream.frame_period = period;
  stream.recording_id = path.stem().string();
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values(
      static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(dims));
  std::memcpy(values.data(), bytes.data() + kHeaderBytes, body);
  stream.frames = values.cast<double>();
  if (!stream.frames.allFinite()) throw FormatError("non-finite feature values");
  return stream;
}

void write_features_csv(const std::filesystem::path &path, const FeatureStream &stream) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(9);
  for (Eigen::Index r = 0; r < stream.frames.rows(); ++r) {
    for (Eigen::Index c = 0; c < stream.frames.cols(); ++c)
      out << (c ? "," : "") << stream.frames(r, c);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Speech mask

SpeechMask parse_speech_mask(const std::string &text) {
  SpeechMask mask;
  mask.intervals = detail::parse_interval_lines(text, "speech mask");
  for (std::size_t i = 1; i < mask.intervals.size(); ++i)
    if (mask.intervals[i].start < mask.intervals[i - 1].end)
      throw FormatError("speech mask regions overlap at line " + std::to_string(i + 1));
  return mask;
}

SpeechMask load_speech_mask(const std::filesystem::path &path) {
  return parse_speech_mask(detail::read_text_file(path));
}

void write_speech_mask(const std::filesystem::path &path, const SpeechMask &mask) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::fixed << std::setprecision(6);
  for (const auto &iv : mask.intervals) out << iv.start << ' ' << iv.end << '\n';
}

}  // namespace ibd
