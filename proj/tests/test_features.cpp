#include "doctest.h"
#include "test_util.hpp"

#include "ibdiar/error.hpp"
#include "ibdiar/features.hpp"

#include <cmath>
#include <complex>
#include <numbers>

using namespace ibd;

namespace {

std::vector<double> sine(double hz, int rate, double seconds) {
  std::vector<double> s(static_cast<std::size_t>(rate * seconds));
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = 0.5 * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return s;
}

// Textbook MFCC of one frame with an O(n^2) DFT, kept apart from the
// production code path.
std::vector<double> reference_mfcc_frame(const std::vector<double> &signal, std::size_t offset,
                                         int rate) {
  const int win = rate / 40, nfft = 512, nfilt = 26, nceps = 19;
  std::vector<double> x(nfft, 0.0);
  for (int i = 0; i < win; ++i) {
    const std::size_t t = offset + static_cast<std::size_t>(i);
    const double prev = t == 0 ? 0.0 : signal[t - 1];
    const double e = t == 0 ? signal[0] : signal[t] - 0.97 * prev;
    x[static_cast<std::size_t>(i)] =
        e * (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (win - 1)));
  }
  std::vector<double> power(nfft / 2 + 1);
  for (int k = 0; k <= nfft / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int n = 0; n < nfft; ++n)
      acc += x[static_cast<std::size_t>(n)] * std::polar(1.0, -2.0 * std::numbers::pi * k * n / nfft);
    power[static_cast<std::size_t>(k)] = std::norm(acc);
  }
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto imel = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> logmel(nfilt);
  for (int m = 0; m < nfilt; ++m) {
    const double top = mel(rate / 2.0);
    const double lo = imel(top * m / (nfilt + 1)), mid = imel(top * (m + 1) / (nfilt + 1)),
                 hi = imel(top * (m + 2) / (nfilt + 1));
    double e = 0.0;
    for (int k = 0; k <= nfft / 2; ++k) {
      const double f = static_cast<double>(k) * rate / nfft;
      double w = 0.0;
      if (f > lo && f < mid) w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi) w = (hi - f) / (hi - mid);
      e += w * power[static_cast<std::size_t>(k)];
    }
    logmel[static_cast<std::size_t>(m)] = std::log(std::max(e, 1e-10));
  }
  std::vector<double> c(nceps);
  for (int n = 1; n <= nceps; ++n) {
    double acc = 0.0;
    for (int m = 0; m < nfilt; ++m)
      acc += logmel[static_cast<std::size_t>(m)] * std::cos(std::numbers::pi * n * (m + 0.5) / nfilt);
    c[static_cast<std::size_t>(n - 1)] = std::sqrt(2.0 / nfilt) * acc;
  }
  return c;
}

}  // namespace

TEST_CASE("decode_wav reads PCM16 mono") {
  const auto dir = testutil::scratch_dir("wav");
  std::vector<std::int16_t> s(16000, 0);
  s[3] = 0x7FFF;
  s[4] = -32768;
  testutil::write_bytes(dir / "a.wav", testutil::wav_bytes(s, 16000));
  const Audio a = decode_wav(dir / "a.wav");
  CHECK(a.sample_rate == 16000);
  REQUIRE(a.samples.size() == 16000);
  CHECK(a.samples[3] == 32767.0 / 32768.0);
  CHECK(a.samples[4] == -1.0);
  CHECK(a.samples[0] == 0.0);
}

TEST_CASE("decode_wav rejects unsupported or broken files") {
  const auto dir = testutil::scratch_dir("wav_bad");
  std::vector<std::int16_t> s(100, 1);
  testutil::write_bytes(dir / "stereo.wav", testutil::wav_bytes(s, 16000, 2));
  CHECK_THROWS_AS(decode_wav(dir / "stereo.wav"), FormatError);
  testutil::write_bytes(dir / "float.wav", testutil::wav_bytes(s, 16000, 1, 16, 3));
  CHECK_THROWS_AS(decode_wav(dir / "float.wav"), FormatError);

  auto bytes = testutil::wav_bytes(s, 16000);
  bytes.resize(bytes.size() - 10);
  testutil::write_bytes(dir / "trunc.wav", bytes);
  CHECK_THROWS_AS(decode_wav(dir / "trunc.wav"), IoError);
  CHECK_THROWS_AS(decode_wav(dir / "missing.wav"), IoError);
  testutil::write_text(dir / "text.wav", "this is not audio at all");
  CHECK_THROWS_AS(decode_wav(dir / "text.wav"), FormatError);
}

TEST_CASE("write_wav round trip") {
  const auto dir = testutil::scratch_dir("wav_rt");
  const auto sig = sine(440.0, 8000, 0.5);
  write_wav(dir / "s.wav", sig, 8000);
  const Audio a = decode_wav(dir / "s.wav");
  CHECK(a.sample_rate == 8000);
  REQUIRE(a.samples.size() == sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) CHECK(std::abs(a.samples[i] - sig[i]) <= 1.0 / 32768.0);
}

TEST_CASE("MFCC frame count and shape") {
  const std::vector<double> ten_s(160000, 0.0);
  const FeatureStream f = extract_mfcc(ten_s, 16000);
  CHECK(f.num_frames() == 998);
  CHECK(f.dims() == 19);
  CHECK(f.frame_period == doctest::Approx(0.010));

  for (std::size_t len : {400u, 401u, 559u, 560u, 8000u}) {
    const std::vector<double> x(len, 0.0);
    CHECK(extract_mfcc(x, 16000).num_frames() == (len - 400) / 160 + 1);
  }
  CHECK(extract_mfcc(std::vector<double>(8000, 0.0), 8000).num_frames() == (8000 - 200) / 80 + 1);
  CHECK_THROWS_AS(extract_mfcc(std::vector<double>(399, 0.0), 16000), DataError);
  CHECK_THROWS_AS(extract_mfcc(std::vector<double>(44100, 0.0), 44100), DataError);
}

TEST_CASE("MFCC of silence is constant across frames") {
  const FeatureStream f = extract_mfcc(std::vector<double>(16000, 0.0), 16000);
  for (Eigen::Index k = 1; k < f.frames.rows(); ++k) CHECK(f.frames.row(k) == f.frames.row(0));
  CHECK(f.frames.allFinite());
}

TEST_CASE("MFCC distinguishes tones and is deterministic") {
  const auto a = extract_mfcc(sine(440.0, 16000, 1.0), 16000);
  const auto b = extract_mfcc(sine(880.0, 16000, 1.0), 16000);
  CHECK((a.frames - b.frames).cwiseAbs().maxCoeff() > 0.0);
  const auto a2 = extract_mfcc(sine(440.0, 16000, 1.0), 16000);
  CHECK(a.frames == a2.frames);
}

TEST_CASE("MFCC matches a direct DFT evaluation") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<double> sig(16000);
  for (auto &v : sig) v = n(rng);
  const auto f = extract_mfcc(sig, 16000);
  for (std::size_t frame : {0u, 1u, 50u, 97u}) {
    const auto ref = reference_mfcc_frame(sig, frame * 160, 16000);
    for (int d = 0; d < 19; ++d)
      CHECK(f.frames(static_cast<Eigen::Index>(frame), d) ==
            doctest::Approx(ref[static_cast<std::size_t>(d)]).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("feature file round trip is bit exact") {
  const auto dir = testutil::scratch_dir("feat");
  FeatureStream s;
  s.frames = FeatureMatrix::Random(37, 19).unaryExpr([](double v) { return double(float(v)); });
  s.frame_period = 0.01;
  write_features(dir / "rec.feat", s);
  const FeatureStream r = read_features(dir / "rec.feat");
  CHECK(r.frames == s.frames);
  CHECK(r.frame_period == s.frame_period);
  CHECK(r.recording_id == "rec");

  FeatureStream empty;
  empty.frames.resize(0, 19);
  write_features(dir / "e.feat", empty);
  CHECK(read_features(dir / "e.feat").num_frames() == 0);
}

TEST_CASE("feature file errors") {
  const auto dir = testutil::scratch_dir("feat_bad");
  FeatureStream s;
  s.frames = FeatureMatrix::Zero(100, 19);
  write_features(dir / "ok.feat", s);
  auto bytes = testutil::read_bytes(dir / "ok.feat");

  auto trunc = bytes;
  trunc.resize(trunc.size() - 19 * 4);  // 99 frames of body
  testutil::write_bytes(dir / "trunc.feat", trunc);
  CHECK_THROWS_AS(read_features(dir / "trunc.feat"), IoError);

  auto magic = bytes;
  magic[0] = 'X';
  testutil::write_bytes(dir / "magic.feat", magic);
  CHECK_THROWS_AS(read_features(dir / "magic.feat"), FormatError);

  auto zero_dims = bytes;
  zero_dims[4] = zero_dims[5] = zero_dims[6] = zero_dims[7] = 0;
  testutil::write_bytes(dir / "dims.feat", zero_dims);
  CHECK_THROWS_AS(read_features(dir / "dims.feat"), FormatError);

  auto extra = bytes;
  extra.push_back(0);
  testutil::write_bytes(dir / "extra.feat", extra);
  CHECK_THROWS_AS(read_features(dir / "extra.feat"), FormatError);

  auto nan = bytes;
  const std::size_t off = 24;
  nan[off] = 0x00; nan[off + 1] = 0x00; nan[off + 2] = 0xc0; nan[off + 3] = 0x7f;
  testutil::write_bytes(dir / "nan.feat", nan);
  CHECK_THROWS_AS(read_features(dir / "nan.feat"), FormatError);
}

TEST_CASE("speech mask parsing") {
  CHECK(parse_speech_mask("0.0 10.0").intervals.size() == 1);
  CHECK_THROWS_AS(parse_speech_mask("0 5\n4 8"), FormatError);
  const auto two = parse_speech_mask("0 5\n6 8\n");
  REQUIRE(two.intervals.size() == 2);
  CHECK(two.intervals[1] == Interval{6.0, 8.0});
  CHECK(two.total() == doctest::Approx(7.0));
  CHECK(parse_speech_mask("# comment\n\n0 1\n1 2\n").intervals.size() == 2);
  CHECK_THROWS_AS(parse_speech_mask("3 2"), FormatError);
  CHECK_THROWS_AS(parse_speech_mask("0 1 2"), FormatError);
  CHECK_THROWS_AS(parse_speech_mask("a b"), FormatError);
  CHECK_THROWS_AS(parse_speech_mask("5 6\n0 1"), FormatError);

  const auto dir = testutil::scratch_dir("mask");
  write_speech_mask(dir / "m.txt", two);
  CHECK(load_speech_mask(dir / "m.txt").intervals == two.intervals);
  CHECK_THROWS_AS(load_speech_mask(dir / "nope.txt"), IoError);
}

TEST_CASE("frame helpers") {
  CHECK(frame_at(2.5, 0.01) == 250);
  CHECK(frame_at(0.004, 0.01) == 0);
  const auto [a, b] = frame_range({1.0, 2.0}, 0.01, 1000);
  CHECK(a == 100);
  CHECK(b == 200);
  const auto [c, d] = frame_range({1.0, 20.0}, 0.01, 1000);
  CHECK(c == 100);
  CHECK(d == 1000);
}
