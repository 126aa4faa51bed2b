#include "doctest.h"
#include "test_util.hpp"

#include "ibdiar/error.hpp"
#include "ibdiar/synth.hpp"

#include <cmath>

using namespace ibd;

TEST_CASE("synthetic reference tiles the recording") {
  SynthSpec spec;
  spec.seed = 5;
  const auto c = synth_conversation(spec, "conv");
  CHECK(c.reference.speakers() == std::vector<std::string>{"S0", "S1", "S2"});
  CHECK(c.reference.recording_id == "conv");
  CHECK(c.features.num_frames() == 30000);
  CHECK(c.features.dims() == 19);
  double t = 0.0;
  for (const auto &e : c.reference.entries) {
    CHECK(e.start == doctest::Approx(t).epsilon(1e-12));
    t = e.end();
  }
  CHECK(t == doctest::Approx(300.0));
  for (std::size_t i = 0; i + 1 < c.reference.entries.size(); ++i) {
    CHECK(c.reference.entries[i].speaker != c.reference.entries[i + 1].speaker);
    CHECK(c.reference.entries[i].duration >= spec.turn_min - 0.006);
  }
  // Phonemes tile the recording in order.
  double p = 0.0;
  for (const auto &b : c.phonemes.boundaries) {
    CHECK(b.start == doctest::Approx(p).epsilon(1e-12));
    p = b.end;
  }
  CHECK(p == doctest::Approx(300.0));
  CHECK(c.mask.intervals.size() == 1);
}

TEST_CASE("synthesis is deterministic per seed") {
  SynthSpec spec;
  spec.duration = 60.0;
  spec.seed = 9;
  const auto a = synth_conversation(spec);
  const auto b = synth_conversation(spec);
  CHECK(a.features.frames == b.features.frames);
  CHECK(a.reference.entries.size() == b.reference.entries.size());
  spec.seed = 10;
  CHECK(synth_conversation(spec).features.frames != a.features.frames);
}

TEST_CASE("speaker frames follow the drawn Gaussians") {
  SynthSpec spec;
  spec.seed = 2;
  const auto c = synth_conversation(spec);
  const auto labels = diarization_to_labels(c.reference, c.features.num_frames(), 0.01);
  const auto names = c.reference.speakers();
  for (int s = 0; s < spec.num_speakers; ++s) {
    Vector sum = Vector::Zero(19);
    long n = 0;
    for (std::size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == s) {
        sum += c.features.frames.row(static_cast<Eigen::Index>(k)).transpose();
        ++n;
      }
    REQUIRE(n > 100);
    const Vector mean = sum / static_cast<double>(n);
    const int idx = std::stoi(names[static_cast<std::size_t>(s)].substr(1));
    for (int d = 0; d < 19; ++d) {
      const double sigma = std::sqrt(c.speaker_variances(idx, d) / static_cast<double>(n));
      CHECK(std::abs(mean(d) - c.speaker_means(idx, d)) < 4.0 * sigma);
    }
    CHECK(c.speaker_means.row(idx).norm() == doctest::Approx(spec.mean_radius));
  }
}

TEST_CASE("infeasible specs are rejected") {
  SynthSpec spec;
  spec.num_speakers = 1;
  CHECK_THROWS_AS(synth_conversation(spec), DataError);
  spec = {};
  spec.turn_min = 2.0;
  CHECK_THROWS_AS(synth_conversation(spec), DataError);
  spec = {};
  spec.turn_max = 2.9;
  CHECK_THROWS_AS(synth_conversation(spec), DataError);
  spec = {};
  spec.duration = 1.0;
  CHECK_THROWS_AS(synth_conversation(spec), DataError);
  spec = {};
  spec.rate_min = 0.0;
  CHECK_THROWS_AS(synth_conversation(spec), DataError);
}

TEST_CASE("corpus files are written") {
  SynthSpec spec;
  spec.duration = 30.0;
  const auto c = synth_conversation(spec, "tiny");
  const auto dir = testutil::scratch_dir("corpus");
  write_corpus(dir, c);
  CHECK(read_features(dir / "tiny.feat").frames == c.features.frames);
  CHECK(read_rttm(dir / "tiny.rttm").entries.size() == c.reference.entries.size());
  CHECK(load_phoneme_boundaries(dir / "tiny.phn").boundaries.size() == c.phonemes.boundaries.size());
  CHECK(load_speech_mask(dir / "tiny.mask").intervals.size() == 1);
}

TEST_CASE("brute-force reference on degenerate instances") {
  PosteriorMatrix one;
  one.level = PosteriorLevel::segment;
  one.rows = Matrix::Constant(1, 3, 1.0 / 3.0);
  const auto r = brute_force_reference(one, Vector::Ones(1), 10.0, StoppingRule::threshold(0.4));
  CHECK(r.merges.empty());
  CHECK(r.assignment == std::vector<int>{0});
  CHECK(r.nmi == std::vector<double>{1.0});

  PosteriorMatrix big;
  big.rows = Matrix::Constant(13, 2, 0.5);
  CHECK_THROWS_AS(brute_force_reference(big, Vector::Constant(13, 1.0 / 13), 10.0,
                                        StoppingRule::clusters(2)),
                  DataError);

  // Objective of the identity assignment is I(X,Y) - H(X)/beta.
  Matrix cond(2, 2);
  cond << 1, 0, 0, 1;
  const Vector px = Vector::Constant(2, 0.5);
  CHECK(ib_objective_direct(cond, px, {0, 1}, 10.0) ==
        doctest::Approx(std::log(2.0) - std::log(2.0) / 10.0));
  CHECK(ib_objective_direct(cond, px, {0, 0}, 10.0) == doctest::Approx(0.0));
}
