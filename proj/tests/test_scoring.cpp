#include "doctest.h"
#include "test_util.hpp"

#include "ibdiar/error.hpp"
#include "ibdiar/scoring.hpp"

#include <algorithm>
#include <numeric>

using namespace ibd;

namespace {

Diarization diar(std::initializer_list<Turn> turns, const std::string &id = "r") {
  Diarization d;
  d.recording_id = id;
  d.entries = turns;
  return d;
}

// Exhaustive best mapping over all permutations, small inputs only.
double brute_force_best(const std::vector<std::vector<double>> &w) {
  const std::size_t rows = w.size(), cols = w[0].size();
  std::vector<int> perm(std::max(rows, cols));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      if (static_cast<std::size_t>(perm[i]) < cols) s += w[i][static_cast<std::size_t>(perm[i])];
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("a perfect relabelled hypothesis scores zero") {
  const auto ref = diar({{0, 10, "A"}, {10, 10, "B"}, {20, 5, "A"}, {25, 7, "C"}});
  const auto hyp = diar({{0, 10, "x"}, {10, 10, "y"}, {20, 5, "x"}, {25, 7, "z"}});
  const auto rep = compute_ser(ref, hyp);
  CHECK(rep.ser == 0.0);
  CHECK(rep.ms == 0.0);
  CHECK(rep.fa == 0.0);
  CHECK(rep.mapping.at("x") == "A");
  CHECK(rep.mapping.at("z") == "C");
}

TEST_CASE("all speech given to one label") {
  const auto ref = diar({{0, 10, "A"}, {10, 10, "B"}});
  const auto hyp = diar({{0, 20, "x"}});
  const auto rep = compute_ser(ref, hyp, {0.0, true});
  CHECK(rep.ser == doctest::Approx(50.0));
  CHECK(rep.ser_time == doctest::Approx(10.0));
  CHECK(rep.mapping.size() == 1);
}

TEST_CASE("overlap scoring counts missed speakers") {
  const auto ref = diar({{0, 10, "A"}, {5, 10, "B"}});
  const auto hyp = diar({{0, 15, "x"}});
  const auto rep = compute_ser(ref, hyp, {0.0, true});
  // Scored time 20 s; B is missed on 5..10 and mislabelled on 10..15.
  CHECK(rep.scored_time == doctest::Approx(20.0));
  CHECK(rep.ms_time == doctest::Approx(5.0));
  CHECK(rep.ser_time == doctest::Approx(5.0));
  CHECK(rep.ms == doctest::Approx(25.0));

  const auto skip = compute_ser(ref, hyp, {0.0, false});
  CHECK(skip.scored_time == doctest::Approx(10.0));
  CHECK(skip.ms == 0.0);
}

TEST_CASE("false alarm and missed speech outside the reference") {
  const auto ref = diar({{0, 10, "A"}});
  const auto hyp = diar({{0, 12, "x"}});
  const auto rep = compute_ser(ref, hyp, {0.0, true});
  CHECK(rep.fa_time == doctest::Approx(2.0));
  CHECK(rep.fa == doctest::Approx(20.0));
  CHECK(rep.der == doctest::Approx(20.0));
}

TEST_CASE("scoring is invariant to hypothesis label permutations") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 6.0);
  std::uniform_int_distribution<int> spk(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    Diarization ref, hyp;
    double t = 0.0;
    while (t < 60.0) {
      const double d = u(rng);
      ref.entries.push_back({t, d, "R" + std::to_string(spk(rng))});
      t += d;
    }
    t = 0.0;
    while (t < 60.0) {
      const double d = u(rng);
      hyp.entries.push_back({t, d, "h" + std::to_string(spk(rng))});
      t += d;
    }
    std::array<int, 4> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), rng);
    Diarization renamed = hyp;
    for (auto &e : renamed.entries)
      e.speaker = "q" + std::to_string(perm[static_cast<std::size_t>(e.speaker[1] - '0')]);
    const auto a = compute_ser(ref, hyp);
    const auto b = compute_ser(ref, renamed);
    CHECK(a.ser == doctest::Approx(b.ser).epsilon(1e-12));
    CHECK(a.ms == doctest::Approx(b.ms).epsilon(1e-12));

    // Error times shrink as the collar grows.
    double prev = compute_ser(ref, hyp, {0.0, true}).ser_time;
    for (double c : {0.1, 0.25, 0.5, 1.0}) {
      const double cur = compute_ser(ref, hyp, {c, true}).ser_time;
      CHECK(cur <= prev + 1e-9);
      prev = cur;
    }
  }
}

TEST_CASE("scoring errors") {
  CHECK_THROWS_AS(compute_ser(Diarization{}, diar({{0, 1, "x"}})), DataError);
  CHECK_THROWS_AS(compute_ser(diar({{0, 1, "A"}}, "a"), diar({{0, 1, "x"}}, "b")), DataError);
  CHECK_THROWS_AS(compute_ser(diar({{0, 1, "A"}}), diar({{0, 1, "x"}}), {-1.0, true}), DataError);
  CHECK_THROWS_AS(compute_ser(diar({{0, 0.04, "A"}}), diar({{0, 1, "x"}}), {0.025, true}), DataError);
}

TEST_CASE("Hungarian assignment matches exhaustive search") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng() % 6, cols = 1 + rng() % 6;
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (auto &r : w)
      for (auto &v : r) v = u(rng);
    const auto m = max_weight_assignment(w);
    REQUIRE(m.size() == rows);
    double got = 0.0;
    std::vector<int> used;
    for (std::size_t i = 0; i < rows; ++i) {
      if (m[i] < 0) continue;
      CHECK(std::find(used.begin(), used.end(), m[i]) == used.end());
      used.push_back(m[i]);
      got += w[i][static_cast<std::size_t>(m[i])];
    }
    CHECK(used.size() == std::min(rows, cols));
    CHECK(got == doctest::Approx(brute_force_best(w)).epsilon(1e-12));
  }
  CHECK(max_weight_assignment({}).empty());
}
