#include "doctest.h"
#include "test_util.hpp"

#include "ibdiar/discriminative.hpp"
#include "ibdiar/error.hpp"

#include <Eigen/LU>

#include <cmath>

using namespace ibd;

namespace {

Diarization diar_with(std::initializer_list<Turn> turns) {
  Diarization d;
  d.recording_id = "r";
  d.entries = turns;
  return d;
}

// Gaussian classes with means spread along random directions.
FeatureStream gaussian_classes(std::mt19937_64 &rng, int k, long per_class, long dims,
                               double sep, std::vector<int> &labels) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureStream s;
  s.frames.resize(k * per_class, dims);
  labels.assign(static_cast<std::size_t>(k * per_class), 0);
  Matrix means(k, dims);
  for (long i = 0; i < means.size(); ++i) means.data()[i] = sep * n(rng);
  for (int c = 0; c < k; ++c)
    for (long i = 0; i < per_class; ++i) {
      const long row = c * per_class + i;
      for (long d = 0; d < dims; ++d) s.frames(row, d) = means(c, d) + n(rng);
      labels[static_cast<std::size_t>(row)] = c;
    }
  return s;
}

Matrix covariance(const FeatureMatrix &x) {
  const Matrix c = x.rowwise() - x.colwise().mean();
  return (c.transpose() * c) / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("pruning by total duration") {
  const auto d = diar_with({{0, 60, "a"}, {60, 40, "b"}, {100, 2, "c"}, {102, 60, "a"}});
  const auto p = prune_short_clusters(d, 3.0);
  CHECK(p.kept_labels == std::vector<std::string>{"a", "b"});
  CHECK(p.diarization.entries.size() == d.entries.size());
  CHECK(prune_short_clusters(diar_with({{0, 5, "x"}, {5, 4, "y"}})).kept_labels.size() == 2);
  CHECK_THROWS_AS(prune_short_clusters(diar_with({{0, 2, "x"}, {2, 1, "y"}})), TrainingImpossibleError);
  CHECK_THROWS_AS(prune_short_clusters(Diarization{}), DataError);

  const auto labels = training_labels(d, p.kept_labels, 20000, 0.01);
  CHECK(labels[0] == 0);
  CHECK(labels[7000] == 1);
  CHECK(labels[10050] == -1);
  CHECK(labels[10300] == 0);
  CHECK(labels[19999] == -1);
}

TEST_CASE("MFNN gradient agrees with central differences") {
  std::mt19937_64 rng(1);
  std::vector<int> labels;
  auto s = gaussian_classes(rng, 3, 40, 19, 1.0, labels);
  labels[5] = -1;
  MfnnConfig cfg;
  cfg.seed = 42;
  MfnnModel m = init_mfnn(s.frames, 3, cfg);
  // Move off the symmetric initial point so every layer carries signal.
  Vector p = mfnn_parameters(m);
  std::normal_distribution<double> n(0.0, 0.1);
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += n(rng);
  set_mfnn_parameters(m, p);

  const Vector g = mfnn_gradient(m, s.frames, labels);
  REQUIRE(g.size() == p.size());
  std::uniform_int_distribution<Eigen::Index> pick(0, p.size() - 1);
  const double h = 1e-5;
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index i = trial < 6 ? p.size() - 1 - trial : pick(rng);
    MfnnModel plus = m, minus = m;
    Vector pp = p, pm = p;
    pp(i) += h;
    pm(i) -= h;
    set_mfnn_parameters(plus, pp);
    set_mfnn_parameters(minus, pm);
    const double fd = (mfnn_loss(plus, s.frames, labels) - mfnn_loss(minus, s.frames, labels)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(g(i)), 1e-8});
    CHECK(std::abs(fd - g(i)) / denom < 1e-4);
  }
  CHECK_THROWS_AS(set_mfnn_parameters(m, Vector::Zero(3)), DataError);
}

TEST_CASE("MFNN learns separable classes and is reproducible") {
  std::mt19937_64 rng(2);
  std::vector<int> labels;
  auto s = gaussian_classes(rng, 2, 1500, 19, 1.0, labels);
  MfnnConfig cfg;
  cfg.seed = 7;
  const auto m = train_mfnn(s, labels, cfg);
  CHECK(m.final_loss < m.initial_loss);
  CHECK(mfnn_accuracy(m, s.frames, labels) > 0.95);
  CHECK(m.num_classes() == 2);
  CHECK(m.latent_dims() == 19);

  const auto again = train_mfnn(s, labels, cfg);
  CHECK(again.w1 == m.w1);
  CHECK(again.w3 == m.w3);
  CHECK(again.final_loss == m.final_loss);

  const auto z = project_mfnn(m, s);
  CHECK(z.dims() == 19);
  CHECK(z.num_frames() == s.num_frames());
  CHECK(project_mfnn(m, s).frames == z.frames);
}

TEST_CASE("MFNN on random labels stays near ln K") {
  std::mt19937_64 rng(3);
  std::vector<int> labels;
  auto s = gaussian_classes(rng, 1, 6000, 19, 0.0, labels);
  std::uniform_int_distribution<int> lab(0, 3);
  for (auto &l : labels) l = lab(rng);
  MfnnConfig cfg;
  cfg.seed = 3;
  const auto m = train_mfnn(s, labels, cfg);
  CHECK(std::abs(m.final_loss - std::log(4.0)) < 0.1 * std::log(4.0));
}

TEST_CASE("MFNN preconditions") {
  FeatureStream s;
  s.frames = FeatureMatrix::Random(10, 19);
  CHECK_THROWS_AS(train_mfnn(s, std::vector<int>(10, 0)), TrainingImpossibleError);
  std::vector<int> gap(10, 0);
  gap[0] = 2;
  CHECK_THROWS_AS(train_mfnn(s, gap), DataError);
  CHECK_THROWS_AS(train_mfnn(s, std::vector<int>(9, 0)), DataError);

  MfnnModel zero = init_mfnn(s.frames, 2, {});
  zero.w1.setZero();
  zero.w2.setZero();
  zero.b2.setLinSpaced(19, -1.0, 1.0);
  const auto z = project_mfnn(zero, s);
  for (long k = 0; k < 10; ++k) CHECK(z.frames.row(k) == zero.b2.transpose());
  FeatureStream wrong;
  wrong.frames = FeatureMatrix::Zero(2, 3);
  CHECK_THROWS_AS(project_mfnn(zero, wrong), DataError);
}

TEST_CASE("MFNN dump layout") {
  FeatureStream s;
  s.frames = FeatureMatrix::Random(30, 19);
  const auto m = init_mfnn(s.frames, 3, {});
  const auto dir = testutil::scratch_dir("mfnn");
  write_mfnn(dir / "m.bin", m);
  const auto bytes = testutil::read_bytes(dir / "m.bin");
  const std::size_t doubles = 19 * 2 + 19 * 34 + 34 + 34 * 19 + 19 + 19 * 3 + 3;
  CHECK(bytes.size() == 4 + 16 + 8 * doubles);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "IBNN");
}

TEST_CASE("two-class LDA direction") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.5);
  FeatureStream s;
  s.frames.resize(2000, 2);
  std::vector<int> labels(2000);
  for (long i = 0; i < 2000; ++i) {
    labels[static_cast<std::size_t>(i)] = i < 1000 ? 0 : 1;
    s.frames(i, 0) = (i < 1000 ? 0.0 : 4.0) + n(rng);
    s.frames(i, 1) = n(rng);
  }
  const auto lda = train_lda(s, labels);
  REQUIRE(lda.output_dims() == 1);
  const Eigen::Vector2d v = lda.projection.col(0).normalized();
  // Closed form: S_W^-1 (mu1 - mu0).
  Matrix sw = Matrix::Zero(2, 2);
  for (long i = 0; i < 2000; ++i) {
    const Eigen::Vector2d d = s.frames.row(i).transpose() - lda.class_means.row(labels[static_cast<std::size_t>(i)]).transpose();
    sw += d * d.transpose();
  }
  const Eigen::Vector2d closed =
      (sw.inverse() * (lda.class_means.row(1) - lda.class_means.row(0)).transpose()).normalized();
  CHECK(std::abs(std::abs(v.dot(closed)) - 1.0) < 1e-9);
  CHECK(std::abs(v(0)) > 0.99);

  const auto z = project_lda(lda, s);
  const double m0 = z.frames.topRows(1000).mean(), m1 = z.frames.bottomRows(1000).mean();
  CHECK(m1 > m0);  // sign convention keeps class order along the axis

  LdaModel zero = lda;
  zero.projection.setZero();
  CHECK(project_lda(zero, s).frames.isZero());
}

TEST_CASE("LDA output dimensionality and errors") {
  std::mt19937_64 rng(5);
  std::vector<int> labels;
  auto s20 = gaussian_classes(rng, 20, 60, 19, 1.0, labels);
  const auto lda20 = train_lda(s20, labels);
  CHECK(lda20.output_dims() == 19);
  for (Eigen::Index j = 1; j < lda20.eigenvalues.size(); ++j)
    CHECK(lda20.eigenvalues(j) <= lda20.eigenvalues(j - 1));

  auto s2 = gaussian_classes(rng, 2, 60, 19, 1.0, labels);
  CHECK(train_lda(s2, labels).output_dims() == 1);

  std::vector<int> one(labels.size(), 0);
  CHECK_THROWS_AS(train_lda(s2, one), TrainingImpossibleError);
  std::vector<int> lonely(labels.size(), 0);
  lonely[0] = 1;
  CHECK_THROWS_AS(train_lda(s2, lonely), DataError);
  FeatureStream wrong;
  wrong.frames = FeatureMatrix::Zero(2, 3);
  CHECK_THROWS_AS(project_lda(lda20, wrong), DataError);
}

TEST_CASE("LDA beats random projections on the Fisher ratio") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> labels;
    auto s = gaussian_classes(rng, 2, 400, 19, 0.6, labels);
    // Correlated, anisotropic noise so the best direction is non-trivial.
    Matrix mix(19, 19);
    for (long i = 0; i < mix.size(); ++i) mix.data()[i] = n(rng);
    s.frames = s.frames * mix;
    const auto lda = train_lda(s, labels);
    const double best = fisher_ratio(project_lda(lda, s).frames, labels);
    for (int r = 0; r < 100; ++r) {
      Matrix w(19, 1);
      for (long i = 0; i < 19; ++i) w(i, 0) = n(rng);
      CHECK(fisher_ratio(s.frames * w, labels) <= best * (1 + 1e-9));
    }
  }
}

TEST_CASE("PCA orthogonalises and preserves total variance") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureStream s;
  s.frames.resize(3000, 19);
  Matrix mix(19, 19);
  for (long i = 0; i < mix.size(); ++i) mix.data()[i] = n(rng);
  for (long i = 0; i < s.frames.size(); ++i) s.frames.data()[i] = n(rng);
  s.frames = s.frames * mix;
  const auto out = pca_orthogonalize(s);
  CHECK(out.dims() == 19);
  const Matrix c = covariance(out.frames);
  const double maxvar = c.diagonal().maxCoeff();
  Matrix off = c;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() < 1e-8 * maxvar);
  CHECK(std::abs(c.trace() - covariance(s.frames).trace()) < 1e-9 * c.trace());
  for (Eigen::Index j = 1; j < 19; ++j) CHECK(c(j, j) <= c(j - 1, j - 1) * (1 + 1e-12));

  const auto pca = fit_pca(s.frames);
  CHECK((pca.rotation.transpose() * pca.rotation - Matrix::Identity(19, 19)).cwiseAbs().maxCoeff() < 1e-9);

  // White input keeps an identity covariance.
  FeatureStream w;
  w.frames.resize(5000, 4);
  for (long i = 0; i < w.frames.size(); ++i) w.frames.data()[i] = n(rng);
  const Matrix before = covariance(w.frames);
  const Matrix after = covariance(pca_orthogonalize(w).frames);
  CHECK(std::abs(after.trace() - before.trace()) < 1e-9);

  FeatureStream tiny;
  tiny.frames = FeatureMatrix::Random(5, 19);
  CHECK_THROWS_AS(pca_orthogonalize(tiny), DataError);
}
