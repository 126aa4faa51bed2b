#include "ibdiar/discriminative.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <span>

namespace ibd {

PruneResult prune_short_clusters(const Diarization &diar, double min_total) {
  if (diar.entries.empty()) throw DataError("cannot prune an empty diarization");
  PruneResult out{diar, {}};
  for (const auto &[label, total] : diar.speaker_totals())
    if (total >= min_total) out.kept_labels.push_back(label);
  if (out.kept_labels.empty())
    throw TrainingImpossibleError("every cluster is shorter than " + std::to_string(min_total) +
                                  " s");
  return out;
}

std::vector<int> training_labels(const Diarization &diar, const std::vector<std::string> &kept,
                                 std::size_t num_frames, double frame_period) {
  std::vector<int> labels(num_frames, -1);
  for (const auto &e : diar.entries) {
    auto it = std::find(kept.begin(), kept.end(), e.speaker);
    if (it == kept.end()) continue;
    const int id = static_cast<int>(it - kept.begin());
    const auto [first, last] = frame_range({e.start, e.end()}, frame_period, num_frames);
    for (std::size_t k = first; k < last; ++k) labels[k] = id;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// MFNN

namespace {

struct Batch {
  Matrix x;  // standardised inputs
  std::vector<int> y;
};

std::size_t count_classes(const std::vector<int> &labels) {
  int k = -1;
  for (int l : labels) k = std::max(k, l);
  return static_cast<std::size_t>(k + 1);
}

std::vector<std::size_t> labelled_rows(const std::vector<int> &labels) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) rows.push_back(i);
  return rows;
}

Matrix standardise(const MfnnModel &m, const FeatureMatrix &x) {
  Matrix z = x.rowwise() - m.input_mean.transpose();
  return z.array().rowwise() * m.input_scale.transpose().array();
}

Batch gather(const MfnnModel &m, const FeatureMatrix &x, const std::vector<int> &labels,
             std::span<const std::size_t> rows) {
  Batch b;
  b.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  b.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    b.y[i] = labels[rows[i]];
  }
  b.x = standardise(m, b.x);
  return b;
}

struct Forward {
  Matrix h1, h2, prob;
};

Forward forward(const MfnnModel &m, const Matrix &x) {
  Forward f;
  f.h1 = ((x * m.w1).rowwise() + m.b1.transpose()).array().tanh();
  f.h2 = (f.h1 * m.w2).rowwise() + m.b2.transpose();
  Matrix logits = (f.h2 * m.w3).rowwise() + m.b3.transpose();
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row = (row.array() - row.maxCoeff()).exp().matrix();
    row /= row.sum();
  }
  f.prob = std::move(logits);
  return f;
}

double cross_entropy(const Matrix &prob, const std::vector<int> &y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    loss -= std::log(std::max(prob(static_cast<Eigen::Index>(i), y[i]), 1e-300));
  return loss / static_cast<double>(y.size());
}

struct Gradient {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
};

Gradient backward(const MfnnModel &m, const Matrix &x, const Forward &f,
                  const std::vector<int> &y) {
  const double inv_n = 1.0 / static_cast<double>(y.size());
  Matrix d3 = f.prob;
  for (std::size_t i = 0; i < y.size(); ++i) d3(static_cast<Eigen::Index>(i), y[i]) -= 1.0;
  d3 *= inv_n;
  Gradient g;
  g.w3 = f.h2.transpose() * d3;
  g.b3 = d3.colwise().sum().transpose();
  const Matrix d2 = d3 * m.w3.transpose();
  g.w2 = f.h1.transpose() * d2;
  g.b2 = d2.colwise().sum().transpose();
  const Matrix d1 = (d2 * m.w2.transpose()).array() * (1.0 - f.h1.array().square());
  g.w1 = x.transpose() * d1;
  g.b1 = d1.colwise().sum().transpose();
  return g;
}

void glorot(Matrix &w, std::mt19937_64 &rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
}

}  // namespace

MfnnModel init_mfnn(const FeatureMatrix &x, std::size_t num_classes, const MfnnConfig &config) {
  if (x.rows() < 1) throw DataError("no training frames");
  const Eigen::Index in = x.cols();
  MfnnModel m;
  m.seed = config.seed;
  m.learning_rate = config.learning_rate;
  m.input_mean = x.colwise().mean().transpose();
  const Vector var = (x.rowwise() - m.input_mean.transpose()).array().square().colwise().mean();
  m.input_scale = var.array().max(1e-12).sqrt().inverse();
  m.w1.resize(in, config.hidden1);
  m.w2.resize(config.hidden1, config.hidden2);
  m.w3.resize(config.hidden2, static_cast<Eigen::Index>(num_classes));
  std::mt19937_64 rng(config.seed);
  glorot(m.w1, rng);
  glorot(m.w2, rng);
  glorot(m.w3, rng);
  m.b1 = Vector::Zero(config.hidden1);
  m.b2 = Vector::Zero(config.hidden2);
  m.b3 = Vector::Zero(static_cast<Eigen::Index>(num_classes));
  return m;
}

double mfnn_loss(const MfnnModel &model, const FeatureMatrix &x, const std::vector<int> &labels) {
  const auto rows = labelled_rows(labels);
  if (rows.empty()) throw DataError("no labelled frames");
  const Batch b = gather(model, x, labels, rows);
  return cross_entropy(forward(model, b.x).prob, b.y);
}

double mfnn_accuracy(const MfnnModel &model, const FeatureMatrix &x,
                     const std::vector<int> &labels) {
  const auto rows = labelled_rows(labels);
  if (rows.empty()) throw DataError("no labelled frames");
  const Batch b = gather(model, x, labels, rows);
  const Matrix prob = forward(model, b.x).prob;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < b.y.size(); ++i) {
    Eigen::Index arg = 0;
    prob.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
    hits += arg == b.y[i];
  }
  return static_cast<double>(hits) / static_cast<double>(b.y.size());
}

Vector mfnn_parameters(const MfnnModel &m) {
  Vector p(m.w1.size() + m.b1.size() + m.w2.size() + m.b2.size() + m.w3.size() + m.b3.size());
  Eigen::Index o = 0;
  auto put = [&](const auto &a) {
    p.segment(o, a.size()) = Eigen::Map<const Vector>(a.data(), a.size());
    o += a.size();
  };
  put(m.w1);
  put(m.b1);
  put(m.w2);
  put(m.b2);
  put(m.w3);
  put(m.b3);
  return p;
}

void set_mfnn_parameters(MfnnModel &m, const Vector &p) {
  Eigen::Index o = 0;
  auto take = [&](auto &a) {
    Eigen::Map<Vector>(a.data(), a.size()) = p.segment(o, a.size());
    o += a.size();
  };
  take(m.w1);
  take(m.b1);
  take(m.w2);
  take(m.b2);
  take(m.w3);
  take(m.b3);
  if (o != p.size()) throw DataError("parameter vector size mismatch");
}

Vector mfnn_gradient(const MfnnModel &model, const FeatureMatrix &x,
                     const std::vector<int> &labels) {
  const auto rows = labelled_rows(labels);
  if (rows.empty()) throw DataError("no labelled frames");
  const Batch b = gather(model, x, labels, rows);
  const Gradient g = backward(model, b.x, forward(model, b.x), b.y);
  MfnnModel shaped = model;
  shaped.w1 = g.w1;
  shaped.b1 = g.b1;
  shaped.w2 = g.w2;
  shaped.b2 = g.b2;
  shaped.w3 = g.w3;
  shaped.b3 = g.b3;
  return mfnn_parameters(shaped);
}

namespace {

MfnnModel sgd(const FeatureMatrix &x, const std::vector<int> &labels, std::size_t num_classes,
              const MfnnConfig &config) {
  const auto rows = labelled_rows(labels);
  Matrix train_x(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    train_x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  MfnnModel m = init_mfnn(train_x, num_classes, config);

  const Batch all = gather(m, x, labels, rows);
  m.initial_loss = cross_entropy(forward(m, all.x).prob, all.y);

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(std::max(config.batch_size, 1));
  const double lr = config.learning_rate;
  Matrix bx;
  std::vector<int> by;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      bx.resize(static_cast<Eigen::Index>(len), all.x.cols());
      by.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        bx.row(static_cast<Eigen::Index>(i)) = all.x.row(static_cast<Eigen::Index>(order[start + i]));
        by[i] = all.y[order[start + i]];
      }
      const Gradient g = backward(m, bx, forward(m, bx), by);
      m.w1 -= lr * g.w1;
      m.b1 -= lr * g.b1;
      m.w2 -= lr * g.w2;
      m.b2 -= lr * g.b2;
      m.w3 -= lr * g.w3;
      m.b3 -= lr * g.b3;
    }
  }
  m.final_loss = cross_entropy(forward(m, all.x).prob, all.y);
  return m;
}

}  // namespace

MfnnModel train_mfnn(const FeatureStream &stream, const std::vector<int> &labels,
                     const MfnnConfig &config) {
  if (labels.size() != stream.num_frames()) throw DataError("one label per frame required");
  const std::size_t k = count_classes(labels);
  if (k < 2) throw TrainingImpossibleError("MFNN training needs at least 2 classes");
  std::vector<std::size_t> per_class(k, 0);
  for (int l : labels)
    if (l >= 0) ++per_class[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < k; ++c)
    if (per_class[c] == 0)
      throw DataError("class " + std::to_string(c) + " has no frames");

  MfnnModel m = sgd(stream.frames, labels, k, config);
  if (!std::isfinite(m.final_loss) || !m.w1.allFinite() || !m.w3.allFinite()) {
    MfnnConfig halved = config;
    halved.learning_rate *= 0.5;
    m = sgd(stream.frames, labels, k, halved);
    if (!std::isfinite(m.final_loss) || !m.w1.allFinite() || !m.w3.allFinite())
      throw NumericError("MFNN training diverged");
  }
  return m;
}

FeatureStream project_mfnn(const MfnnModel &model, const FeatureStream &stream) {
  if (stream.dims() != static_cast<std::size_t>(model.w1.rows()))
    throw DataError("feature dims do not match the network input");
  FeatureStream out;
  out.frame_period = stream.frame_period;
  out.window_length = stream.window_length;
  out.recording_id = stream.recording_id;
  const Matrix x = standardise(model, stream.frames);
  const Matrix h1 = ((x * model.w1).rowwise() + model.b1.transpose()).array().tanh();
  out.frames = (h1 * model.w2).rowwise() + model.b2.transpose();
  return out;
}

void write_mfnn(const std::filesystem::path &path, const MfnnModel &m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("IBNN", 4);
  for (auto v : {m.w1.rows(), m.w1.cols(), m.w2.cols(), m.w3.cols()}) {
    const auto u = static_cast<std::uint32_t>(v);
    out.write(reinterpret_cast<const char *>(&u), sizeof u);
  }
  auto dump = [&](const auto &a) {
    out.write(reinterpret_cast<const char *>(a.data()),
              static_cast<std::streamsize>(a.size() * sizeof(double)));
  };
  dump(m.input_mean);
  dump(m.input_scale);
  dump(m.w1);
  dump(m.b1);
  dump(m.w2);
  dump(m.b2);
  dump(m.w3);
  dump(m.b3);
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// LDA

namespace {

struct Scatter {
  Matrix within;
  Matrix between;
  Matrix means;
  std::vector<std::size_t> counts;
};

Scatter scatter(const FeatureMatrix &x, const std::vector<int> &labels) {
  if (labels.size() != static_cast<std::size_t>(x.rows()))
    throw DataError("one label per frame required");
  const std::size_t k = count_classes(labels);
  const Eigen::Index dims = x.cols();
  Scatter s;
  s.means = Matrix::Zero(static_cast<Eigen::Index>(k), dims);
  s.counts.assign(k, 0);
  Vector grand = Vector::Zero(dims);
  std::size_t total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    s.means.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
    grand += x.row(static_cast<Eigen::Index>(i)).transpose();
    ++s.counts[static_cast<std::size_t>(labels[i])];
    ++total;
  }
  if (total == 0) throw DataError("no labelled frames");
  grand /= static_cast<double>(total);
  for (std::size_t c = 0; c < k; ++c)
    if (s.counts[c] > 0) s.means.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(s.counts[c]);

  s.within = Matrix::Zero(dims, dims);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    const Vector d = (x.row(static_cast<Eigen::Index>(i)) - s.means.row(labels[i])).transpose();
    s.within.noalias() += d * d.transpose();
  }
  s.between = Matrix::Zero(dims, dims);
  for (std::size_t c = 0; c < k; ++c) {
    if (s.counts[c] == 0) continue;
    const Vector d = s.means.row(static_cast<Eigen::Index>(c)).transpose() - grand;
    s.between.noalias() += static_cast<double>(s.counts[c]) * d * d.transpose();
  }
  return s;
}

// Flips each column so its largest-magnitude entry is positive.
void fix_signs(Matrix &cols) {
  for (Eigen::Index c = 0; c < cols.cols(); ++c) {
    Eigen::Index arg = 0;
    cols.col(c).cwiseAbs().maxCoeff(&arg);
    if (cols(arg, c) < 0.0) cols.col(c) *= -1.0;
  }
}

}  // namespace

LdaModel train_lda(const FeatureStream &stream, const std::vector<int> &labels,
                   std::optional<double> lambda) {
  const Scatter s = scatter(stream.frames, labels);
  const std::size_t k = s.counts.size();
  if (k < 2) throw TrainingImpossibleError("LDA needs at least 2 classes");
  for (std::size_t c = 0; c < k; ++c)
    if (s.counts[c] < 2) throw DataError("LDA class " + std::to_string(c) + " has < 2 frames");

  const Eigen::Index dims = stream.frames.cols();
  LdaModel model;
  model.class_means = s.means;
  model.regularizer = lambda.value_or(1e-6 * s.within.trace() / static_cast<double>(dims));
  const Matrix reg = s.within + model.regularizer * Matrix::Identity(dims, dims);

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      Eigen::MatrixXd(s.between), Eigen::MatrixXd(reg));
  if (solver.info() != Eigen::Success || !solver.eigenvectors().allFinite())
    throw NumericError("LDA scatter matrix is singular");

  const Eigen::Index r = std::min<Eigen::Index>(dims, static_cast<Eigen::Index>(k) - 1);
  model.projection.resize(dims, r);
  model.eigenvalues.resize(r);
  for (Eigen::Index j = 0; j < r; ++j) {  // eigenvalues come back ascending
    model.projection.col(j) = solver.eigenvectors().col(dims - 1 - j);
    model.eigenvalues(j) = solver.eigenvalues()(dims - 1 - j);
  }
  fix_signs(model.projection);
  return model;
}

FeatureStream project_lda(const LdaModel &model, const FeatureStream &stream) {
  if (stream.dims() != static_cast<std::size_t>(model.projection.rows()))
    throw DataError("feature dims do not match the LDA projection");
  FeatureStream out;
  out.frame_period = stream.frame_period;
  out.window_length = stream.window_length;
  out.recording_id = stream.recording_id;
  out.frames = stream.frames * model.projection;
  return out;
}

double fisher_ratio(const FeatureMatrix &x, const std::vector<int> &labels) {
  const Scatter s = scatter(x, labels);
  return s.between.trace() / s.within.trace();
}

// ---------------------------------------------------------------------------
// PCA

PcaRotation fit_pca(const FeatureMatrix &x) {
  const Eigen::Index dims = x.cols();
  if (x.rows() < dims + 1)
    throw DataError("PCA needs at least dims + 1 frames");
  PcaRotation pca;
  pca.mean = x.colwise().mean().transpose();
  const Matrix centred = x.rowwise() - pca.mean.transpose();
  const Matrix cov = (centred.transpose() * centred) / static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver{Eigen::MatrixXd(cov)};
  if (solver.info() != Eigen::Success) throw NumericError("PCA eigen-decomposition failed");
  pca.rotation.resize(dims, dims);
  pca.variances.resize(dims);
  for (Eigen::Index j = 0; j < dims; ++j) {
    pca.rotation.col(j) = solver.eigenvectors().col(dims - 1 - j);
    pca.variances(j) = std::max(solver.eigenvalues()(dims - 1 - j), 0.0);
  }
  fix_signs(pca.rotation);
  return pca;
}

FeatureMatrix apply_pca(const PcaRotation &pca, const FeatureMatrix &x) {
  if (x.cols() != pca.rotation.rows()) throw DataError("PCA dims mismatch");
  return (x.rowwise() - pca.mean.transpose()) * pca.rotation;
}

FeatureStream pca_orthogonalize(const FeatureStream &stream) {
  FeatureStream out = stream;
  out.frames = apply_pca(fit_pca(stream.frames), stream.frames);
  return out;
}

}  // namespace ibd
