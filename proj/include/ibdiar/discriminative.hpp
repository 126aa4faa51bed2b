#pragma once

#include "ibdiar/diarization.hpp"
#include "ibdiar/error.hpp"
#include "ibdiar/features.hpp"
#include "ibdiar/gmm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ibd {

// Raised when too few clusters survive pruning to train a discriminator.
class TrainingImpossibleError : public DataError {
 public:
  using DataError::DataError;
};

struct PruneResult {
  Diarization diarization;  // unchanged input
  std::vector<std::string> kept_labels;
};

// Keeps the clusters whose total attributed time is at least min_total.
PruneResult prune_short_clusters(const Diarization &diar, double min_total = 3.0);

// Per-frame training labels in [0, kept.size()) for frames of kept
// clusters, -1 elsewhere.
std::vector<int> training_labels(const Diarization &diar, const std::vector<std::string> &kept,
                                 std::size_t num_frames, double frame_period);

// ---------------------------------------------------------------------------
// Shallow feed-forward speaker classifier:
//   standardise -> affine(h1) + tanh -> affine(h2) -> affine(K) + softmax.
// The h2 activations are the latent features.

struct MfnnConfig {
  int hidden1 = 34;
  int hidden2 = 19;
  double learning_rate = 0.01;
  int batch_size = 256;
  int epochs = 10;
  std::uint64_t seed = 0;
};

struct MfnnModel {
  Vector input_mean;
  Vector input_scale;  // 1 / stddev
  Matrix w1, w2, w3;   // in x h1, h1 x h2, h2 x K
  Vector b1, b2, b3;
  std::uint64_t seed = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double learning_rate = 0.0;  // rate actually used

  std::size_t num_classes() const { return static_cast<std::size_t>(w3.cols()); }
  std::size_t latent_dims() const { return static_cast<std::size_t>(w2.cols()); }
};

// Glorot-uniform weights, zero biases, standardisation fitted to `x`.
MfnnModel init_mfnn(const FeatureMatrix &x, std::size_t num_classes, const MfnnConfig &config);

// Labels: class index per frame, -1 frames are ignored.
MfnnModel train_mfnn(const FeatureStream &stream, const std::vector<int> &labels,
                     const MfnnConfig &config = {});

// Mean cross-entropy over the labelled frames.
double mfnn_loss(const MfnnModel &model, const FeatureMatrix &x, const std::vector<int> &labels);
double mfnn_accuracy(const MfnnModel &model, const FeatureMatrix &x,
                     const std::vector<int> &labels);

// Trainable parameters flattened as w1, b1, w2, b2, w3, b3 (standardisation
// excluded), and the analytic gradient of mfnn_loss in the same order.
Vector mfnn_parameters(const MfnnModel &model);
void set_mfnn_parameters(MfnnModel &model, const Vector &params);
Vector mfnn_gradient(const MfnnModel &model, const FeatureMatrix &x,
                     const std::vector<int> &labels);

// Second hidden layer activations for every frame.
FeatureStream project_mfnn(const MfnnModel &model, const FeatureStream &stream);

// Debug dump: "IBNN", u32 in, h1, h2, K, then f64 mean, scale, w1, b1, w2,
// b2, w3, b3 (row-major).
void write_mfnn(const std::filesystem::path &path, const MfnnModel &model);

// ---------------------------------------------------------------------------
// LDA

struct LdaModel {
  Matrix projection;   // dims x r, columns ordered by decreasing eigenvalue
  Matrix class_means;  // K x dims
  Vector eigenvalues;  // r
  double regularizer = 0.0;

  std::size_t output_dims() const { return static_cast<std::size_t>(projection.cols()); }
};

// Solves S_B v = l (S_W + lambda I) v and keeps r = min(dims, K-1)
// directions. lambda defaults to 1e-6 * trace(S_W) / dims.
LdaModel train_lda(const FeatureStream &stream, const std::vector<int> &labels,
                   std::optional<double> lambda = std::nullopt);
FeatureStream project_lda(const LdaModel &model, const FeatureStream &stream);

// trace(S_B) / trace(S_W) over the labelled frames.
double fisher_ratio(const FeatureMatrix &x, const std::vector<int> &labels);

// ---------------------------------------------------------------------------
// PCA used purely as a rotation; every dimension is kept.

struct PcaRotation {
  Vector mean;
  Matrix rotation;  // dims x dims, orthonormal columns by decreasing variance
  Vector variances;
};

PcaRotation fit_pca(const FeatureMatrix &x);
FeatureMatrix apply_pca(const PcaRotation &pca, const FeatureMatrix &x);
FeatureStream pca_orthogonalize(const FeatureStream &stream);

}  // namespace ibd
