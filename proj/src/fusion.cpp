#include "ibdiar/fusion.hpp"

#include "ibdiar/error.hpp"

#include <cmath>

namespace ibd {

void FusionWeights::validate() const {
  if (!(w_nn >= 0.0) || !(w_lda >= 0.0) || std::abs(w_nn + w_lda - 1.0) > 1e-12)
    throw DataError("fusion weights must be non-negative and sum to 1");
}

PosteriorMatrix fuse_posteriors(const PosteriorMatrix &post_nn, const PosteriorMatrix &post_lda,
                                const FusionWeights &weights) {
  weights.validate();
  if (post_nn.rows.rows() != post_lda.rows.rows() || post_nn.rows.cols() != post_lda.rows.cols())
    throw DataError("posterior streams differ in shape");
  if (post_nn.level != post_lda.level) throw DataError("posterior streams differ in level");
  PosteriorMatrix out;
  out.level = post_nn.level;
  out.rows = weights.w_nn * post_nn.rows + weights.w_lda * post_lda.rows;
  return out;
}

}  // namespace ibd
