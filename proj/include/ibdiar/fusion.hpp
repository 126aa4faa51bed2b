#pragma once

#include "ibdiar/gmm.hpp"

namespace ibd {

struct FusionWeights {
  double w_nn = 0.5;
  double w_lda = 0.5;

  // Throws DataError unless both are >= 0 and sum to 1 within 1e-12.
  void validate() const;
};

// Row-wise w_nn * post_nn + w_lda * post_lda.
PosteriorMatrix fuse_posteriors(const PosteriorMatrix &post_nn, const PosteriorMatrix &post_lda,
                                const FusionWeights &weights);

}  // namespace ibd
