#pragma once

#include "ibdiar/diarization.hpp"

#include <map>
#include <string>
#include <vector>

namespace ibd {

struct ScoreReport {
  double ser = 0.0;  // percent
  double ms = 0.0;
  double fa = 0.0;
  double der = 0.0;
  std::map<std::string, std::string> mapping;  // hyp label -> ref label
  double scored_time = 0.0;                    // sum of d * N_ref, seconds
  // Unnormalised error times in seconds.
  double ser_time = 0.0;
  double ms_time = 0.0;
  double fa_time = 0.0;
};

struct ScoreOptions {
  double collar = 0.025;
  bool score_overlap = true;
};

// Region-wise speaker error with an optimal one-to-one hyp/ref mapping that
// maximises correctly attributed time. Regions within +-collar of any
// reference boundary are not scored. With score_overlap=false, regions where
// the reference has more than one speaker are skipped as well.
ScoreReport compute_ser(const Diarization &ref, const Diarization &hyp,
                        const ScoreOptions &options = {});

// Maximum-weight assignment on a rows x cols weight matrix (Hungarian
// method). Returns the column matched to each row, or -1.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>> &weights);

}  // namespace ibd
