#include "ibdiar/pipeline.hpp"

#include "ibdiar/error.hpp"
#include "ibdiar/gmm.hpp"
#include "ibdiar/realign.hpp"

#include <algorithm>
#include <chrono>
#include <utility>

namespace ibd {

namespace {

struct ModeInfo {
  Mode mode;
  const char *name;
};

constexpr ModeInfo kModes[] = {
    {Mode::ib, "ib"},
    {Mode::varib, "varib"},
    {Mode::tpib_nn, "tpib-nn"},
    {Mode::tpib_lda, "tpib-lda"},
    {Mode::tpib_fused, "tpib-fused"},
    {Mode::vartpib_nn, "vartpib-nn"},
    {Mode::vartpib_lda, "vartpib-lda"},
    {Mode::vartpib_fused, "vartpib-fused"},
};

}  // namespace

Mode parse_mode(std::string_view name) {
  for (const auto &m : kModes)
    if (name == m.name) return m.mode;
  throw DataError("unknown mode '" + std::string(name) + "'");
}

std::string mode_name(Mode mode) {
  for (const auto &m : kModes)
    if (m.mode == mode) return m.name;
  return "?";
}

const std::vector<Mode> &all_modes() {
  static const std::vector<Mode> modes = [] {
    std::vector<Mode> v;
    for (const auto &m : kModes) v.push_back(m.mode);
    return v;
  }();
  return modes;
}

bool uses_varying_init(Mode mode) {
  return mode == Mode::varib || mode == Mode::vartpib_nn || mode == Mode::vartpib_lda ||
         mode == Mode::vartpib_fused;
}

bool is_two_pass(Mode mode) { return mode != Mode::ib && mode != Mode::varib; }

bool is_fused(Mode mode) { return mode == Mode::tpib_fused || mode == Mode::vartpib_fused; }

bool uses_nn(Mode mode) {
  return mode == Mode::tpib_nn || mode == Mode::vartpib_nn || is_fused(mode);
}

bool uses_lda(Mode mode) {
  return mode == Mode::tpib_lda || mode == Mode::vartpib_lda || is_fused(mode);
}

FusionWeights PipelineConfig::effective_fusion() const {
  if (fusion) return *fusion;
  return uses_varying_init(mode) ? FusionWeights{0.6, 0.4} : FusionWeights{0.2, 0.8};
}

void PipelineConfig::validate() const {
  if (!(seg_len > 0.0) || !(min_len > 0.0) || !(max_len > 0.0) || !(nmi > 0.0) ||
      !(beta > 0.0) || !(prune_min > 0.0) || !(min_dur > 0.0) || phn_rate <= 0 ||
      first_pass_count == 0)
    throw DataError("pipeline parameters must be positive");
  if (min_len > max_len) throw DataError("min_len exceeds max_len");
  if (nmi > 1.0) throw DataError("NMI threshold must lie in (0, 1]");
  effective_fusion().validate();
}

double RtfReport::total_seconds() const {
  double s = 0.0;
  for (const auto &st : stages) s += st.seconds;
  return s;
}

double RtfReport::stage_seconds(std::string_view name) const {
  double s = 0.0;
  for (const auto &st : stages)
    if (st.stage == name) s += st.seconds;
  return s;
}

std::size_t RtfReport::stage_count(std::string_view name) const {
  return static_cast<std::size_t>(
      std::count_if(stages.begin(), stages.end(), [&](const StageTime &st) { return st.stage == name; }));
}

SegmentList initial_segments(const SpeechMask &mask, const std::optional<PhonemeBoundaryList> &phn,
                             const PipelineConfig &config, double frame_period) {
  SegmentList segs;
  if (uses_varying_init(config.mode)) {
    if (!phn) throw DataError("mode " + mode_name(config.mode) + " needs phoneme boundaries");
    segs = varying_length_init(mask, *phn, {config.min_len, config.max_len, config.phn_rate});
  } else {
    segs = fixed_length_init(mask, config.seg_len);
  }
  return merge_short_segments(segs, frame_period);
}

namespace {

class StageTimer {
 public:
  explicit StageTimer(RtfReport &report) : report_(report) {}

  template <class F>
  decltype(auto) run(const char *stage, F &&f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      RtfReport &r;
      const char *stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        const std::chrono::duration<double> d = std::chrono::steady_clock::now() - t0;
        r.stages.push_back({stage, d.count()});
      }
    } record{report_, stage, t0};
    return f();
  }

 private:
  RtfReport &report_;
};

// Frame labels from an IB partition, cluster ids renumbered by first
// appearance.
std::vector<int> partition_labels(const IbState &state, const SegmentList &segs,
                                  std::size_t num_frames, double frame_period) {
  std::vector<int> labels(num_frames, -1);
  std::vector<int> remap(state.num_segments(), -1);
  int next = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const int c = state.assignment[i];
    if (remap[static_cast<std::size_t>(c)] < 0) remap[static_cast<std::size_t>(c)] = next++;
    const auto [first, last] = frame_range(segs.segments[i], frame_period, num_frames);
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(first),
              labels.begin() + static_cast<std::ptrdiff_t>(last), remap[static_cast<std::size_t>(c)]);
  }
  return labels;
}

struct Pass {
  IbState state;
  PosteriorMatrix frame_post;
};

class Runner {
 public:
  Runner(const PipelineConfig &config, DiarizeResult &result)
      : config_(config), result_(result), timer_(result.rtf) {}

  PosteriorMatrix frame_posteriors_of(const FeatureStream &stream, const SegmentList &segs,
                                      Weighting w) {
    return timer_.run("posteriors", [&] { return frame_posteriors(estimate_gmm(stream, segs, w), stream); });
  }

  Pass cluster(PosteriorMatrix frame_post, const SegmentList &segs, Weighting w,
               const StoppingRule &stop, double fp, PassReport &report) {
    return timer_.run("aib", [&] {
      const auto seg_post = segment_posteriors(frame_post, segs, fp);
      const auto durations = segs.durations();
      IbState state = run_aib(init_ib_state(seg_post, w, durations, config_.beta), stop);
      report.num_segments = segs.size();
      report.clusters = state.num_live();
      report.trajectory = state.trajectory;
      return Pass{std::move(state), std::move(frame_post)};
    });
  }

  RealignResult realign(const Pass &pass, const SpeechMask &mask, double fp, const std::string &id,
                        PassReport &report) {
    ++result_.realign_count;
    report.realigned = true;
    return timer_.run("realign", [&] {
      return kl_hmm_realign(pass.frame_post, pass.state, mask, fp, {config_.min_dur, 1e-10}, id);
    });
  }

  StageTimer &timer() { return timer_; }

 private:
  const PipelineConfig &config_;
  DiarizeResult &result_;
  StageTimer timer_;
};

FeatureStream with_frames(const FeatureStream &like, FeatureMatrix frames) {
  FeatureStream s;
  s.frames = std::move(frames);
  s.frame_period = like.frame_period;
  s.window_length = like.window_length;
  s.recording_id = like.recording_id;
  return s;
}

}  // namespace

DiarizeResult diarize(const PipelineInput &input, const PipelineConfig &config) {
  config.validate();
  if (uses_varying_init(config.mode) && !input.phonemes)
    throw DataError("mode " + mode_name(config.mode) + " needs phoneme boundaries");

  DiarizeResult result;
  Runner runner(config, result);
  auto &timer = runner.timer();
  const auto wall0 = std::chrono::steady_clock::now();

  FeatureStream extracted;
  if (input.audio) {
    extracted = timer.run("features", [&] {
      return extract_mfcc(input.audio->samples, input.audio->sample_rate);
    });
    extracted.recording_id = input.features.recording_id;
  }
  const FeatureStream &stream = input.audio ? extracted : input.features;
  if (stream.empty()) throw DataError("no feature frames");
  const double fp = stream.frame_period;
  const std::string &id = stream.recording_id;
  result.rtf.audio_duration = stream.duration();

  const SegmentList segs =
      timer.run("segmentation", [&] { return initial_segments(input.mask, input.phonemes, config, fp); });
  const Weighting weighting = weighting_for(segs.kind);

  auto finish = [&] {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - wall0;
    result.rtf.wall_seconds = d.count();
    return std::move(result);
  };

  if (segs.size() < 2) {
    // Nothing to cluster: one speaker over all usable speech.
    result.warnings.push_back("fewer than 2 initial segments; emitting a single speaker");
    std::vector<int> labels(stream.num_frames(), -1);
    for (const auto &s : segs.segments) {
      const auto [a, b] = frame_range(s, fp, stream.num_frames());
      std::fill(labels.begin() + static_cast<std::ptrdiff_t>(a),
                labels.begin() + static_cast<std::ptrdiff_t>(b), 0);
    }
    result.pass1.num_segments = segs.size();
    result.pass1.clusters = segs.size();
    result.diarization = labels_to_diarization(labels, input.mask, fp, id);
    result.first_pass = result.diarization;
    return finish();
  }

  // First pass. LDA-only modes stop at a fixed cluster count and skip the
  // realignment; every other mode uses NMI stopping plus realignment.
  const bool count_stop = uses_lda(config.mode) && !is_fused(config.mode);
  StoppingRule stop1 = StoppingRule::threshold(config.nmi);
  if (count_stop) {
    std::size_t count = config.first_pass_count;
    if (count > segs.size()) {
      result.warnings.push_back("first-pass cluster count " + std::to_string(count) +
                                " clamped to the " + std::to_string(segs.size()) +
                                " available segments");
      count = segs.size();
    }
    stop1 = StoppingRule::clusters(count);
  }
  Pass pass1 = runner.cluster(runner.frame_posteriors_of(stream, segs, weighting), segs, weighting,
                              stop1, fp, result.pass1);
  if (count_stop) {
    result.first_pass = labels_to_diarization(
        partition_labels(pass1.state, segs, stream.num_frames(), fp), input.mask, fp, id);
  } else {
    result.first_pass = runner.realign(pass1, input.mask, fp, id, result.pass1).diarization;
  }
  result.diarization = result.first_pass;
  if (!is_two_pass(config.mode)) return finish();

  // Discriminative latent streams.
  FeatureStream nn_stream, lda_stream;
  try {
    const PruneResult pruned =
        timer.run("prune", [&] { return prune_short_clusters(result.first_pass, config.prune_min); });
    result.kept_clusters = pruned.kept_labels;
    const std::vector<int> labels =
        training_labels(result.first_pass, pruned.kept_labels, stream.num_frames(), fp);

    if (uses_nn(config.mode)) {
      MfnnConfig mc = config.mfnn;
      mc.seed = config.seed;
      const MfnnModel model = timer.run("train_mfnn", [&] { return train_mfnn(stream, labels, mc); });
      result.mfnn_initial_loss = model.initial_loss;
      result.mfnn_final_loss = model.final_loss;
      if (model.learning_rate != mc.learning_rate)
        result.warnings.push_back("MFNN learning rate halved after divergence");
      const FeatureStream latent = timer.run("project_mfnn", [&] { return project_mfnn(model, stream); });
      nn_stream = timer.run("pca", [&] {
        // Fit on speech frames only, rotate every frame.
        std::vector<Eigen::Index> rows;
        for (const auto &s : segs.segments) {
          const auto [a, b] = frame_range(s, fp, stream.num_frames());
          for (auto k = a; k < b; ++k) rows.push_back(static_cast<Eigen::Index>(k));
        }
        FeatureMatrix speech(static_cast<Eigen::Index>(rows.size()), latent.frames.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
          speech.row(static_cast<Eigen::Index>(i)) = latent.frames.row(rows[i]);
        return with_frames(latent, apply_pca(fit_pca(speech), latent.frames));
      });
      result.pca_on_nn = true;
    }
    if (uses_lda(config.mode)) {
      const LdaModel lda = timer.run("train_lda", [&] { return train_lda(stream, labels); });
      lda_stream = timer.run("project_lda", [&] { return project_lda(lda, stream); });
      result.input_fisher = fisher_ratio(stream.frames, labels);
      result.lda_fisher = fisher_ratio(lda_stream.frames, labels);
    }
  } catch (const TrainingImpossibleError &e) {
    result.fell_back = true;
    result.warnings.push_back(std::string("training impossible, keeping first-pass output: ") + e.what());
    return finish();
  }

  // Second pass on the latent stream(s), same segment list, NMI stopping.
  PosteriorMatrix post2;
  if (is_fused(config.mode)) {
    const PosteriorMatrix nn_post = runner.frame_posteriors_of(nn_stream, segs, weighting);
    const PosteriorMatrix lda_post = runner.frame_posteriors_of(lda_stream, segs, weighting);
    post2 = timer.run("fusion", [&] { return fuse_posteriors(nn_post, lda_post, config.effective_fusion()); });
  } else {
    post2 = runner.frame_posteriors_of(uses_nn(config.mode) ? nn_stream : lda_stream, segs, weighting);
  }
  result.pass2.emplace();
  Pass pass2 = runner.cluster(std::move(post2), segs, weighting, StoppingRule::threshold(config.nmi), fp,
                              *result.pass2);
  result.diarization = runner.realign(pass2, input.mask, fp, id, *result.pass2).diarization;
  return finish();
}

}  // namespace ibd
