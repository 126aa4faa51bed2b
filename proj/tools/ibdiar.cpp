#include "ibdiar/error.hpp"
#include "ibdiar/features.hpp"
#include "ibdiar/pipeline.hpp"
#include "ibdiar/scoring.hpp"
#include "ibdiar/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("ibdiar");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char *env = std::getenv("IBD_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

void write_json(const fs::path &path, const json &j) {
  std::ofstream out(path);
  if (!out) throw ibd::IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json stage_table(const ibd::RtfReport &rtf) {
  json stages = json::array();
  for (const auto &s : rtf.stages)
    stages.push_back({{"stage", s.stage},
                      {"seconds", s.seconds},
                      {"rtf", rtf.audio_duration > 0 ? s.seconds / rtf.audio_duration : 0.0}});
  return stages;
}

json pass_json(const ibd::PassReport &p) {
  return {{"segments", p.num_segments}, {"clusters", p.clusters}, {"realigned", p.realigned}};
}

json result_json(const ibd::DiarizeResult &r, const ibd::PipelineConfig &cfg) {
  json j;
  j["mode"] = ibd::mode_name(cfg.mode);
  j["seed"] = cfg.seed;
  j["speakers"] = r.diarization.speakers();
  j["pass1"] = pass_json(r.pass1);
  if (r.pass2) j["pass2"] = pass_json(*r.pass2);
  j["realignments"] = r.realign_count;
  j["fell_back"] = r.fell_back;
  j["pca_on_nn"] = r.pca_on_nn;
  if (r.mfnn_initial_loss) j["mfnn_loss"] = {*r.mfnn_initial_loss, *r.mfnn_final_loss};
  if (r.lda_fisher) j["fisher_ratio"] = {{"input", *r.input_fisher}, {"lda", *r.lda_fisher}};
  j["kept_clusters"] = r.kept_clusters;
  j["warnings"] = r.warnings;
  j["audio_seconds"] = r.rtf.audio_duration;
  j["wall_seconds"] = r.rtf.wall_seconds;
  j["rtf"] = r.rtf.wall_rtf();
  j["stages"] = stage_table(r.rtf);
  return j;
}

json score_json(const ibd::ScoreReport &s) {
  return {{"ser", s.ser},           {"ms", s.ms},         {"fa", s.fa},
          {"der", s.der},           {"mapping", s.mapping}, {"scored_seconds", s.scored_time},
          {"ser_seconds", s.ser_time}, {"ms_seconds", s.ms_time}, {"fa_seconds", s.fa_time}};
}

// --------------------------------------------------------------------------
// Pipeline options shared by diarize and bench.

struct PipelineFlags {
  std::string mode = "ib";
  ibd::PipelineConfig cfg;
  std::string fusion;

  void add(CLI::App *app) {
    app->add_option("--mode", mode, "ib, varib, tpib-nn, tpib-lda, tpib-fused, vartpib-nn, vartpib-lda, vartpib-fused")
        ->capture_default_str();
    app->add_option("--seg-len", cfg.seg_len, "fixed segment length (s)")->capture_default_str();
    app->add_option("--min-len", cfg.min_len)->capture_default_str();
    app->add_option("--max-len", cfg.max_len)->capture_default_str();
    app->add_option("--phn-rate", cfg.phn_rate)->capture_default_str();
    app->add_option("--nmi", cfg.nmi)->capture_default_str();
    app->add_option("--beta", cfg.beta)->capture_default_str();
    app->add_option("--first-pass-clusters", cfg.first_pass_count)->capture_default_str();
    app->add_option("--prune-min", cfg.prune_min)->capture_default_str();
    app->add_option("--min-dur", cfg.min_dur)->capture_default_str();
    app->add_option("--fusion-weights", fusion, "wN,wL");
    app->add_option("--seed", cfg.seed)->capture_default_str();
  }

  ibd::PipelineConfig resolve() {
    try {
      cfg.mode = ibd::parse_mode(mode);
    } catch (const ibd::DataError &e) {
      throw UsageError(e.what());
    }
    if (!fusion.empty()) {
      ibd::FusionWeights w;
      char comma = 0;
      std::istringstream in(fusion);
      if (!(in >> w.w_nn >> comma >> w.w_lda) || comma != ',' || !in.eof())
        throw UsageError("--fusion-weights expects wN,wL");
      cfg.fusion = w;
    }
    try {
      cfg.validate();
    } catch (const ibd::DataError &e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

struct Recording {
  std::string id;
  fs::path features;
  fs::path mask;
  fs::path phn;  // may not exist
};

ibd::PipelineInput load_input(const Recording &rec, bool need_phn) {
  ibd::PipelineInput in;
  if (rec.features.extension() == ".wav")
    in.audio = ibd::decode_wav(rec.features);
  else
    in.features = ibd::read_features(rec.features);
  in.features.recording_id = rec.id;
  in.mask = ibd::load_speech_mask(rec.mask);
  if (!rec.phn.empty() && fs::exists(rec.phn))
    in.phonemes = ibd::load_phoneme_boundaries(rec.phn);
  else if (need_phn)
    throw ibd::DataError("no phoneme boundaries for " + rec.id);
  return in;
}

// Every <id>.feat in dir with a matching <id>.mask; <id>.phn is optional.
std::vector<Recording> scan_corpus(const fs::path &dir) {
  if (!fs::is_directory(dir)) throw ibd::IoError("not a directory: " + dir.string());
  std::vector<Recording> recs;
  for (const auto &entry : fs::directory_iterator(dir)) {
    const auto &p = entry.path();
    if (p.extension() != ".feat") continue;
    const std::string id = p.stem().string();
    Recording r{id, p, dir / (id + ".mask"), dir / (id + ".phn")};
    if (!fs::exists(r.mask)) {
      spdlog::warn("skipping {}: no speech mask", id);
      continue;
    }
    recs.push_back(std::move(r));
  }
  std::sort(recs.begin(), recs.end(), [](const auto &a, const auto &b) { return a.id < b.id; });
  if (recs.empty()) throw ibd::DataError("no recordings found in " + dir.string());
  return recs;
}

// Runs fn(i) for i in [0, n) on `jobs` threads. The first exception wins.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)> &fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(jobs, 1); ++t) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// --------------------------------------------------------------------------

int cmd_features(const std::string &wav, const std::string &out, const std::string &csv) {
  const auto audio = ibd::decode_wav(wav);
  auto stream = ibd::extract_mfcc(audio.samples, audio.sample_rate);
  stream.recording_id = fs::path(wav).stem().string();
  ibd::write_features(out, stream);
  if (!csv.empty()) ibd::write_features_csv(csv, stream);
  spdlog::info("{}: {} frames x {} dims", wav, stream.num_frames(), stream.dims());
  return kOk;
}

struct DiarizeArgs {
  std::string input, mask, phn, out, report, corpus, out_dir;
  int jobs = 1;
};

int cmd_diarize(DiarizeArgs &a, PipelineFlags &flags) {
  const auto cfg = flags.resolve();
  const bool need_phn = ibd::uses_varying_init(cfg.mode);

  std::vector<Recording> recs;
  if (!a.corpus.empty()) {
    if (a.out_dir.empty()) throw UsageError("--corpus needs --out-dir");
    recs = scan_corpus(a.corpus);
    if (need_phn)
      for (const auto &r : recs)
        if (!fs::exists(r.phn))
          throw UsageError("mode " + flags.mode + " needs phoneme boundaries; missing " + r.phn.string());
    fs::create_directories(a.out_dir);
  } else {
    if (a.input.empty() || a.mask.empty() || a.out.empty())
      throw UsageError("diarize needs --input, --mask and --out (or --corpus)");
    if (need_phn && a.phn.empty())
      throw UsageError("mode " + flags.mode + " needs --phn-boundaries");
    recs.push_back({fs::path(a.input).stem().string(), a.input, a.mask, a.phn});
  }

  parallel_for(recs.size(), a.jobs, [&](std::size_t i) {
    const auto &rec = recs[i];
    const auto result = ibd::diarize(load_input(rec, need_phn), cfg);
    for (const auto &w : result.warnings) spdlog::warn("{}: {}", rec.id, w);
    fs::path rttm = a.corpus.empty() ? fs::path(a.out) : fs::path(a.out_dir) / (rec.id + ".rttm");
    ibd::write_rttm(rttm, result.diarization);
    if (!a.corpus.empty())
      write_json(fs::path(a.out_dir) / (rec.id + ".json"), result_json(result, cfg));
    else if (!a.report.empty())
      write_json(a.report, result_json(result, cfg));
    spdlog::info("{}: {} speakers, RTF {:.4f}", rec.id, result.diarization.speakers().size(),
                 result.rtf.wall_rtf());
  });
  return kOk;
}

int cmd_score(const std::string &ref, const std::string &hyp, double collar, bool no_overlap,
              bool as_json) {
  const auto rep = ibd::compute_ser(ibd::read_rttm(ref), ibd::read_rttm(hyp), {collar, !no_overlap});
  if (as_json) {
    std::cout << score_json(rep).dump(2) << '\n';
    return kOk;
  }
  std::cout << std::fixed << std::setprecision(2);
  std::cout << std::left << std::setw(8) << "metric" << std::right << std::setw(10) << "percent"
            << std::setw(12) << "seconds" << '\n';
  auto row = [](const char *name, double pct, double secs) {
    std::cout << std::left << std::setw(8) << name << std::right << std::setw(10) << pct
              << std::setw(12) << secs << '\n';
  };
  row("SER", rep.ser, rep.ser_time);
  row("MS", rep.ms, rep.ms_time);
  row("FA", rep.fa, rep.fa_time);
  row("DER", rep.der, rep.ser_time + rep.ms_time + rep.fa_time);
  std::cout << "scored " << rep.scored_time << " s\n";
  for (const auto &[h, r] : rep.mapping) std::cout << "  " << h << " -> " << r << '\n';
  return kOk;
}

ibd::SynthSpec parse_synth_spec(const std::string &path) {
  ibd::SynthSpec spec;
  if (path.empty()) return spec;
  std::ifstream in(path);
  if (!in) throw ibd::IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw ibd::FormatError(path + ": " + e.what());
  }
  static const std::set<std::string> known{"num_speakers", "duration",  "dims",     "mean_radius",
                                           "turn_range",   "phoneme_rate_range", "seed", "frame_period"};
  for (const auto &[key, _] : j.items())
    if (!known.count(key)) throw ibd::FormatError(path + ": unknown key '" + key + "'");
  try {
    spec.num_speakers = j.value("num_speakers", spec.num_speakers);
    spec.duration = j.value("duration", spec.duration);
    spec.dims = j.value("dims", spec.dims);
    spec.mean_radius = j.value("mean_radius", spec.mean_radius);
    spec.seed = j.value("seed", spec.seed);
    spec.frame_period = j.value("frame_period", spec.frame_period);
    if (j.contains("turn_range")) {
      const auto r = j.at("turn_range").get<std::vector<double>>();
      if (r.size() != 2) throw ibd::FormatError("turn_range needs two values");
      spec.turn_min = r[0];
      spec.turn_max = r[1];
    }
    if (j.contains("phoneme_rate_range")) {
      const auto r = j.at("phoneme_rate_range").get<std::vector<double>>();
      if (r.size() != 2) throw ibd::FormatError("phoneme_rate_range needs two values");
      spec.rate_min = r[0];
      spec.rate_max = r[1];
    }
  } catch (const json::exception &e) {
    throw ibd::FormatError(path + ": " + e.what());
  }
  return spec;
}

int cmd_synth(const std::string &spec_path, const std::string &out_dir, const std::string &id,
              std::optional<std::uint64_t> seed, int count) {
  auto spec = parse_synth_spec(spec_path);
  if (seed) spec.seed = *seed;
  for (int i = 0; i < count; ++i) {
    auto s = spec;
    s.seed = spec.seed + static_cast<std::uint64_t>(i);
    const std::string name = count == 1 ? id : id + "_" + std::to_string(i);
    ibd::write_corpus(out_dir, ibd::synth_conversation(s, name));
    spdlog::info("wrote {} to {}", name, out_dir);
  }
  return kOk;
}

int cmd_bench(const std::string &corpus, const std::vector<std::string> &modes, PipelineFlags &flags,
              const std::string &json_out) {
  const auto recs = scan_corpus(corpus);
  json table = json::array();
  std::cout << std::left << std::setw(16) << "mode" << std::right << std::setw(12) << "audio_s"
            << std::setw(12) << "wall_s" << std::setw(10) << "RTF" << "  stages\n";
  for (const auto &name : modes) {
    flags.mode = name;
    const auto cfg = flags.resolve();
    const bool need_phn = ibd::uses_varying_init(cfg.mode);
    double audio = 0.0, wall = 0.0;
    std::map<std::string, double> stages;
    for (const auto &rec : recs) {
      const auto r = ibd::diarize(load_input(rec, need_phn), cfg);
      audio += r.rtf.audio_duration;
      wall += r.rtf.wall_seconds;
      for (const auto &s : r.rtf.stages) stages[s.stage] += s.seconds;
    }
    std::ostringstream breakdown;
    breakdown << std::fixed << std::setprecision(4);
    json jstages;
    for (const auto &[stage, secs] : stages) {
      breakdown << ' ' << stage << '=' << secs / audio;
      jstages[stage] = secs / audio;
    }
    std::cout << std::left << std::setw(16) << name << std::right << std::fixed << std::setprecision(2)
              << std::setw(12) << audio << std::setw(12) << wall << std::setprecision(4)
              << std::setw(10) << wall / audio << ' ' << breakdown.str() << '\n';
    table.push_back({{"mode", name}, {"audio_seconds", audio}, {"wall_seconds", wall},
                     {"rtf", wall / audio}, {"stage_rtf", jstages}});
  }
  if (!json_out.empty()) write_json(json_out, table);
  return kOk;
}

}  // namespace

int main(int argc, char **argv) {
  setup_logging();
  CLI::App app{"Information bottleneck speaker diarization"};
  app.require_subcommand(1);

  std::string wav, feat_out, feat_csv;
  auto *features = app.add_subcommand("features", "WAV to MFCC feature file");
  features->add_option("--wav", wav)->required()->check(CLI::ExistingFile);
  features->add_option("--out", feat_out)->required();
  features->add_option("--csv", feat_csv, "also dump the frames as CSV");

  DiarizeArgs da;
  PipelineFlags dflags;
  auto *diar = app.add_subcommand("diarize", "Diarize one recording or a corpus directory");
  diar->add_option("--input", da.input, "feature file (.feat) or audio (.wav)");
  diar->add_option("--mask", da.mask, "speech mask");
  diar->add_option("--phn-boundaries", da.phn, "phoneme boundary file");
  diar->add_option("--out", da.out, "output RTTM");
  diar->add_option("--report", da.report, "JSON run report");
  diar->add_option("--corpus", da.corpus, "directory of <id>.feat/.mask/.phn");
  diar->add_option("--out-dir", da.out_dir, "output directory for --corpus");
  diar->add_option("--jobs", da.jobs, "recording-level workers")->capture_default_str()->check(CLI::PositiveNumber);
  dflags.add(diar);

  std::string ref, hyp;
  double collar = 0.025;
  bool no_overlap = false, score_as_json = false;
  auto *score = app.add_subcommand("score", "Score a hypothesis RTTM against a reference");
  score->add_option("--ref", ref)->required();
  score->add_option("--hyp", hyp)->required();
  score->add_option("--collar", collar)->capture_default_str();
  score->add_flag("--no-overlap", no_overlap, "skip regions with overlapping reference speakers");
  score->add_flag("--json", score_as_json);

  std::string spec_path, synth_dir, synth_id = "synth";
  std::optional<std::uint64_t> synth_seed;
  int synth_count = 1;
  auto *synth = app.add_subcommand("synth", "Write a synthetic corpus");
  synth->add_option("--spec", spec_path, "JSON spec")->check(CLI::ExistingFile);
  synth->add_option("--out-dir", synth_dir)->required();
  synth->add_option("--id", synth_id)->capture_default_str();
  synth->add_option("--seed", synth_seed);
  synth->add_option("--count", synth_count, "recordings, seeds seed..seed+count-1")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  std::string bench_corpus, bench_json;
  std::vector<std::string> bench_modes;
  PipelineFlags bflags;
  auto *bench = app.add_subcommand("bench", "RTF table over a corpus directory");
  bench->add_option("--corpus", bench_corpus)->required();
  bench->add_option("--modes", bench_modes, "modes to time (default: all)")->delimiter(',');
  bench->add_option("--json", bench_json, "write the table as JSON");
  bflags.add(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*features) return cmd_features(wav, feat_out, feat_csv);
    if (*diar) return cmd_diarize(da, dflags);
    if (*score) return cmd_score(ref, hyp, collar, no_overlap, score_as_json);
    if (*synth) return cmd_synth(spec_path, synth_dir, synth_id, synth_seed, synth_count);
    if (*bench) {
      if (bench_modes.empty())
        for (auto m : ibd::all_modes()) bench_modes.push_back(ibd::mode_name(m));
      return cmd_bench(bench_corpus, bench_modes, bflags, bench_json);
    }
  } catch (const UsageError &e) {
    spdlog::error("{}", e.what());
    std::cerr << app.help() << '\n';
    return kUsage;
  } catch (const ibd::Error &e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const std::exception &e) {
    spdlog::critical("internal error: {}", e.what());
    return kInternal;
  }
  return kUsage;
}
