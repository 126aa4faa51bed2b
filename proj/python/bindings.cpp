#include "ibdiar/error.hpp"
#include "ibdiar/features.hpp"
#include "ibdiar/pipeline.hpp"
#include "ibdiar/scoring.hpp"
#include "ibdiar/synth.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>

namespace py = pybind11;
using namespace ibd;

namespace {

using Turns = std::vector<std::tuple<double, double, std::string>>;

Diarization to_diarization(const Turns &turns, const std::string &id) {
  Diarization d;
  d.recording_id = id;
  for (const auto &[start, dur, spk] : turns) d.entries.push_back({start, dur, spk});
  d.sort();
  return d;
}

Turns from_diarization(const Diarization &d) {
  Turns out;
  for (const auto &e : d.entries) out.emplace_back(e.start, e.duration, e.speaker);
  return out;
}

SpeechMask to_mask(const std::vector<std::pair<double, double>> &regions) {
  SpeechMask m;
  for (const auto &[a, b] : regions) m.intervals.push_back({a, b});
  return m;
}

py::dict run_diarize(const Matrix &frames, const std::vector<std::pair<double, double>> &mask,
                     std::optional<std::vector<std::pair<double, double>>> phonemes,
                     const std::string &mode, double nmi, double beta, std::uint64_t seed,
                     std::optional<std::pair<double, double>> fusion, double frame_period) {
  PipelineInput in;
  in.features.frames = frames;
  in.features.frame_period = frame_period;
  in.mask = to_mask(mask);
  if (phonemes) {
    PhonemeBoundaryList p;
    for (const auto &[a, b] : *phonemes) p.boundaries.push_back({a, b});
    in.phonemes = std::move(p);
  }
  PipelineConfig cfg;
  cfg.mode = parse_mode(mode);
  cfg.nmi = nmi;
  cfg.beta = beta;
  cfg.seed = seed;
  if (fusion) cfg.fusion = FusionWeights{fusion->first, fusion->second};
  cfg.validate();

  DiarizeResult r;
  {
    py::gil_scoped_release release;
    r = diarize(in, cfg);
  }
  py::dict out;
  out["turns"] = from_diarization(r.diarization);
  out["first_pass"] = from_diarization(r.first_pass);
  out["clusters"] = r.pass2 ? r.pass2->clusters : r.pass1.clusters;
  out["fell_back"] = r.fell_back;
  out["warnings"] = r.warnings;
  out["rtf"] = r.rtf.wall_rtf();
  std::map<std::string, double> stages;
  for (const auto &s : r.rtf.stages) stages[s.stage] += s.seconds;
  out["stage_seconds"] = stages;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Information bottleneck speaker diarization";

  // Translators run newest first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("modes", [] {
    std::vector<std::string> names;
    for (Mode mode : all_modes()) names.push_back(mode_name(mode));
    return names;
  });

  m.def(
      "extract_mfcc",
      [](const std::vector<double> &samples, int sample_rate) {
        return Matrix(extract_mfcc(samples, sample_rate).frames);
      },
      py::arg("samples"), py::arg("sample_rate"), "19 MFCCs per 10 ms frame.");

  m.def(
      "read_features", [](const std::string &path) { return Matrix(read_features(path).frames); },
      py::arg("path"));

  m.def(
      "synth",
      [](int num_speakers, double duration, double mean_radius, std::uint64_t seed, int dims) {
        SynthSpec spec;
        spec.num_speakers = num_speakers;
        spec.duration = duration;
        spec.mean_radius = mean_radius;
        spec.seed = seed;
        spec.dims = dims;
        const auto c = synth_conversation(spec);
        py::dict out;
        out["features"] = Matrix(c.features.frames);
        std::vector<std::pair<double, double>> mask, phn;
        for (const auto &iv : c.mask.intervals) mask.emplace_back(iv.start, iv.end);
        for (const auto &iv : c.phonemes.boundaries) phn.emplace_back(iv.start, iv.end);
        out["mask"] = mask;
        out["phonemes"] = phn;
        out["reference"] = from_diarization(c.reference);
        return out;
      },
      py::arg("num_speakers") = 3, py::arg("duration") = 300.0, py::arg("mean_radius") = 6.0,
      py::arg("seed") = 0, py::arg("dims") = 19,
      "Synthetic conversation: features, mask, phoneme boundaries and reference turns.");

  m.def("diarize", &run_diarize, py::arg("features"), py::arg("mask"),
        py::arg("phonemes") = py::none(), py::arg("mode") = "ib", py::arg("nmi") = 0.4,
        py::arg("beta") = 10.0, py::arg("seed") = 0, py::arg("fusion") = py::none(),
        py::arg("frame_period") = 0.010,
        "Diarize a feature matrix. Turns are (start, duration, speaker) tuples.");

  m.def(
      "score",
      [](const Turns &ref, const Turns &hyp, double collar, bool score_overlap) {
        const auto r = compute_ser(to_diarization(ref, ""), to_diarization(hyp, ""), {collar, score_overlap});
        py::dict out;
        out["ser"] = r.ser;
        out["ms"] = r.ms;
        out["fa"] = r.fa;
        out["der"] = r.der;
        out["mapping"] = r.mapping;
        return out;
      },
      py::arg("ref"), py::arg("hyp"), py::arg("collar") = 0.025, py::arg("score_overlap") = true);

  m.def(
      "format_rttm",
      [](const Turns &turns, const std::string &id) { return format_rttm(to_diarization(turns, id)); },
      py::arg("turns"), py::arg("recording_id") = "rec");
}
