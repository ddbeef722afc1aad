// Copyright (c) 2026 The GhostVec Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Python bindings for the numeric building blocks and the stage runner.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ghostvec/common.h"
#include "ghostvec/features.h"
#include "ghostvec/metrics.h"
#include "ghostvec/pipeline.h"
#include "ghostvec/svd_transfer.h"
#include "ghostvec/synthesis.h"

namespace py = pybind11;
using namespace ghostvec;

namespace {

Waveform to_wave(std::vector<double> samples, int sample_rate) {
  Waveform w;
  w.samples = std::move(samples);
  w.sample_rate = sample_rate;
  return w;
}

py::dict voice_dict(const VoiceParams& v) {
  py::dict d;
  d["f0"] = v.f0;
  d["formant_scale"] = v.formant_scale;
  d["brightness"] = v.brightness;
  d["noise_floor"] = v.noise_floor;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ghostvec, m) {
  m.doc() = "GhostVec desk laboratory: features, metrics, SVD transfer, synthesis, pipeline stages";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), (e.kind() + ": " + e.what()).c_str());
    }
  });

  m.def(
      "compute_features",
      [](std::vector<double> samples, int sample_rate) {
        FrameConfig cfg;
        cfg.sample_rate = sample_rate;
        return compute_features(to_wave(std::move(samples), sample_rate), cfg);
      },
      py::arg("samples"), py::arg("sample_rate") = 16000,
      "T x 120 log-mel features with deltas and delta-deltas.");

  m.def(
      "eer",
      [](const std::vector<double>& tgt, const std::vector<double>& non) {
        const EerResult r = eer(tgt, non);
        return py::make_tuple(r.eer_pct, r.threshold);
      },
      py::arg("target"), py::arg("nontarget"), "Returns (eer_pct, threshold).");
  m.def(
      "min_dcf",
      [](const std::vector<double>& tgt, const std::vector<double>& non, double p_target) {
        return min_dcf(tgt, non, p_target);
      },
      py::arg("target"), py::arg("nontarget"), py::arg("p_target") = 0.01);
  m.def(
      "cllr",
      [](const std::vector<double>& tgt, const std::vector<double>& non) {
        const CllrResult r = cllr(tgt, non);
        return py::make_tuple(r.act, r.min);
      },
      py::arg("target"), py::arg("nontarget"), "Returns (cllr_act, cllr_min).");

  m.def(
      "svd",
      [](const Matrix& X) {
        const SVDFactors f = svd(X);
        return py::make_tuple(f.U, f.sigma, f.V);
      },
      py::arg("X"), "Full SVD; returns (U, sigma, V) with X = U diag(sigma) V^T.");
  m.def(
      "transfer", [](const Matrix& ghost, const Matrix& tmpl) { return transfer(svd(ghost), svd(tmpl)); },
      py::arg("ghost"), py::arg("template"),
      "Keeps the ghost singular values and replaces its singular vectors with the template's.");
  m.def("cosine_similarity", &cosine_similarity, py::arg("a"), py::arg("b"));

  py::class_<VoiceMap>(m, "VoiceMap")
      .def_static("load", &VoiceMap::load, py::arg("path"))
      .def("__call__", [](const VoiceMap& vm, const Vector& x) { return voice_dict(vm(x)); }, py::arg("embedding"))
      .def("midpoint", [](const VoiceMap& vm) { return voice_dict(vm.midpoint()); })
      .def_property_readonly("dim", &VoiceMap::dim)
      .def("injectivity_margin", &VoiceMap::injectivity_margin);

  m.def(
      "synth_mel",
      [](const VoiceMap& vm, const std::string& text, const Vector& embedding) {
        return synth_mel(vm, SynthesisRequest{text, embedding});
      },
      py::arg("voice_map"), py::arg("text"), py::arg("embedding"));
  m.def(
      "vocode", [](const Matrix& mel) { return vocode(mel).samples; }, py::arg("mel"),
      "Griffin-Lim reconstruction of a mel representation; returns 16 kHz samples.");

  m.def("stage_names", &stage_names);
  m.def(
      "run_stage",
      [](const std::string& config_path, const std::string& stage, const std::string& out, bool force) {
        PipelineConfig cfg = PipelineConfig::load(config_path);
        if (!out.empty()) cfg.out = out;
        Pipeline p(std::move(cfg));
        StageOutcome o;
        {
          py::gil_scoped_release release;
          if (stage == "all")
            p.run_all(force);
          else
            o = p.run(stage, force);
        }
        py::dict d;
        d["cache_hit"] = o.cache_hit;
        d["wall_seconds"] = o.wall_seconds;
        return d;
      },
      py::arg("config"), py::arg("stage"), py::arg("out") = "", py::arg("force") = false,
      "Runs one pipeline stage (or \"all\") with the given config file.");
}
