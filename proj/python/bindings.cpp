#include "eegprompt/audio.hpp"
#include "eegprompt/cli.hpp"
#include "eegprompt/error.hpp"
#include "eegprompt/gateway.hpp"
#include "eegprompt/harness.hpp"
#include "eegprompt/signal.hpp"
#include "eegprompt/synth.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace eegprompt;

PYBIND11_MODULE(_eegprompt, m) {
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());

  m.def(
      "design_bandpass_fir",
      [](double f_low, double f_high, double sfreq, std::size_t n_taps) {
        return design_bandpass_fir(FilterSpec{f_low, f_high, n_taps}, sfreq);
      },
      py::arg("f_low"), py::arg("f_high"), py::arg("sfreq"), py::arg("n_taps") = 0);
  m.def(
      "default_tap_count",
      [](double f_low, double f_high, double sfreq) { return default_tap_count(FilterSpec{f_low, f_high, 0}, sfreq); },
      py::arg("f_low"), py::arg("f_high"), py::arg("sfreq"));

  m.def(
      "extract_features",
      [](std::vector<double> samples, double sfreq) {
        const auto s = extract_features(AudioClip{sfreq, std::move(samples)});
        py::dict d;
        d["mfcc_mean"] = s.mfcc_mean;
        d["mfcc_std"] = s.mfcc_std;
        d["mel_mean"] = s.mel_mean;
        d["mel_std"] = s.mel_std;
        d["chroma_mean"] = std::vector<double>(s.chroma_mean.begin(), s.chroma_mean.end());
        d["text"] = textualize(s);
        return d;
      },
      py::arg("samples"), py::arg("sfreq"));

  m.def(
      "parse_label",
      [](const std::string& raw, std::size_t classes) { return parse_label(raw, synth_task(classes)).label; },
      py::arg("raw"), py::arg("classes"), "Label for a reply, or None when it can't be parsed.");

  m.def(
      "majority_vote_baseline", [](const std::vector<int>& labels) { return majority_vote_baseline(labels); },
      py::arg("labels"));
  m.def("format_cell", &format_cell, py::arg("mean"), py::arg("std"));

  m.def(
      "write_synth_dataset",
      [](const std::filesystem::path& dir, std::size_t classes, std::size_t samples, std::uint64_t seed) {
        SynthOptions o;
        o.classes = classes;
        o.samples = samples;
        o.seed = seed;
        return write_synth_dataset(dir, o);
      },
      py::arg("dir"), py::arg("classes") = 3, py::arg("samples") = 30, py::arg("seed") = 0,
      "Writes a synthetic dataset and returns the manifest path.");

  // Network runs would block with the GIL held, so release it.
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          CliContext ctx;
          ctx.out = &out;
          ctx.err = &err;
          code = run_cli(args, ctx);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the CLI in-process; returns (exit_code, stdout, stderr).");
}
