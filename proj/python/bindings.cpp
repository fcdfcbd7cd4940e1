#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "taylorse/dsp.hpp"
#include "taylorse/erb.hpp"
#include "taylorse/error.hpp"
#include "taylorse/evalkit.hpp"
#include "taylorse/model_zoo.hpp"
#include "taylorse/runtime.hpp"
#include "taylorse/taylor.hpp"
#include "taylorse/weights.hpp"

namespace py = pybind11;
using namespace taylorse;
using dsp::ComplexSpectrogram;
using dsp::cplx;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const RealArray& a) {
    if (a.ndim() != 1) throw ShapeError("expected a 1-D signal");
    return {a.data(), a.data() + a.size()};
}

// (n,) -> one channel, (M, n) -> M channels
std::vector<std::vector<double>> to_channels(const RealArray& a) {
    if (a.ndim() == 1) return {to_vector(a)};
    if (a.ndim() != 2) throw ShapeError("expected shape (n,) or (channels, n)");
    std::vector<std::vector<double>> out;
    const auto n = static_cast<std::size_t>(a.shape(1));
    for (py::ssize_t c = 0; c < a.shape(0); ++c) out.emplace_back(a.data(c, 0), a.data(c, 0) + n);
    return out;
}

py::array_t<double> from_vector(const std::vector<double>& v) {
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

// single channel -> (frames, bins), otherwise (channels, frames, bins)
py::array_t<cplx> from_spec(const ComplexSpectrogram& s) {
    std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(s.frames()), static_cast<py::ssize_t>(s.bins())};
    if (s.channels() > 1) shape.insert(shape.begin(), static_cast<py::ssize_t>(s.channels()));
    py::array_t<cplx> out(shape);
    std::copy(s.data().begin(), s.data().end(), out.mutable_data());
    return out;
}

ComplexSpectrogram to_spec(const ComplexArray& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("expected shape (frames, bins) or (channels, frames, bins)");
    const bool multi = a.ndim() == 3;
    ComplexSpectrogram s(static_cast<std::size_t>(a.shape(multi ? 1 : 0)), static_cast<std::size_t>(a.shape(multi ? 2 : 1)),
                         multi ? static_cast<std::size_t>(a.shape(0)) : 1);
    std::copy(a.data(), a.data() + a.size(), s.data().begin());
    return s;
}

py::dict taylor_dict(const taylor::TaylorOutput& out) {
    py::list orders, partial;
    for (const auto& o : out.orders) orders.append(from_spec(o.term));
    for (const auto& p : out.partial_sums) partial.append(from_spec(p));
    py::dict d;
    d["enhanced"] = from_spec(out.enhanced);
    d["orders"] = orders;
    d["partial_sums"] = partial;
    d["frame_gains"] = from_vector(out.frame_gains);
    return d;
}

using GraphPtr = std::shared_ptr<model::ModelGraph>;
using ArchivePtr = std::shared_ptr<weights::WeightArchive>;
// pybind11 holders cannot be pointers to const
using EnginePtr = std::shared_ptr<taylor::Engine>;

}  // namespace

PYBIND11_MODULE(_taylorse, m) {
    m.doc() = "Taylor-unfolded speech enhancement runtime";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());

    // signal front end
    m.def(
        "stft", [](const RealArray& x) { return from_spec(dsp::stft(to_channels(x))); }, py::arg("signal"),
        "20 ms sqrt-Hann frames, 10 ms hop, 161 bins at 16 kHz");
    m.def(
        "istft", [](const ComplexArray& s) { return from_vector(dsp::istft(to_spec(s))); }, py::arg("spec"),
        "weighted overlap-add inverse of stft (first channel)");
    m.def("erb_matrix", [] {
        const auto& b = erb::default_bank();
        py::array_t<double> out({b.bands(), b.bins()});
        for (int i = 0; i < b.bands(); ++i)
            for (int k = 0; k < b.bins(); ++k) *out.mutable_data(i, k) = b.weight(i, k);
        return out;
    });
    m.def("erb_inverse_matrix", [] {
        const auto& b = erb::default_bank();
        py::array_t<double> out({b.bins(), b.bands()});
        for (int k = 0; k < b.bins(); ++k)
            for (int i = 0; i < b.bands(); ++i) *out.mutable_data(k, i) = b.inverse_weight(k, i);
        return out;
    });
    m.def("erb_centers_hz", [] { return erb::default_bank().band_centers_hz(); });

    // models
    py::class_<model::ModelGraph, GraphPtr>(m, "Model")
        .def(py::init([](const std::string& variant, int order, int channels) {
                 return std::make_shared<model::ModelGraph>(model::build(parse_variant(variant), order, channels));
             }),
             py::arg("variant") = "taer", py::arg("order") = 1, py::arg("channels") = 1)
        .def_property_readonly("variant", [](const model::ModelGraph& g) { return std::string(to_string(g.variant)); })
        .def_readonly("order", &model::ModelGraph::order)
        .def_readonly("channels", &model::ModelGraph::channels)
        .def_property_readonly("params", &model::ModelGraph::count_params)
        .def_property_readonly("macs_per_frame", &model::ModelGraph::count_macs_per_frame)
        .def("receptive_field",
             [](const model::ModelGraph& g) {
                 const auto r = model::receptive_field(g);
                 return py::make_tuple(r.zeroth_order, r.high_order);
             })
        .def(
            "probe",
            [](const model::ModelGraph& g, const weights::WeightArchive& a, std::uint64_t seed) {
                const auto r = model::probe_receptive_field(g, a, seed);
                py::dict d;
                d["zeroth_order"] = r.field.zeroth_order;
                d["high_order"] = r.field.high_order;
                d["causal"] = r.causal;
                return d;
            },
            py::arg("weights"), py::arg("seed") = 1)
        .def(
            "describe",
            [](const model::ModelGraph& g, bool json) { return json ? model::describe_json(g) : model::describe_text(g); },
            py::arg("json") = false);

    py::class_<weights::WeightArchive, ArchivePtr>(m, "Weights")
        .def_static(
            "random",
            [](const model::ModelGraph& g, std::uint64_t seed, float scale) {
                return std::make_shared<weights::WeightArchive>(model::random_weights(g, {seed, scale}));
            },
            py::arg("model"), py::arg("seed") = 0, py::arg("scale") = 1.0f)
        .def_static("load", [](const std::filesystem::path& p) { return std::make_shared<weights::WeightArchive>(weights::load(p)); })
        .def("save", [](const weights::WeightArchive& a, const std::filesystem::path& p) { weights::save(a, p); })
        .def("names",
             [](const weights::WeightArchive& a) {
                 std::vector<std::string> out;
                 for (const auto& t : a.tensors()) out.push_back(t.name);
                 return out;
             })
        .def("__getitem__",
             [](const weights::WeightArchive& a, const std::string& name) {
                 const auto* t = a.find(name);
                 if (!t) throw py::key_error(name);
                 std::vector<py::ssize_t> shape(t->shape.begin(), t->shape.end());
                 py::array_t<float> out(shape);
                 std::copy(t->data.begin(), t->data.end(), out.mutable_data());
                 return out;
             })
        .def("__setitem__",
             [](weights::WeightArchive& a, const std::string& name,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& v) {
                 auto* t = a.find(name);
                 if (!t) throw py::key_error(name);
                 if (static_cast<std::size_t>(v.size()) != t->data.size()) throw ShapeError("size mismatch for " + name);
                 std::copy(v.data(), v.data() + v.size(), t->data.begin());
             })
        .def("validate",
             [](const weights::WeightArchive& a, const model::ModelGraph& g) {
                 const auto r = weights::validate(a, g);
                 return py::make_tuple(r.ok(), r.summary());
             })
        .def("__len__", [](const weights::WeightArchive& a) { return a.tensors().size(); });

    py::class_<taylor::Engine, EnginePtr>(m, "Engine")
        // copies, so later edits to the Weights object do not leak into the engine
        .def(py::init([](const model::ModelGraph& g, const weights::WeightArchive& a) {
                 return std::make_shared<taylor::Engine>(g, a);
             }),
             py::arg("model"), py::arg("weights"))
        .def_static(
            "load",
            [](const std::filesystem::path& p) { return std::const_pointer_cast<taylor::Engine>(runtime::load_engine(p)); },
            py::arg("path"))
        .def_property_readonly("order", &taylor::Engine::order)
        .def_property_readonly("channels", &taylor::Engine::channels)
        .def(
            "forward",
            [](const taylor::Engine& e, const ComplexArray& noisy, bool streaming) {
                const auto s = to_spec(noisy);
                return taylor_dict(streaming ? e.forward_streaming(s) : e.forward_offline(s));
            },
            py::arg("spec"), py::arg("streaming") = true,
            "per-order terms, partial sums and the enhanced spectrum; streaming=False runs layer-major")
        .def(
            "enhance",
            [](EnginePtr e, const RealArray& x, std::size_t chunk) {
                return from_vector(runtime::enhance_signal(std::move(e), to_channels(x), chunk));
            },
            py::arg("signal"), py::arg("chunk") = 160, "sample-domain streaming enhancement, output length = input")
        .def(
            "bench_rtf",
            [](EnginePtr e, double seconds, int runs, std::uint64_t seed) {
                return runtime::bench_rtf(std::move(e), seconds, runs, seed).runs;
            },
            py::arg("seconds") = 10.0, py::arg("runs") = 5, py::arg("seed") = 7);

    // evaluation
    m.def(
        "mix",
        [](const RealArray& clean, const RealArray& noise, double snr_db) {
            return from_vector(eval::mix(to_vector(clean), to_vector(noise), snr_db));
        },
        py::arg("clean"), py::arg("noise"), py::arg("snr_db"));
    m.def(
        "si_snr", [](const RealArray& est, const RealArray& ref) { return eval::si_snr(to_vector(est), to_vector(ref)); },
        py::arg("estimate"), py::arg("reference"));
    m.def(
        "snr", [](const RealArray& est, const RealArray& ref) { return eval::snr(to_vector(est), to_vector(ref)); },
        py::arg("estimate"), py::arg("reference"));
    m.def(
        "orthogonalize",
        [](const RealArray& noise, const RealArray& ref) {
            return from_vector(eval::orthogonalize(to_vector(noise), to_vector(ref)));
        },
        py::arg("noise"), py::arg("reference"));
    m.def(
        "white_noise", [](std::size_t n, std::uint64_t seed) { return from_vector(eval::white_noise(n, seed)); },
        py::arg("length"), py::arg("seed") = 0);
}
