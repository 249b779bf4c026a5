#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dgcim/attention.hpp"
#include "dgcim/cost.hpp"
#include "dgcim/device.hpp"
#include "dgcim/oracle.hpp"
#include "dgcim/quant.hpp"
#include "dgcim/sfu.hpp"

namespace py = pybind11;
using namespace dgcim;

namespace {

Mat mat_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Mat m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

py::array_t<double> array_from_mat(const Mat& m) {
    py::array_t<double> a({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), a.mutable_data());
    return a;
}

AttentionJob make_job(int n_tokens, int d_model, int d_k, int n_heads, int n_layers,
                      const std::string& mode, std::uint64_t seed) {
    AttentionJob job;
    job.n_tokens = n_tokens;
    job.d_model = d_model;
    job.d_k = d_k;
    job.n_heads = n_heads;
    job.n_layers = n_layers;
    job.mode = mode_from_string(mode);
    job.seed = seed;
    validate(job);
    return job;
}

py::dict run_attention(int n_tokens, int d_model, int d_k, int n_heads, int n_layers,
                       const std::string& mode, std::uint64_t seed, bool ideal,
                       const py::object& x) {
    AttentionJob job = make_job(n_tokens, d_model, d_k, n_heads, n_layers, mode, seed);
    if (!x.is_none()) {
        job.x_input = mat_from_array(
            x.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>());
        validate(job);
    }
    const PipelineConfig cfg = ideal ? ideal_config() : PipelineConfig();
    const std::vector<LayerWeights> w = generate_weights(job);
    const RunResult res = run_mode(job, w, cfg);

    EnergyParams ep;
    ep.subarray_rows = cfg.subarray_rows;
    const CostReport rep = build_cost_report(res.trace, ep, job.mode, job);

    const Mat ref = run_reference_attention(job, w);
    const double err = max_abs_diff(res.output, ref);
    const double norm = ref.max_abs();

    py::dict out;
    out["output"] = array_from_mat(res.output);
    out["writes_cells"] = res.writes.cells;
    out["energy_fj"] = rep.total_energy.total_fj();
    out["latency_ns"] = rep.total_latency_ns;
    out["cell_reads"] = rep.cell_reads_total;
    out["max_rel_error_vs_reference"] = norm > 0 ? err / norm : 0.0;
    out["peak_intermediate_matrices"] = res.trace.peak_intermediate_matrices;
    return out;
}

}  // namespace

PYBIND11_MODULE(dgcim_py, m) {
    m.doc() = "DG-FeFET trilinear compute-in-memory attention simulator";

    py::class_<DeviceParams>(m, "DeviceParams")
        .def(py::init<>())
        .def_readwrite("alpha", &DeviceParams::alpha)
        .def_readwrite("m_coeff", &DeviceParams::m_coeff)
        .def_readwrite("band_lo_us", &DeviceParams::band_lo_us)
        .def_readwrite("band_hi_us", &DeviceParams::band_hi_us)
        .def_readwrite("eta_bar", &DeviceParams::eta_bar);

    m.def("eta_bg", &eta_bg, py::arg("g0_us"), py::arg("params") = DeviceParams(),
          "First-order back-gate sensitivity alpha + M/G0 (1/V).");
    m.def("gds_linear", &gds_linear, py::arg("g0_us"), py::arg("v_bg"), py::arg("eta"),
          "Linearized conductance response G0 * (1 + eta * v_bg).");
    m.def("gds_full", &gds_full, py::arg("g0_us"), py::arg("v_bg"),
          py::arg("params") = DeviceParams(), "Full conductance response with mobility term.");
    m.def(
        "fit_alpha_m",
        [](const std::vector<std::pair<double, double>>& samples, double g0) {
            std::vector<GVSample> gv;
            for (const auto& [v, g] : samples) gv.push_back({v, g});
            const FitResult r = fit_alpha_m(gv, g0);
            return py::make_tuple(r.alpha, r.m_coeff, r.residual_norm);
        },
        py::arg("samples"), py::arg("g0_us"),
        "Least-squares (alpha, M) fit from [(v_bg, g_ds_us), ...] at known G0.");
    m.def(
        "band_average_eta",
        [](double lo, double hi, const DeviceParams& p, const std::string& method) {
            EtaAverage m_ = EtaAverage::FixedConstant;
            if (method == "uniform-grid-mean") m_ = EtaAverage::UniformGridMean;
            else if (method == "endpoint-mean") m_ = EtaAverage::EndpointMean;
            else if (method != "fixed-constant")
                throw std::invalid_argument("unknown averaging method: " + method);
            return band_average_eta(lo, hi, p, m_);
        },
        py::arg("band_lo_us"), py::arg("band_hi_us"), py::arg("params") = DeviceParams(),
        py::arg("method") = "fixed-constant");

    m.def(
        "quantize",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, int bits) {
            const Mat mx = mat_from_array(x);
            const QuantTensor q = quantize(mx, calibrate_scale(mx, bits), bits);
            py::array_t<std::int64_t> codes({q.data.rows, q.data.cols});
            std::copy(q.data.data.begin(), q.data.data.end(), codes.mutable_data());
            return py::make_tuple(codes, q.scale);
        },
        py::arg("x"), py::arg("bits") = 8,
        "Symmetric uniform quantization with a calibrated per-tensor scale.");

    m.def("write_volume", &write_volume, py::arg("n_tokens"), py::arg("d_k"), py::arg("n_heads"),
          py::arg("n_layers"), py::arg("value_bits") = 8, py::arg("bits_per_cell") = 2,
          "Runtime programming volume of the conventional dataflow (cells).");
    m.def(
        "buffer_residency",
        [](const std::string& kind, int n, int d, int bytes_per_elem) {
            return buffer_residency_bytes(
                kind == "trilinear" ? DataflowKind::Trilinear : DataflowKind::Conventional, n, d,
                bytes_per_elem);
        },
        py::arg("kind"), py::arg("n_tokens"), py::arg("d_model"), py::arg("bytes_per_elem") = 1);

    m.def(
        "softmax_fixed",
        [](const std::vector<double>& x, int bits) {
            const FixedVec out = softmax_pipeline(to_fixed(x, bits));
            return to_real(out);
        },
        py::arg("x"), py::arg("bits") = 8, "Fixed-point LUT softmax pipeline.");
    m.def(
        "gelu_fixed",
        [](const std::vector<double>& x, int bits) {
            const FixedVec out = gelu_pipeline(to_fixed(x, bits));
            return to_real(out);
        },
        py::arg("x"), py::arg("bits") = 8, "Fixed-point sigmoid-approximated GELU pipeline.");

    m.def(
        "reference_attention",
        [](int n_tokens, int d_model, int d_k, int n_heads, int n_layers, std::uint64_t seed) {
            const AttentionJob job =
                make_job(n_tokens, d_model, d_k, n_heads, n_layers, "cim-trilinear", seed);
            return array_from_mat(run_reference_attention(job, generate_weights(job)));
        },
        py::arg("n_tokens"), py::arg("d_model"), py::arg("d_k"), py::arg("n_heads"),
        py::arg("n_layers") = 1, py::arg("seed") = 1,
        "Float ground-truth attention stack for seed-generated weights.");

    m.def(
        "layernorm_fixed",
        [](const std::vector<double>& x, const std::vector<double>& gamma,
           const std::vector<double>& beta, int bits) {
            const FixedVec out =
                layernorm_pipeline(to_fixed(x, bits), to_fixed(gamma, bits), to_fixed(beta, bits));
            return to_real(out);
        },
        py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("bits") = 8,
        "Fixed-point two-pass LayerNorm pipeline.");

    m.def("run_attention", &run_attention, py::arg("n_tokens"), py::arg("d_model"),
          py::arg("d_k"), py::arg("n_heads"), py::arg("n_layers"), py::arg("mode"),
          py::arg("seed") = 1, py::arg("ideal") = false, py::arg("x") = py::none(),
          "Execute one job; returns output, write counts and modeled cost. "
          "x overrides the seed-generated input sequence.");
}
