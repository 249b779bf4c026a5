#include "dgcim/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "dgcim/attention.hpp"
#include "dgcim/cost.hpp"
#include "dgcim/crossbar.hpp"
#include "dgcim/device.hpp"
#include "dgcim/oracle.hpp"
#include "dgcim/quant.hpp"
#include "dgcim/sfu.hpp"

namespace dgcim {

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& msg) {
        if (!cond) {
            ok = false;
            if (detail.tellp() > 0) detail << "; ";
            detail << msg;
        }
    }
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

CriterionResult finish(const std::string& name, double limit_s, Check& c,
                       Clock::time_point start, const std::string& pass_detail) {
    CriterionResult r;
    r.name = name;
    r.limit_seconds = limit_s;
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (r.seconds > limit_s) {
        c.ok = false;
        if (c.detail.tellp() > 0) c.detail << "; ";
        c.detail << "exceeded time budget (" << fmt_double(r.seconds) << " s > "
                 << fmt_double(limit_s) << " s)";
    }
    r.pass = c.ok;
    r.detail = c.ok ? pass_detail : c.detail.str();
    return r;
}

// ---- criterion implementations -------------------------------------------

CriterionResult check_write_volume() {
    const auto t0 = Clock::now();
    Check c;
    const std::uint64_t v512 = write_volume(512, 64, 12, 12, 8, 2);
    const std::uint64_t v128 = write_volume(128, 64, 12, 12, 8, 2);
    c.require(v512 == 75497472ULL, "write_volume(512,...) = " + std::to_string(v512) +
                                       ", expected 75497472");
    c.require(v128 == 18874368ULL, "write_volume(128,...) = " + std::to_string(v128) +
                                       ", expected 18874368");
    return finish("write-volume closed form (75.5M / 18.9M)", 1e-3, c, t0,
                  "75497472 and 18874368 exact");
}

CriterionResult check_write_freedom() {
    const auto t0 = Clock::now();
    Check c;
    std::uint64_t total = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        AttentionJob job;
        job.seed = seed;
        job.n_tokens = 4 + static_cast<int>(seed % 9);
        job.d_k = (seed % 2) ? 4 : 2;
        job.n_heads = (seed % 3) ? 2 : 1;
        job.d_model = job.d_k * job.n_heads;
        job.n_layers = (seed % 4) ? 1 : 2;
        job.mode = Mode::CimTrilinear;
        PipelineConfig cfg;  // stock INT8 configuration
        const RunResult res = run_trilinear_mode(job, generate_weights(job), cfg);
        total += res.writes.cells;
        c.require(res.writes.cells == 0,
                  "seed " + std::to_string(seed) + " wrote " + std::to_string(res.writes.cells) +
                      " cells");
    }
    return finish("trilinear write freedom (20 seeded jobs)", 10.0, c, t0,
                  "0 runtime cell writes across all jobs");
}

CriterionResult check_fused_equivalence(double eta_perturbation) {
    const auto t0 = Clock::now();
    Check c;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        AttentionJob job;
        job.seed = seed * 7919;
        job.n_heads = seed % 3 == 0 ? 4 : (seed % 3 == 1 ? 2 : 1);
        job.d_k = 2 + static_cast<int>(seed % 3);
        if (job.n_heads * job.d_k > 16) job.d_k = 16 / job.n_heads;
        job.d_model = job.n_heads * job.d_k;
        job.n_tokens = 2 + static_cast<int>(seed % 15);
        job.n_layers = 1;
        job.mode = Mode::CimTrilinear;

        const std::vector<LayerWeights> w = generate_weights(job);
        PipelineConfig cfg = ideal_config();
        cfg.analog_eta_offset = eta_perturbation;
        const RunResult res = run_trilinear_mode(job, w, cfg);

        // independent oracle: triple-loop attention, then the output projection
        AttentionJob oracle_job = job;
        oracle_job.x_input = generate_input(job);
        const Mat pre = oracle::naive_attention(oracle_job.x_input, w[0].w_q, w[0].w_k, w[0].w_v);
        Mat eye(w[0].w_o.rows, w[0].w_o.rows);
        for (std::size_t i = 0; i < eye.rows; ++i) eye(i, i) = 1.0;
        const Mat ref = oracle::triple_product(pre, w[0].w_o, eye);

        const double err = max_abs_diff(res.output, ref);
        const double norm = ref.max_abs();
        worst = std::max(worst, err / std::max(norm, 1e-300));
        if (err > 1e-6 * norm) {
            c.require(false, "seed " + std::to_string(job.seed) + ": rel err " +
                                 fmt_double(err / norm));
            break;
        }
    }
    return finish("fused-dataflow equivalence vs naive oracle (200 jobs, ideal peripherals)", 60.0,
                  c, t0, "worst relative error " + fmt_double(worst) + " <= 1e-6");
}

CriterionResult check_device_identities() {
    const auto t0 = Clock::now();
    Check c;
    DeviceParams p;  // alpha = 0.137, M = 1.54

    for (int gi = 0; gi < 50 && c.ok; ++gi) {
        const double g0 = 29.0 + 40.0 * gi / 49.0;
        const double eta = eta_bg(g0, p);
        for (int vi = 0; vi < 50; ++vi) {
            const double v = -1.0 + 2.0 * vi / 49.0;
            const double diff = gds_full(g0, v, p) - gds_linear(g0, v, eta);
            const double expected = p.m_coeff * p.alpha * v * v;
            if (expected == 0.0) {
                c.require(std::abs(diff) < 1e-12, "nonzero residual at v = 0");
            } else if (std::abs(diff - expected) > 1e-9 * expected) {
                c.require(false, "second-order residual off at g0 = " + fmt_double(g0) +
                                     ", v = " + fmt_double(v));
                break;
            }
        }
    }

    const double eta69 = eta_bg(69.0, p);
    c.require(std::abs(eta69 - 0.15932) <= 1e-5,
              "eta_bg(69) = " + fmt_double(eta69) + ", expected 0.15932 +- 1e-5");

    std::vector<GVSample> samples;
    for (int i = 0; i <= 10; ++i) {
        const double v = -1.0 + 0.2 * i;
        samples.push_back({v, gds_full(50.0, v, p)});
    }
    const FitResult fit = fit_alpha_m(samples, 50.0);
    c.require(std::abs(fit.alpha - p.alpha) <= 1e-6 * p.alpha &&
                  std::abs(fit.m_coeff - p.m_coeff) <= 1e-6 * p.m_coeff,
              "fit round trip gave (" + fmt_double(fit.alpha) + ", " + fmt_double(fit.m_coeff) +
                  ")");
    return finish("device-model identities (second-order residual, eta, fit round trip)", 5.0, c,
                  t0, "residual = M*alpha*V^2 to 1e-9; eta_bg(69uS) = " + fmt_double(eta69) +
                          "; fit exact to 1e-6");
}

CriterionResult check_cell_round_trip() {
    const auto t0 = Clock::now();
    Check c;
    for (int bpc : {2, 1}) {
        int mismatches = 0;
        for (int v = -127; v <= 127; ++v) {
            Mat m(1, 1);
            m(0, 0) = static_cast<double>(v);
            QuantTensor q = quantize(m, 1.0, 8);
            const CellDecomposition dec = decompose_cells(q, bpc);
            const IMat back = recombine(dec.planes, dec.sign_plane, bpc);
            if (back(0, 0) != v) ++mismatches;
        }
        c.require(mismatches == 0, std::to_string(bpc) + "-bit cells: " +
                                       std::to_string(mismatches) + " mismatches");
    }
    return finish("cell decomposition round trip (exhaustive int8, 2-bit and 1-bit cells)", 1.0, c,
                  t0, "0 mismatches");
}

CriterionResult check_sfu_accuracy() {
    const auto t0 = Clock::now();
    Check c;
    SfuConfig sfu;

    double worst_sm = 0.0;
    auto rng = seeded_stream(2024, "verify.softmax");
    for (int it = 0; it < 1000; ++it) {
        std::vector<double> x(8);
        for (double& v : x) v = uniform_double(rng, -6.0, 6.0);
        const FixedVec xf = to_fixed(x, 8);
        const FixedVec out = softmax_pipeline(xf, sfu);
        const std::vector<double> ref = oracle::float_softmax(to_real(xf));
        for (std::size_t i = 0; i < x.size(); ++i)
            worst_sm = std::max(worst_sm, std::abs(out.data[i] * out.scale - ref[i]));
    }
    c.require(worst_sm <= 1e-2, "softmax max abs error " + fmt_double(worst_sm));

    double worst_ln = 0.0;
    auto rng_ln = seeded_stream(2024, "verify.layernorm");
    for (int it = 0; it < 1000; ++it) {
        std::vector<double> x(16), g(16), b(16);
        for (auto& v : x) v = uniform_double(rng_ln, -2.0, 2.0);
        for (auto& v : g) v = uniform_double(rng_ln, 0.8, 1.2);
        for (auto& v : b) v = uniform_double(rng_ln, -0.2, 0.2);
        const FixedVec xf = to_fixed(x, 8);
        const FixedVec gf = to_fixed(g, 8);
        const FixedVec bf = to_fixed(b, 8);
        const FixedVec out = layernorm_pipeline(xf, gf, bf, sfu);
        const std::vector<double> ref =
            oracle::float_layernorm(to_real(xf), to_real(gf), to_real(bf));
        for (std::size_t i = 0; i < x.size(); ++i)
            worst_ln = std::max(worst_ln, std::abs(out.data[i] * out.scale - ref[i]));
    }
    c.require(worst_ln <= 2e-2, "layernorm max abs error " + fmt_double(worst_ln));

    double worst_ge = 0.0;
    auto rng_ge = seeded_stream(2024, "verify.gelu");
    for (int it = 0; it < 1000; ++it) {
        std::vector<double> x(16);
        for (auto& v : x) v = uniform_double(rng_ge, -4.0, 4.0);
        const FixedVec xf = to_fixed(x, 8);
        const FixedVec out = gelu_pipeline(xf, sfu);
        const std::vector<double> xr = to_real(xf);
        for (std::size_t i = 0; i < x.size(); ++i)
            worst_ge = std::max(worst_ge,
                                std::abs(out.data[i] * out.scale -
                                         oracle::float_gelu_sigmoid(xr[i])));
    }
    c.require(worst_ge <= 2e-2, "gelu max abs error " + fmt_double(worst_ge));

    // shift invariance holds exactly at the integer level
    auto rng_sh = seeded_stream(2024, "verify.shift");
    for (int it = 0; it < 100; ++it) {
        FixedVec a;
        a.bits = 8;
        a.scale = 0.05;
        for (int i = 0; i < 8; ++i)
            a.data.push_back(static_cast<std::int32_t>(uniform_double(rng_sh, -100.0, 100.0)));
        FixedVec b = a;
        const std::int32_t shift = static_cast<std::int32_t>(uniform_double(rng_sh, -20.0, 20.0));
        for (auto& v : b.data) v += shift;
        const FixedVec pa = softmax_pipeline(a, sfu);
        const FixedVec pb = softmax_pipeline(b, sfu);
        c.require(pa.data == pb.data, "softmax shift invariance violated");
        if (!c.ok) break;
    }
    return finish("SFU accuracy vs float oracles (softmax/layernorm/gelu) + shift invariance",
                  30.0, c, t0,
                  "max abs errors: softmax " + fmt_double(worst_sm) + ", layernorm " +
                      fmt_double(worst_ln) + ", gelu " + fmt_double(worst_ge) +
                      "; shift invariance exact");
}

CriterionResult check_scaling_laws() {
    const auto t0 = Clock::now();
    Check c;
    EnergyParams ep;

    auto run_pair = [&](int n) {
        AttentionJob job;
        job.n_tokens = n;
        job.d_model = 32;
        job.d_k = 16;
        job.n_heads = 2;
        job.n_layers = 1;
        job.seed = 99;
        PipelineConfig cfg;  // stock INT8 configuration
        const std::vector<LayerWeights> w = generate_weights(job);
        job.mode = Mode::CimTrilinear;
        const RunResult tri = run_trilinear_mode(job, w, cfg);
        job.mode = Mode::CimBilinear;
        const RunResult bil = run_bilinear_mode(job, w, cfg);
        ep.subarray_rows = cfg.subarray_rows;
        return std::make_tuple(build_cost_report(tri.trace, ep, Mode::CimTrilinear, job),
                               build_cost_report(bil.trace, ep, Mode::CimBilinear, job),
                               bil.writes.cells);
    };

    const auto [tri64, bil64, writes64] = run_pair(64);
    const auto [tri128, bil128, writes128] = run_pair(128);

    const std::uint64_t reads64 = tri64.stages.at("score").array_reads;
    const std::uint64_t reads128 = tri128.stages.at("score").array_reads;
    c.require(reads128 == 4 * reads64, "score-stage read ratio " +
                                           std::to_string(reads128) + "/" +
                                           std::to_string(reads64) + " != 4");
    c.require(writes128 == 2 * writes64, "bilinear write-cell ratio != 2");
    c.require(writes64 == write_volume(64, 16, 2, 1, 8, 2),
              "simulated bilinear writes disagree with the closed form at N=64");
    c.require(writes128 == write_volume(128, 16, 2, 1, 8, 2),
              "simulated bilinear writes disagree with the closed form at N=128");

    const double frac64 = bil64.total_energy.write_fj / bil64.total_energy.total_fj();
    const double frac128 = bil128.total_energy.write_fj / bil128.total_energy.total_fj();
    c.require(frac128 < frac64, "write-energy fraction did not shrink: " + fmt_double(frac64) +
                                    " -> " + fmt_double(frac128));
    return finish("scaling trends on N doubling (reads x4, writes x2, write fraction shrinks)",
                  10.0, c, t0,
                  "score reads x4 exact, write cells x2 exact, write fraction " +
                      fmt_double(frac64) + " -> " + fmt_double(frac128));
}

CriterionResult check_buffer_residency() {
    const auto t0 = Clock::now();
    Check c;
    for (const auto& [n, d] : std::vector<std::pair<int, int>>{{1, 1}, {8, 16}, {64, 768},
                                                               {512, 768}}) {
        const std::uint64_t conv = buffer_residency_bytes(DataflowKind::Conventional, n, d, 1);
        const std::uint64_t tri = buffer_residency_bytes(DataflowKind::Trilinear, n, d, 1);
        c.require(conv == 3 * tri, "residency ratio != 3 at n = " + std::to_string(n));
    }
    c.require(buffer_residency_bytes(DataflowKind::Trilinear, 64, 768, 1) == 49152ULL,
              "trilinear residency at (64, 768) != 49152");
    return finish("buffer residency ratio (3x conventional vs fused)", 1e-3, c, t0,
                  "ratio 3 exact for all dims; 49152 bytes at (64, 768)");
}

CriterionResult check_baseline_cancellation() {
    const auto t0 = Clock::now();
    Check c;
    auto rng = seeded_stream(4242, "verify.baseline");
    for (int it = 0; it < 100 && c.ok; ++it) {
        const std::size_t rows = 1 + static_cast<std::size_t>(uniform_double(rng, 0, 8));
        const std::size_t cols = 1 + static_cast<std::size_t>(uniform_double(rng, 0, 8));
        const Mat g = random_mat(rng, rows, cols, 29.0, 69.0);
        const CrossbarArray xbar = program_array(g, 0.157, 29.0, 69.0);
        std::vector<double> v(rows);
        for (double& e : v) e = uniform_double(rng, -1.0, 1.0);
        Peripherals p;
        const std::vector<double> bg(it % 2 ? 1 : cols, 0.0);
        const ReadResult r = trilinear_read(xbar, v, bg, p);
        for (std::size_t j = 0; j < cols; ++j) {
            c.require(r.codes[j] == 0 && r.currents_ua[j] == 0.0,
                      "nonzero difference at case " + std::to_string(it));
            if (!c.ok) break;
        }
    }
    return finish("baseline cancellation (v_bg = 0 on 100 random arrays)", 5.0, c, t0,
                  "difference exactly zero on every array");
}

CriterionResult check_declared_non_targets() {
    const auto t0 = Clock::now();
    Check c;
    const EnergyParams p;
    c.require(std::abs((1.0 + p.bg_area_overhead) - 1.373) < 1e-12,
              "stock area-overhead calibration drifted");
    return finish("absolute PPA and task accuracy: declared non-targets", 1e-3, c, t0,
                  "structural identities only; area overhead calibration 1.373 available");
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const VerifyOptions& opts) {
    std::vector<CriterionResult> out;
    out.push_back(check_write_volume());
    out.push_back(check_write_freedom());
    out.push_back(check_fused_equivalence(opts.eta_perturbation));
    out.push_back(check_device_identities());
    out.push_back(check_cell_round_trip());
    out.push_back(check_sfu_accuracy());
    out.push_back(check_scaling_laws());
    out.push_back(check_buffer_residency());
    out.push_back(check_baseline_cancellation());
    out.push_back(check_declared_non_targets());
    return out;
}

bool print_results(const std::vector<CriterionResult>& results, std::ostream& out) {
    bool all = true;
    for (const CriterionResult& r : results) {
        out << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  [" << fmt_double(r.seconds)
            << " s / " << fmt_double(r.limit_seconds) << " s]";
        if (!r.detail.empty()) out << "  -- " << r.detail;
        out << '\n';
        all = all && r.pass;
    }
    out << (all ? "ALL CRITERIA PASSED" : "CRITERIA FAILED") << '\n';
    return all;
}

}  // namespace dgcim
