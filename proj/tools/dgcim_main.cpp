#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dgcim/attention.hpp"
#include "dgcim/config.hpp"
#include "dgcim/cost.hpp"
#include "dgcim/device.hpp"
#include "dgcim/oracle.hpp"
#include "dgcim/report.hpp"
#include "dgcim/verify.hpp"

namespace fs = std::filesystem;
using namespace dgcim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitSimError = 3;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string mode;
    bool debug_currents = false;
};

ExperimentConfig load_with_overrides(const CommonOpts& o) {
    ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig() : load_config_file(o.config_path);
    if (o.seed) cfg.job.seed = *o.seed;
    if (!o.mode.empty()) cfg.job.mode = mode_from_string(o.mode);
    if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
    if (o.debug_currents) cfg.debug_currents = true;
    return cfg;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

std::vector<LayerWeights> resolve_weights(const ExperimentConfig& cfg) {
    if (!cfg.weights_path.empty()) return load_weights(cfg.weights_path, cfg.job);
    return generate_weights(cfg.job);
}

EnergyParams energy_params(const ExperimentConfig& cfg) {
    EnergyParams p = cfg.energy;
    p.subarray_rows = cfg.subarray_rows;
    return p;
}

std::optional<ErrorReport> oracle_error(const ExperimentConfig& cfg,
                                        const std::vector<LayerWeights>& w, const Mat& output) {
    if (cfg.oracle_check == "off") return std::nullopt;
    const double work = static_cast<double>(cfg.job.n_tokens) * cfg.job.d_model * cfg.job.n_layers;
    if (cfg.oracle_check == "auto" && work > 1e6) return std::nullopt;
    const Mat ref = run_reference_attention(cfg.job, w);
    ErrorReport err;
    err.max_abs_error = max_abs_diff(output, ref);
    err.ref_inf_norm = ref.max_abs();
    err.max_rel_error = err.ref_inf_norm > 0 ? err.max_abs_error / err.ref_inf_norm : 0.0;
    return err;
}

int cmd_run(const CommonOpts& opts) {
    ExperimentConfig cfg;
    try {
        cfg = load_with_overrides(opts);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitBadConfig;
    }

    try {
        fs::create_directories(cfg.output_dir);
        for (const std::string& warning : consistency_warnings(cfg.device))
            std::cerr << "warning: " << warning << '\n';

        PipelineConfig pc = make_pipeline_config(cfg);
        std::ofstream currents;
        if (cfg.debug_currents) {
            currents.open(fs::path(cfg.output_dir) / "currents.txt");
            pc.periph.debug_currents = &currents;
        }

        const std::vector<LayerWeights> w = resolve_weights(cfg);
        const RunResult res = run_mode(cfg.job, w, pc);
        const CostReport rep = build_cost_report(res.trace, energy_params(cfg), cfg.job.mode,
                                                 cfg.job);
        const std::optional<ErrorReport> err = oracle_error(cfg, w, res.output);

        write_file(fs::path(cfg.output_dir) / "report.json", report_json(rep, cfg, err));
        write_file(fs::path(cfg.output_dir) / "report.csv", report_csv(rep));
        std::vector<std::string> outputs = {"report.json", "report.csv"};
        if (cfg.debug_currents) outputs.push_back("currents.txt");
        const RunManifest manifest = make_manifest(cfg, outputs);
        write_file(fs::path(cfg.output_dir) / "manifest.json", manifest_json(manifest));

        std::cout << "mode " << mode_name(cfg.job.mode) << ": " << res.writes.cells
                  << " runtime cell writes, "
                  << rep.total_energy.total_fj() * 1e-9 << " uJ, "
                  << rep.total_latency_ns * 1e-6 << " ms (model units)\n";
        if (err)
            std::cout << "max error vs reference: " << err->max_rel_error
                      << " (relative to ||ref||_inf)\n";
        std::cout << "reports written to " << cfg.output_dir << '\n';
        return kExitOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitBadConfig;
    } catch (const std::exception& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return kExitSimError;
    }
}

int cmd_sweep(const CommonOpts& opts) {
    ExperimentConfig cfg;
    try {
        cfg = load_with_overrides(opts);
        if (cfg.sweep.empty()) {
            std::cerr << "config error: sweep section is empty\n";
            return kExitBadConfig;
        }
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitBadConfig;
    }

    try {
        fs::create_directories(cfg.output_dir);
        std::vector<int> seqs = cfg.sweep.seq_lengths.empty() ? std::vector<int>{cfg.job.n_tokens}
                                                              : cfg.sweep.seq_lengths;
        std::vector<int> subs = cfg.sweep.subarray_sizes.empty()
                                    ? std::vector<int>{cfg.subarray_rows}
                                    : cfg.sweep.subarray_sizes;
        std::vector<std::pair<int, int>> prec =
            cfg.sweep.bitcell_adc.empty()
                ? std::vector<std::pair<int, int>>{{cfg.quant.bits_per_cell, cfg.quant.adc_bits}}
                : cfg.sweep.bitcell_adc;

        std::string csv = sweep_csv_header();
        for (int seq : seqs)
            for (int sub : subs)
                for (const auto& [bpc, adc] : prec) {
                    ExperimentConfig point = cfg;
                    point.job.n_tokens = seq;
                    point.subarray_rows = point.subarray_cols = sub;
                    point.quant.bits_per_cell = bpc;
                    point.quant.adc_bits = adc;
                    const PipelineConfig pc = make_pipeline_config(point);
                    const std::vector<LayerWeights> w = resolve_weights(point);

                    SweepRow row;
                    row.seq = seq;
                    row.subarray = sub;
                    row.bits_per_cell = bpc;
                    row.adc_bits = adc;

                    AttentionJob job = point.job;
                    job.mode = Mode::CimBilinear;
                    const RunResult bil = run_bilinear_mode(job, w, pc);
                    row.bilinear = build_cost_report(bil.trace, energy_params(point),
                                                     Mode::CimBilinear, job);
                    job.mode = Mode::CimTrilinear;
                    const RunResult tri = run_trilinear_mode(job, w, pc);
                    row.trilinear = build_cost_report(tri.trace, energy_params(point),
                                                      Mode::CimTrilinear, job);
                    csv += sweep_csv_row(row);
                }
        write_file(fs::path(cfg.output_dir) / "sweep.csv", csv);
        const RunManifest manifest = make_manifest(cfg, {"sweep.csv"});
        write_file(fs::path(cfg.output_dir) / "manifest.json", manifest_json(manifest));
        std::cout << "sweep written to " << (fs::path(cfg.output_dir) / "sweep.csv").string()
                  << '\n';
        return kExitOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitBadConfig;
    } catch (const std::exception& e) {
        std::cerr << "simulation error: " << e.what() << '\n';
        return kExitSimError;
    }
}

int cmd_verify(double perturb_eta) {
    VerifyOptions opts;
    opts.eta_perturbation = perturb_eta;
    const std::vector<CriterionResult> results = run_acceptance(opts);
    const bool ok = print_results(results, std::cout);
    return ok ? kExitOk : kExitVerifyFail;
}

int cmd_fit(const std::string& data_path, const std::string& out_path, double g0) {
    std::vector<GVSample> samples;
    try {
        samples = load_gv_samples_file(data_path);
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitBadConfig;
    }
    try {
        const FitResult fit = fit_alpha_m(samples, g0);
        std::ostringstream os;
        os << "# fitted device constants (" << samples.size() << " samples, g0 = " << g0
           << " uS)\n";
        os << "device.alpha = " << fit.alpha << '\n';
        os << "device.m_coeff = " << fit.m_coeff << '\n';
        os << "# residual_norm_us = " << fit.residual_norm << '\n';
        if (out_path.empty())
            std::cout << os.str();
        else {
            write_file(out_path, os.str());
            std::cout << "fitted alpha = " << fit.alpha << " 1/V, M = " << fit.m_coeff
                      << " uS/V (residual " << fit.residual_norm << " uS) -> " << out_path << '\n';
        }
        return kExitOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return kExitBadConfig;
    } catch (const std::exception& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return kExitSimError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DG-FeFET trilinear compute-in-memory attention simulator"};
    app.require_subcommand(1);

    CommonOpts opts;

    CLI::App* run = app.add_subcommand("run", "execute one configured job and write reports");
    run->add_option("--config", opts.config_path, "experiment config file");
    run->add_option("--out", opts.out_dir, "output directory (overrides output.dir)");
    run->add_option("--seed", opts.seed, "job seed (overrides job.seed)");
    run->add_option("--mode", opts.mode, "digital | bilinear | trilinear");
    run->add_flag("--debug-currents", opts.debug_currents, "dump pre-ADC currents");

    CLI::App* sweep = app.add_subcommand("sweep", "cross-product sweep, one CSV row per point");
    sweep->add_option("--config", opts.config_path, "experiment config file")->required();
    sweep->add_option("--out", opts.out_dir, "output directory");
    sweep->add_option("--seed", opts.seed, "job seed");

    double perturb_eta = 0.0;
    CLI::App* verify = app.add_subcommand("verify", "run the built-in acceptance suite");
    verify->add_option("--perturb-eta", perturb_eta,
                       "test hook: offset the analog sensitivity from the recovery constant");

    std::string fit_data, fit_out;
    double fit_g0 = 50.0;
    CLI::App* fit = app.add_subcommand("fit", "fit device constants from a G-V data file");
    fit->add_option("data", fit_data, "two-column text file: v_bg g_ds_us")->required();
    fit->add_option("--out", fit_out, "write the fitted fragment here instead of stdout");
    fit->add_option("--g0", fit_g0, "zero-bias conductance of the data (uS)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (verify->parsed()) return cmd_verify(perturb_eta);
    if (fit->parsed()) return cmd_fit(fit_data, fit_out, fit_g0);
    return kExitOk;
}
