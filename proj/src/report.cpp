#include "dgcim/report.hpp"

#include <sstream>

#include <json.hpp>

namespace dgcim {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ordered_json energy_json(const EnergyBreakdown& e) {
    return ordered_json{{"array_read_fj", e.array_read_fj},
                        {"bg_modulation_fj", e.bg_modulation_fj},
                        {"dac_fj", e.dac_fj},
                        {"write_fj", e.write_fj},
                        {"sfu_fj", e.sfu_fj},
                        {"buffer_fj", e.buffer_fj},
                        {"total_fj", e.total_fj()}};
}

ordered_json stage_json(const StageCost& c) {
    return ordered_json{{"reads", c.reads},
                        {"writes_cells", c.writes_cells},
                        {"cycles", c.cycles},
                        {"array_reads", c.array_reads},
                        {"energy", energy_json(c.energy)},
                        {"latency_ns", c.latency_ns}};
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

}  // namespace

std::string report_json(const CostReport& rep, const ExperimentConfig& cfg,
                        const std::optional<ErrorReport>& err) {
    ordered_json j;
    j["config_hash"] = config_hash(cfg);
    j["tool_version"] = kToolVersion;
    j["mode"] = rep.mode;
    j["job"] = ordered_json{{"n_tokens", cfg.job.n_tokens}, {"d_model", cfg.job.d_model},
                            {"d_k", cfg.job.d_k},           {"n_heads", cfg.job.n_heads},
                            {"n_layers", cfg.job.n_layers}, {"seed", cfg.job.seed}};
    j["device"] = ordered_json{
        {"eta_bar", cfg.device.eta_bar},
        {"band_lo_us", cfg.device.band_lo_us},
        {"band_hi_us", cfg.device.band_hi_us},
        {"eta_uniformity_bound",
         band_uniformity_bound(cfg.device.band_lo_us, cfg.device.band_hi_us, cfg.device)},
        {"warnings", consistency_warnings(cfg.device)}};
    ordered_json stages;
    for (const auto& [name, c] : rep.stages) stages[name] = stage_json(c);
    j["stages"] = stages;
    j["totals"] = ordered_json{
        {"energy", energy_json(rep.total_energy)},
        {"latency_ns", rep.total_latency_ns},
        {"writes_cells", rep.writes_cells_total},
        {"cell_reads", rep.cell_reads_total},
        {"cycles", rep.cycles_total},
        {"buffer_residency_bytes", rep.buffer_residency},
        {"area_mm2_relative", rep.area_mm2},
        {"head_aggregation", "latency is the max across parallel heads, energy the sum"}};
    if (rep.total_cells > 0) {
        EnergyParams ep = cfg.energy;
        ep.subarray_rows = cfg.subarray_rows;
        const HierarchyPlan plan = plan_hierarchy(rep.total_cells, cfg.subarray_rows,
                                                  cfg.subarray_cols, rep.buffer_residency, ep);
        j["hierarchy"] = ordered_json{{"n_tiles", plan.n_tiles},
                                      {"pes_per_tile", plan.pes_per_tile},
                                      {"arrays_per_pe", plan.arrays_per_pe},
                                      {"subarray", std::to_string(plan.subarray_rows) + "x" +
                                                       std::to_string(plan.subarray_cols)},
                                      {"global_buffer_bytes", plan.global_buffer_bytes}};
    }
    if (err) {
        j["error_vs_reference"] = ordered_json{{"max_abs_error", err->max_abs_error},
                                               {"max_rel_error", err->max_rel_error},
                                               {"ref_inf_norm", err->ref_inf_norm}};
    }
    return j.dump(2) + "\n";
}

std::string report_csv(const CostReport& rep) {
    std::ostringstream os;
    os << "stage,reads,writes_cells,cycles,array_reads,energy_array_read_fj,energy_bg_fj,"
          "energy_dac_fj,energy_write_fj,energy_sfu_fj,energy_buffer_fj,energy_total_fj,"
          "latency_ns\n";
    for (const auto& [name, c] : rep.stages) {
        os << name << ',' << c.reads << ',' << c.writes_cells << ',' << c.cycles << ','
           << c.array_reads << ',' << num(c.energy.array_read_fj) << ','
           << num(c.energy.bg_modulation_fj) << ',' << num(c.energy.dac_fj) << ','
           << num(c.energy.write_fj) << ',' << num(c.energy.sfu_fj) << ','
           << num(c.energy.buffer_fj) << ',' << num(c.energy.total_fj()) << ','
           << num(c.latency_ns) << '\n';
    }
    os << "TOTAL," << rep.cell_reads_total << ',' << rep.writes_cells_total << ','
       << rep.cycles_total << ",," << num(rep.total_energy.array_read_fj) << ','
       << num(rep.total_energy.bg_modulation_fj) << ',' << num(rep.total_energy.dac_fj) << ','
       << num(rep.total_energy.write_fj) << ',' << num(rep.total_energy.sfu_fj) << ','
       << num(rep.total_energy.buffer_fj) << ',' << num(rep.total_energy.total_fj()) << ','
       << num(rep.total_latency_ns) << '\n';
    return os.str();
}

std::string manifest_json(const RunManifest& m) {
    ordered_json j;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["tool_version"] = m.tool_version;
    j["timestamp"] = m.timestamp;
    j["outputs"] = m.outputs;
    return j.dump(2) + "\n";
}

std::string sweep_csv_header() {
    return "seq,subarray,bits_per_cell,adc_bits,"
           "bilinear_energy_fj,trilinear_energy_fj,energy_ratio,"
           "bilinear_latency_ns,trilinear_latency_ns,latency_ratio,"
           "bilinear_writes_cells,trilinear_writes_cells,"
           "bilinear_score_reads,trilinear_score_reads\n";
}

std::string sweep_csv_row(const SweepRow& r) {
    const double eb = r.bilinear.total_energy.total_fj();
    const double et = r.trilinear.total_energy.total_fj();
    std::ostringstream os;
    os << r.seq << ',' << r.subarray << ',' << r.bits_per_cell << ',' << r.adc_bits << ','
       << num(eb) << ',' << num(et) << ',' << num(et > 0 ? eb / et : 0.0) << ','
       << num(r.bilinear.total_latency_ns) << ',' << num(r.trilinear.total_latency_ns) << ','
       << num(r.trilinear.total_latency_ns > 0
                  ? r.bilinear.total_latency_ns / r.trilinear.total_latency_ns
                  : 0.0)
       << ',' << r.bilinear.writes_cells_total << ',' << r.trilinear.writes_cells_total << ','
       << (r.bilinear.stages.count("score") ? r.bilinear.stages.at("score").array_reads : 0) << ','
       << (r.trilinear.stages.count("score") ? r.trilinear.stages.at("score").array_reads : 0)
       << '\n';
    return os.str();
}

}  // namespace dgcim
