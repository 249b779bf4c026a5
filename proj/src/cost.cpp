#include "dgcim/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgcim {

void validate(const EnergyParams& p) {
    const double fields[] = {p.read_energy_per_cell_fj, p.write_energy_per_cell_pj,
                             p.read_latency_ns,         p.write_latency_ns,
                             p.dac_switch_energy_fj,    p.driver_energy_fj,
                             p.wire_cap_per_um_ff,      p.bg_line_length_per_col_um,
                             p.gate_cap_per_cell_ff,    p.v_swing,
                             p.sfu_energy_per_op_fj,    p.buffer_energy_per_byte_fj};
    for (double f : fields)
        if (f < 0.0) throw std::invalid_argument("EnergyParams: negative value");
    if (!(p.write_latency_ns > p.read_latency_ns))
        throw std::invalid_argument("EnergyParams: write latency must exceed read latency");
    if (p.overlap_factor < 0.0 || p.overlap_factor > 1.0)
        throw std::invalid_argument("EnergyParams: overlap_factor must be in [0, 1]");
}

std::uint64_t write_volume(int n_tokens, int d_k, int n_heads, int n_layers, int value_bits,
                           int bits_per_cell) {
    if (n_tokens < 1 || d_k < 1 || n_heads < 1 || n_layers < 1 || value_bits < 1 ||
        bits_per_cell < 1)
        throw std::invalid_argument("write_volume: arguments must be positive");
    const std::uint64_t cells_per_value =
        static_cast<std::uint64_t>((value_bits + bits_per_cell - 1) / bits_per_cell);
    return 2ULL * n_tokens * d_k * n_heads * n_layers * cells_per_value * 2ULL;
}

double bg_modulation_energy_fj(std::uint64_t n_cols, std::uint64_t n_rows, std::uint64_t cycles,
                               const EnergyParams& p) {
    const double line_len = p.bg_line_length_per_col_um > 0.0
                                ? p.bg_line_length_per_col_um
                                : static_cast<double>(p.subarray_rows);  // 1 um cell pitch
    const double v2 = p.v_swing * p.v_swing;
    const double per_cycle =
        static_cast<double>(n_cols) * p.dac_switch_energy_fj +
        static_cast<double>(n_cols) * p.driver_energy_fj +
        static_cast<double>(n_cols) * (p.wire_cap_per_um_ff * line_len) * v2 * 0.5 +
        static_cast<double>(n_cols) * static_cast<double>(n_rows) * p.gate_cap_per_cell_ff * v2 *
            0.5;
    return static_cast<double>(cycles) * per_cycle;
}

StageCost stage_cost(const StageTrace& t, const EnergyParams& p) {
    StageCost c;
    c.reads = t.cell_reads;
    c.writes_cells = t.cells_written;
    c.cycles = t.cycles;
    c.array_reads = t.array_reads;
    c.energy.array_read_fj = static_cast<double>(t.cell_reads) * p.read_energy_per_cell_fj;
    c.energy.write_fj = static_cast<double>(t.cells_written) * p.write_energy_per_cell_pj * 1e3;
    c.energy.dac_fj = static_cast<double>(t.dac_conversions) * p.dac_switch_energy_fj;
    if (t.dynamic_bg) {
        // driver/wire/gate components; the DAC term is itemized separately
        EnergyParams no_dac = p;
        no_dac.dac_switch_energy_fj = 0.0;
        c.energy.bg_modulation_fj = bg_modulation_energy_fj(t.bg_cols, t.bg_rows, t.bg_cycles,
                                                            no_dac);
    }
    c.energy.sfu_fj = static_cast<double>(t.sfu_elem_ops) * p.sfu_energy_per_op_fj;
    c.energy.buffer_fj = static_cast<double>(t.buffer_bytes) * p.buffer_energy_per_byte_fj;
    c.latency_ns = static_cast<double>(t.cycles) * p.read_latency_ns +
                   static_cast<double>(t.write_pulses) * p.write_latency_ns +
                   static_cast<double>(t.sfu_elem_ops) * p.read_latency_ns;
    return c;
}

StageCost aggregate_heads(const std::vector<StageCost>& heads) {
    if (heads.empty()) throw std::invalid_argument("aggregate_heads: need >= 1 head");
    StageCost out;
    for (const StageCost& h : heads) {
        out.reads += h.reads;
        out.writes_cells += h.writes_cells;
        out.cycles = std::max(out.cycles, h.cycles);
        out.array_reads += h.array_reads;
        out.energy.array_read_fj += h.energy.array_read_fj;
        out.energy.bg_modulation_fj += h.energy.bg_modulation_fj;
        out.energy.dac_fj += h.energy.dac_fj;
        out.energy.write_fj += h.energy.write_fj;
        out.energy.sfu_fj += h.energy.sfu_fj;
        out.energy.buffer_fj += h.energy.buffer_fj;
        out.latency_ns = std::max(out.latency_ns, h.latency_ns);
    }
    return out;
}

std::uint64_t buffer_residency_bytes(DataflowKind kind, int n_tokens, int d_model,
                                     int bytes_per_elem) {
    if (n_tokens < 0 || d_model < 0 || bytes_per_elem < 0)
        throw std::invalid_argument("buffer_residency_bytes: negative dimension");
    const std::uint64_t one = static_cast<std::uint64_t>(n_tokens) *
                              static_cast<std::uint64_t>(d_model) *
                              static_cast<std::uint64_t>(bytes_per_elem);
    return kind == DataflowKind::Conventional ? 3 * one : one;
}

HierarchyPlan plan_hierarchy(std::uint64_t weight_cells, int subarray_rows, int subarray_cols,
                             std::uint64_t min_buffer_bytes, const EnergyParams& p) {
    if (weight_cells == 0) throw std::invalid_argument("plan_hierarchy: capacity must be > 0");
    const std::uint64_t cells_per_array =
        static_cast<std::uint64_t>(subarray_rows) * static_cast<std::uint64_t>(subarray_cols);

    std::uint64_t arrays_needed = (weight_cells + cells_per_array - 1) / cells_per_array;
    std::uint64_t arrays = 1;
    while (arrays < arrays_needed) arrays <<= 1;

    HierarchyPlan plan;
    plan.subarray_rows = subarray_rows;
    plan.subarray_cols = subarray_cols;
    // split the power-of-two array count across the three levels, largest last
    plan.arrays_per_pe = std::min<std::uint64_t>(arrays, 4);
    arrays /= plan.arrays_per_pe;
    plan.pes_per_tile = std::min<std::uint64_t>(arrays, 4);
    plan.n_tiles = arrays / plan.pes_per_tile;

    const std::uint64_t mib = 1ULL << 20;
    plan.global_buffer_bytes = ((std::max<std::uint64_t>(min_buffer_bytes, 1) + mib - 1) / mib) * mib;

    const double area = static_cast<double>(plan.n_tiles * plan.pes_per_tile * plan.arrays_per_pe *
                                            cells_per_array) *
                        p.cell_area_um2 * 1e-6;
    if (area > p.area_ceiling_mm2)
        throw std::runtime_error("plan_hierarchy: capacity exceeds the configured area ceiling");
    return plan;
}

CostReport build_cost_report(const RunTrace& trace, const EnergyParams& p, Mode mode,
                             const AttentionJob& job) {
    validate(p);
    CostReport rep;
    rep.mode = mode_name(mode);
    rep.heads = job.n_heads;

    std::uint64_t total_cells = 0;
    for (const auto& [name, heads] : trace.stages) {
        std::vector<StageCost> costs;
        costs.reserve(heads.size());
        for (const StageTrace& t : heads) {
            costs.push_back(stage_cost(t, p));
            total_cells += t.static_cells + t.cells_written;
        }
        rep.stages[name] = aggregate_heads(costs);
    }

    double latency = 0.0;
    for (const auto& [name, c] : rep.stages) {
        rep.total_energy.array_read_fj += c.energy.array_read_fj;
        rep.total_energy.bg_modulation_fj += c.energy.bg_modulation_fj;
        rep.total_energy.dac_fj += c.energy.dac_fj;
        rep.total_energy.write_fj += c.energy.write_fj;
        rep.total_energy.sfu_fj += c.energy.sfu_fj;
        rep.total_energy.buffer_fj += c.energy.buffer_fj;
        rep.writes_cells_total += c.writes_cells;
        rep.cell_reads_total += c.reads;
        rep.cycles_total += c.cycles;
        latency += c.latency_ns;
    }
    // token-pipelining credit: softmax overlaps value aggregation
    if (p.overlap_factor > 0.0 && rep.stages.count("softmax") && rep.stages.count("value_agg")) {
        latency -= p.overlap_factor * std::min(rep.stages.at("softmax").latency_ns,
                                               rep.stages.at("value_agg").latency_ns);
    }
    rep.total_latency_ns = latency;

    rep.buffer_residency = buffer_residency_bytes(
        mode == Mode::CimTrilinear ? DataflowKind::Trilinear : DataflowKind::Conventional,
        job.n_tokens, job.d_model, 1);

    rep.total_cells = total_cells;
    const double base_area = static_cast<double>(total_cells) * p.cell_area_um2 * 1e-6;
    rep.area_mm2 = mode == Mode::CimTrilinear ? base_area * (1.0 + p.bg_area_overhead) : base_area;
    return rep;
}

}  // namespace dgcim
