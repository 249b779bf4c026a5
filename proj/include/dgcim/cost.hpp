#ifndef DGCIM_COST_HPP
#define DGCIM_COST_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dgcim/attention.hpp"

namespace dgcim {

// Analytical energy/latency/area/write-volume model over completed traces.
// Absolute joules/seconds are configuration, not claims: the defaults carry
// the published read/write asymmetry orders of magnitude (~fJ vs ~sub-pJ,
// ~10 ns vs ~50 ns) and everything is overridable.

struct EnergyParams {
    double read_energy_per_cell_fj = 1.0;
    double write_energy_per_cell_pj = 0.5;
    double read_latency_ns = 10.0;
    double write_latency_ns = 50.0;
    double dac_switch_energy_fj = 10.0;   // per conversion
    double driver_energy_fj = 5.0;        // per line per cycle
    double wire_cap_per_um_ff = 0.2;      // local interconnect
    double bg_line_length_per_col_um = 0.0;  // 0 = auto: subarray_rows * 1 um pitch
    double gate_cap_per_cell_ff = 0.00217;
    double v_swing = 1.0;
    double sfu_energy_per_op_fj = 0.05;
    double buffer_energy_per_byte_fj = 0.01;
    double overlap_factor = 0.0;          // token-pipelining credit in [0, 1]
    double cell_area_um2 = 0.0484;        // 22 nm-class bitcell footprint
    double bg_area_overhead = 0.373;      // per-column driver/DAC add-on ratio
    double area_ceiling_mm2 = 1e4;
    int subarray_rows = 64;
};

void validate(const EnergyParams& p);  // throws std::invalid_argument

// Runtime programming volume of the conventional dataflow:
// 2 (K^T and V) * N * d_k * h * L * ceil(bits / bits_per_cell) * 2 (signed).
std::uint64_t write_volume(int n_tokens, int d_k, int n_heads, int n_layers, int value_bits,
                           int bits_per_cell);

// Per-cycle back-gate drive energy: DAC switching + driver + wire 0.5CV^2 +
// gate 0.5CV^2, summed over columns (and cells for the gate term).
double bg_modulation_energy_fj(std::uint64_t n_cols, std::uint64_t n_rows, std::uint64_t cycles,
                               const EnergyParams& p);

struct EnergyBreakdown {
    double array_read_fj = 0.0;
    double bg_modulation_fj = 0.0;
    double dac_fj = 0.0;
    double write_fj = 0.0;
    double sfu_fj = 0.0;
    double buffer_fj = 0.0;

    double total_fj() const {
        return array_read_fj + bg_modulation_fj + dac_fj + write_fj + sfu_fj + buffer_fj;
    }
};

struct StageCost {
    std::uint64_t reads = 0;        // cell reads
    std::uint64_t writes_cells = 0;
    std::uint64_t cycles = 0;
    std::uint64_t array_reads = 0;
    EnergyBreakdown energy;
    double latency_ns = 0.0;
};

StageCost stage_cost(const StageTrace& trace, const EnergyParams& p);

// Multi-head combination: energies sum, latencies take the maximum.
StageCost aggregate_heads(const std::vector<StageCost>& heads);

enum class DataflowKind { Conventional, Trilinear };

// Peak intermediate residency: 3 matrices (X, Q, K) conventionally, 1 (X) fused.
std::uint64_t buffer_residency_bytes(DataflowKind kind, int n_tokens, int d_model,
                                     int bytes_per_elem);

struct HierarchyPlan {
    std::uint64_t n_tiles = 1;
    std::uint64_t pes_per_tile = 1;
    std::uint64_t arrays_per_pe = 1;
    int subarray_rows = 64;
    int subarray_cols = 64;
    std::uint64_t global_buffer_bytes = 0;
};

// Smallest power-of-two tile/PE/array counts covering the weight capacity;
// buffer sized to peak residency rounded up to whole MiB.
HierarchyPlan plan_hierarchy(std::uint64_t weight_cells, int subarray_rows, int subarray_cols,
                             std::uint64_t min_buffer_bytes, const EnergyParams& p);

struct CostReport {
    std::string mode;
    std::map<std::string, StageCost> stages;  // aggregated across heads and layers
    EnergyBreakdown total_energy;
    double total_latency_ns = 0.0;
    std::uint64_t writes_cells_total = 0;
    std::uint64_t cell_reads_total = 0;
    std::uint64_t cycles_total = 0;
    std::uint64_t buffer_residency = 0;
    std::uint64_t total_cells = 0;  // static + scratch, for capacity planning
    double area_mm2 = 0.0;  // relative model: cells + per-column overhead ratio
    int heads = 1;
};

CostReport build_cost_report(const RunTrace& trace, const EnergyParams& p, Mode mode,
                             const AttentionJob& job);

}  // namespace dgcim

#endif
