#include <doctest.h>

#include <cmath>

#include "dgcim/attention.hpp"
#include "dgcim/cost.hpp"

using namespace dgcim;

TEST_CASE("write_volume: published counts and the unit case") {
    CHECK(write_volume(512, 64, 12, 12, 8, 2) == 75497472ULL);
    CHECK(write_volume(128, 64, 12, 12, 8, 2) == 18874368ULL);
    CHECK(write_volume(1, 1, 1, 1, 8, 8) == 4ULL);  // ceil term collapses to 1
    CHECK_THROWS_AS(write_volume(0, 1, 1, 1, 8, 2), std::invalid_argument);
}

TEST_CASE("write_volume: multiplicative separability") {
    const std::uint64_t base = write_volume(64, 16, 2, 3, 8, 2);
    CHECK(write_volume(128, 16, 2, 3, 8, 2) == 2 * base);
    CHECK(write_volume(64, 16, 2, 6, 8, 2) == 2 * base);
    CHECK(write_volume(64, 16, 2, 3, 8, 1) == 2 * base);  // 1-bit cells double the count
}

TEST_CASE("write_volume: larger encoder stacks scale by the head-layer product") {
    // 16 heads x 24 layers over 12 x 12 is exactly 8/3 more programming volume
    const std::uint64_t base = write_volume(512, 64, 12, 12, 8, 2);
    const std::uint64_t large = write_volume(512, 64, 16, 24, 8, 2);
    CHECK(large * 3 == base * 8);
}

TEST_CASE("write_volume: one-operand, one-head, one-layer restriction") {
    // K-program phase of one head at N=128, d_k=64 with 8-bit values in
    // 2-bit cells: N * d_k * 4 * 2 cells
    CHECK(write_volume(128, 64, 1, 1, 8, 2) / 2 == 65536ULL);
}

TEST_CASE("bg_modulation_energy: frozen wire-term example and scaling") {
    EnergyParams p;
    p.dac_switch_energy_fj = 0.0;
    p.driver_energy_fj = 0.0;
    p.gate_cap_per_cell_ff = 0.0;
    p.wire_cap_per_um_ff = 0.2;
    p.bg_line_length_per_col_um = 100.0;
    p.v_swing = 1.0;
    CHECK(bg_modulation_energy_fj(64, 64, 1, p) == doctest::Approx(640.0));
    CHECK(bg_modulation_energy_fj(64, 64, 0, p) == 0.0);
    // capacitive terms scale with v^2
    p.v_swing = 2.0;
    CHECK(bg_modulation_energy_fj(64, 64, 1, p) == doctest::Approx(2560.0));
}

TEST_CASE("bg_modulation_energy: only capacitive terms feel v_swing") {
    EnergyParams p;
    p.dac_switch_energy_fj = 7.0;
    p.driver_energy_fj = 3.0;
    p.wire_cap_per_um_ff = 0.0;
    p.gate_cap_per_cell_ff = 0.0;
    const double e1 = bg_modulation_energy_fj(10, 10, 2, p);
    p.v_swing = 2.0;
    CHECK(bg_modulation_energy_fj(10, 10, 2, p) == doctest::Approx(e1));
}

TEST_CASE("stage_cost: zero writes for trilinear traces, linear in reads") {
    EnergyParams p;
    StageTrace t;
    t.cell_reads = 1000;
    t.cycles = 10;
    const StageCost c1 = stage_cost(t, p);
    CHECK(c1.energy.write_fj == 0.0);
    CHECK(c1.energy.array_read_fj == doctest::Approx(1000.0));
    t.cell_reads = 2000;
    const StageCost c2 = stage_cost(t, p);
    CHECK(c2.energy.array_read_fj == doctest::Approx(2.0 * c1.energy.array_read_fj));
}

TEST_CASE("stage_cost: write pulses floor the latency") {
    EnergyParams p;
    StageTrace t;
    t.cells_written = 65536;  // one K^T scratch program, one head, N=128, d_k=64
    t.write_pulses = 64;
    const StageCost c = stage_cost(t, p);
    CHECK(c.writes_cells == 65536);
    CHECK(c.energy.write_fj == doctest::Approx(65536 * 500.0));
    CHECK(c.latency_ns >= 64 * p.write_latency_ns);
}

TEST_CASE("aggregate_heads: energy sums, latency takes the max") {
    StageCost a, b;
    a.energy.array_read_fj = 100.0;
    a.latency_ns = 50.0;
    b.energy.array_read_fj = 40.0;
    b.latency_ns = 200.0;
    const StageCost c = aggregate_heads({a, b});
    CHECK(c.energy.array_read_fj == doctest::Approx(140.0));
    CHECK(c.latency_ns == doctest::Approx(200.0));

    std::vector<StageCost> twelve(12, a);
    const StageCost h12 = aggregate_heads(twelve);
    CHECK(h12.energy.array_read_fj == doctest::Approx(12 * 100.0));
    CHECK(h12.latency_ns == doctest::Approx(50.0));

    const StageCost single = aggregate_heads({a});
    CHECK(single.energy.array_read_fj == doctest::Approx(a.energy.array_read_fj));
    CHECK_THROWS_AS(aggregate_heads({}), std::invalid_argument);
}

TEST_CASE("buffer_residency: 3x ratio and the frozen 64x768 point") {
    CHECK(buffer_residency_bytes(DataflowKind::Trilinear, 64, 768, 1) == 49152ULL);
    CHECK(buffer_residency_bytes(DataflowKind::Conventional, 64, 768, 1) == 3 * 49152ULL);
    CHECK(buffer_residency_bytes(DataflowKind::Conventional, 0, 768, 1) == 0ULL);
    for (int n : {1, 7, 64, 512})
        CHECK(buffer_residency_bytes(DataflowKind::Conventional, n, 96, 4) ==
              3 * buffer_residency_bytes(DataflowKind::Trilinear, n, 96, 4));
}

TEST_CASE("plan_hierarchy: unit capacity, power-of-two growth, buffer floor") {
    EnergyParams p;
    const HierarchyPlan one = plan_hierarchy(64 * 64, 64, 64, 1, p);
    CHECK(one.n_tiles * one.pes_per_tile * one.arrays_per_pe == 1ULL);

    const HierarchyPlan five = plan_hierarchy(5ULL * 64 * 64, 64, 64, 1, p);
    const std::uint64_t arrays = five.n_tiles * five.pes_per_tile * five.arrays_per_pe;
    CHECK(arrays >= 8ULL);
    CHECK((arrays & (arrays - 1)) == 0ULL);  // power of two

    const HierarchyPlan buf = plan_hierarchy(64 * 64, 64, 64, 49152, p);
    CHECK(buf.global_buffer_bytes == (1ULL << 20));  // rounded up to 1 MiB
    CHECK(buf.global_buffer_bytes <= 4ULL << 20);    // within the stock 4 MB budget

    CHECK_THROWS_AS(plan_hierarchy(0, 64, 64, 1, p), std::invalid_argument);
    EnergyParams tiny = p;
    tiny.area_ceiling_mm2 = 1e-9;
    CHECK_THROWS_AS(plan_hierarchy(1ULL << 30, 64, 64, 1, tiny), std::runtime_error);
}

TEST_CASE("energy dominance: writes make bilinear strictly costlier on matched traces") {
    // matched traces by construction: identical read work, the bilinear side
    // adds its programming volume
    EnergyParams p;
    StageTrace shared;
    shared.cell_reads = 500000;
    shared.cycles = 4000;
    StageTrace bilinear = shared;
    bilinear.cells_written = 65536;
    bilinear.write_pulses = 64;
    const double e_tri = stage_cost(shared, p).energy.total_fj();
    const double e_bil = stage_cost(bilinear, p).energy.total_fj();
    CHECK(e_bil > e_tri);
}

TEST_CASE("cost report: totals equal stage sums and stay reproducible") {
    AttentionJob job;
    job.n_tokens = 6;
    job.d_k = 4;
    job.n_heads = 2;
    job.d_model = 8;
    job.n_layers = 1;
    job.seed = 3;
    const auto w = generate_weights(job);
    PipelineConfig cfg;
    const RunResult res = run_trilinear_mode(job, w, cfg);

    EnergyParams p;
    p.subarray_rows = cfg.subarray_rows;
    const CostReport rep = build_cost_report(res.trace, p, Mode::CimTrilinear, job);
    CHECK(rep.writes_cells_total == 0ULL);

    double stage_sum = 0.0;
    for (const auto& [name, c] : rep.stages) stage_sum += c.energy.total_fj();
    CHECK(rep.total_energy.total_fj() == doctest::Approx(stage_sum).epsilon(1e-12));

    const CostReport rep2 = build_cost_report(res.trace, p, Mode::CimTrilinear, job);
    CHECK(rep.total_energy.total_fj() == rep2.total_energy.total_fj());
    CHECK(rep.total_latency_ns == rep2.total_latency_ns);

    // trilinear area carries the stock back-gate overhead ratio
    const CostReport rep_b = build_cost_report(res.trace, p, Mode::CimBilinear, job);
    CHECK(rep.area_mm2 / rep_b.area_mm2 == doctest::Approx(1.373));
}

TEST_CASE("overlap factor trims the softmax/value-agg boundary only") {
    AttentionJob job;
    job.n_tokens = 4;
    job.d_k = 2;
    job.n_heads = 2;
    job.d_model = 4;
    job.n_layers = 1;
    job.seed = 4;
    const auto w = generate_weights(job);
    const RunResult res = run_trilinear_mode(job, w, PipelineConfig());
    EnergyParams p;
    const CostReport no_overlap = build_cost_report(res.trace, p, Mode::CimTrilinear, job);
    p.overlap_factor = 1.0;
    const CostReport full_overlap = build_cost_report(res.trace, p, Mode::CimTrilinear, job);
    const double saved = no_overlap.total_latency_ns - full_overlap.total_latency_ns;
    const double expected = std::min(no_overlap.stages.at("softmax").latency_ns,
                                     no_overlap.stages.at("value_agg").latency_ns);
    CHECK(saved == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("EnergyParams validation: asymmetry direction enforced") {
    EnergyParams p;
    CHECK_NOTHROW(validate(p));
    p.write_latency_ns = 5.0;  // faster than reads: wrong direction
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = EnergyParams();
    p.read_energy_per_cell_fj = -1.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
}
