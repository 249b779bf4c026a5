#include <doctest.h>

#include "dgcim/config.hpp"

using namespace dgcim;

TEST_CASE("defaults mirror the stock system configuration") {
    ExperimentConfig cfg;
    CHECK(cfg.quant.input_bits == 8);
    CHECK(cfg.quant.weight_bits == 8);
    CHECK(cfg.quant.adc_bits == 8);
    CHECK(cfg.quant.bits_per_cell == 2);
    CHECK(cfg.subarray_rows == 64);
    CHECK(cfg.subarray_cols == 64);
    CHECK(cfg.mux_ratio == 8);
    CHECK(cfg.energy.write_latency_ns == doctest::Approx(50.0));
    CHECK(cfg.device.alpha == doctest::Approx(0.137));
    CHECK(cfg.device.m_coeff == doctest::Approx(1.54));
    CHECK(cfg.device.eta_bar == doctest::Approx(0.157));
    CHECK(cfg.device.band_lo_us == doctest::Approx(29.0));
    CHECK(cfg.device.band_hi_us == doctest::Approx(69.0));
}

TEST_CASE("parse: sections, comments, overrides") {
    const std::string text =
        "# experiment\n"
        "job.n_tokens = 16\n"
        "job.mode = cim-bilinear\n"
        "job.d_model = 8\n"
        "job.d_k = 4\n"
        "job.n_heads = 2\n"
        "quant.bits_per_cell = 1   # single-bit cells\n"
        "sweep.seq = 64, 128\n"
        "sweep.bitcell_adc = 2:8, 1:6\n";
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.job.n_tokens == 16);
    CHECK(cfg.job.mode == Mode::CimBilinear);
    CHECK(cfg.quant.bits_per_cell == 1);
    REQUIRE(cfg.sweep.seq_lengths.size() == 2);
    CHECK(cfg.sweep.seq_lengths[1] == 128);
    REQUIRE(cfg.sweep.bitcell_adc.size() == 2);
    CHECK(cfg.sweep.bitcell_adc[1].first == 1);
    CHECK(cfg.sweep.bitcell_adc[1].second == 6);
}

TEST_CASE("parse: unknown keys are rejected by name") {
    try {
        parse_config_text("job.n_tokons = 8\n");
        FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("job.n_tokons") != std::string::npos);
    }
}

TEST_CASE("parse: bad values and inconsistent jobs are rejected") {
    CHECK_THROWS_AS(parse_config_text("job.n_tokens = eight\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("job.mode = warp-drive\n"), std::invalid_argument);
    // d_model must equal heads * d_k
    CHECK_THROWS_AS(parse_config_text("job.d_model = 7\n"), std::invalid_argument);
}

TEST_CASE("canonical text and hash are stable under reordering") {
    const ExperimentConfig a = parse_config_text("job.n_tokens = 9\nquant.adc_bits = 6\n"
                                                 "job.d_model = 4\njob.d_k = 2\njob.n_heads = 2\n");
    const ExperimentConfig b = parse_config_text("quant.adc_bits = 6\njob.d_model = 4\n"
                                                 "job.d_k = 2\njob.n_heads = 2\njob.n_tokens = 9\n");
    CHECK(canonical_config_text(a) == canonical_config_text(b));
    CHECK(config_hash(a) == config_hash(b));
    const ExperimentConfig c = parse_config_text("job.n_tokens = 10\njob.d_model = 4\n"
                                                 "job.d_k = 2\njob.n_heads = 2\n");
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("pipeline config: eta method resolution and ideal preset") {
    ExperimentConfig cfg;
    cfg.eta_method = "uniform-grid-mean";
    const PipelineConfig pc = make_pipeline_config(cfg);
    CHECK(pc.device.eta_bar == doctest::Approx(0.1704).epsilon(1e-3));

    cfg.eta_method = "fixed-constant";
    const PipelineConfig pc2 = make_pipeline_config(cfg);
    CHECK(pc2.device.eta_bar == doctest::Approx(0.157));

    cfg.ideal_fidelity = true;
    const PipelineConfig pc3 = make_pipeline_config(cfg);
    CHECK(pc3.scheme.input_bits == 30);
    CHECK(pc3.periph.adc_bits >= 24);
    CHECK_FALSE(pc3.fixed_point_sfu);
}

TEST_CASE("manifest honors SOURCE_DATE_EPOCH") {
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    const ExperimentConfig cfg;
    const RunManifest m = make_manifest(cfg, {"report.json"});
    CHECK(m.timestamp == "2023-11-14T22:13:20Z");
    CHECK(m.seed == cfg.job.seed);
    CHECK(m.tool_version == std::string(kToolVersion));
    unsetenv("SOURCE_DATE_EPOCH");
}
