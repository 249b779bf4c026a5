#ifndef DGCIM_CONFIG_HPP
#define DGCIM_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dgcim/attention.hpp"
#include "dgcim/cost.hpp"

namespace dgcim {

// Line-oriented "section.key = value" experiment configuration. The schema is
// closed: unknown keys are rejected by name before anything runs. Defaults
// mirror the published system configuration (8-bit input/weight/ADC, 2-bit
// cells, 64x64 subarrays, 8:1 column muxing, 50 ns writes).

struct SweepSpec {
    std::vector<int> seq_lengths;
    std::vector<int> subarray_sizes;
    std::vector<std::pair<int, int>> bitcell_adc;  // (bits_per_cell, adc_bits)

    bool empty() const {
        return seq_lengths.empty() && subarray_sizes.empty() && bitcell_adc.empty();
    }
};

struct ExperimentConfig {
    DeviceParams device;
    std::string eta_method = "fixed-constant";
    QuantScheme quant;
    int subarray_rows = 64;
    int subarray_cols = 64;
    int mux_ratio = 8;
    double v_read = 1.0;
    double v_bg_max = 1.0;
    double adc_full_scale_ua = 0.0;  // 0 = auto
    bool per_cell_eta = false;
    EnergyParams energy;
    AttentionJob job;
    bool ideal_fidelity = false;
    bool causal_mask = false;
    std::string weights_path;
    SweepSpec sweep;
    std::string output_dir = "out";
    bool debug_currents = false;
    std::string oracle_check = "auto";  // auto | on | off
};

// Throws std::invalid_argument with the offending key/value in the message.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical text round-trip (stable ordering) and its hash, used for the run
// manifest and byte-identical reproducibility.
std::string canonical_config_text(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// Assembled pipeline configuration: resolves the eta averaging method and the
// ideal-fidelity preset.
PipelineConfig make_pipeline_config(const ExperimentConfig& cfg);

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version;
    std::string timestamp;  // honors SOURCE_DATE_EPOCH for reproducible runs
    std::vector<std::string> outputs;
};

RunManifest make_manifest(const ExperimentConfig& cfg, const std::vector<std::string>& outputs);

extern const char* const kToolVersion;

}  // namespace dgcim

#endif
