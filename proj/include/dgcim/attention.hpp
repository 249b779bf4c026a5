#ifndef DGCIM_ATTENTION_HPP
#define DGCIM_ATTENTION_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dgcim/common.hpp"
#include "dgcim/crossbar.hpp"
#include "dgcim/device.hpp"
#include "dgcim/quant.hpp"
#include "dgcim/sfu.hpp"

namespace dgcim {

// Executes transformer attention in three modes:
//  - quantized-digital: INT8 operands, full-precision accumulation, no
//    ADC/DAC effects (the accuracy ceiling)
//  - cim-bilinear: conventional two-operand CIM; K^T and V are reprogrammed
//    into scratch arrays every sequence (runtime writes counted)
//  - cim-trilinear: fused three-operand dataflow; projection weights stay
//    static and dynamic operands ride the back gate (zero runtime writes)

enum class Mode { QuantizedDigital, CimBilinear, CimTrilinear };

const char* mode_name(Mode m);
Mode mode_from_string(const std::string& s);  // throws on unknown names

struct AttentionJob {
    int n_tokens = 8;
    int d_model = 16;
    int d_k = 8;
    int n_heads = 2;
    int n_layers = 1;
    Mode mode = Mode::CimTrilinear;
    std::uint64_t seed = 1;
    Mat x_input;  // n_tokens x d_model; generated from the seed when empty
};

void validate(const AttentionJob& job);  // throws std::invalid_argument

struct LayerWeights {
    std::vector<Mat> w_q, w_k, w_v;  // per head, d_k x d_model
    Mat w_o;                         // d_model x d_model
    Mat ffn_w1, ffn_w2;              // d x 4d and 4d x d
    std::vector<double> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

std::vector<LayerWeights> generate_weights(const AttentionJob& job);
Mat generate_input(const AttentionJob& job);

// Flat binary weight files: little-endian float32, row-major, one .bin plus a
// text sidecar (.shape) declaring "<name> <rows> <cols>" per tensor.
void save_weights(const std::vector<LayerWeights>& weights, const std::string& basename);
std::vector<LayerWeights> load_weights(const std::string& basename, const AttentionJob& job);

// Stage/operand mapping of the fused dataflow. Stage 1 folds the 1/sqrt(d_k)
// scale into a static back-gate level; stages 2 and 3 modulate dynamically.
enum class StageKind { ScaledQuery, Score, ValueAgg };
enum class BgKind { Static, Dynamic };
enum class XbarConfig { A, B, Either };

struct StagePlan {
    StageKind stage;
    const char* row_operand;
    const char* stored_operand;
    const char* bg_operand;
    BgKind bg_kind;
    XbarConfig xbar_config;
};

const StagePlan& stage_plan(StageKind stage);

struct StageTrace {
    std::uint64_t array_reads = 0;       // analog array evaluations
    std::uint64_t cell_reads = 0;        // rows*cols per evaluation
    std::uint64_t adc_conversions = 0;
    std::uint64_t dac_conversions = 0;
    std::uint64_t cells_written = 0;     // runtime-programmed cells
    std::uint64_t write_pulses = 0;      // row-parallel programming pulses
    std::uint64_t cycles = 0;            // wall readout cycles (mux/bit-serial aware)
    std::uint64_t sfu_elem_ops = 0;
    std::uint64_t buffer_bytes = 0;
    std::uint64_t static_cells = 0;      // one-time programmed cells (not runtime writes)
    std::uint64_t bg_rows = 0, bg_cols = 0, bg_cycles = 0;  // back-gate modulation extent
    bool dynamic_bg = false;

    StageTrace& operator+=(const StageTrace& o);
};

struct RunTrace {
    // stage name -> one accumulated trace per head (layer totals folded in);
    // single-instance stages (softmax shares heads, output_proj) use index 0
    std::map<std::string, std::vector<StageTrace>> stages;
    int peak_intermediate_matrices = 0;

    StageTrace& at(const std::string& stage, std::size_t head, std::size_t n_heads);
    std::uint64_t total(std::uint64_t StageTrace::*field) const;
};

struct WriteLog {
    std::uint64_t cells = 0;  // non-volatile cells programmed at inference time
};

struct PipelineConfig {
    QuantScheme scheme;
    DeviceParams device;
    Peripherals periph;
    int subarray_rows = 64;
    int subarray_cols = 64;
    bool fixed_point_sfu = true;  // false: double-precision softmax/LN/GELU
    bool causal_mask = false;
    double analog_eta_offset = 0.0;  // fault-injection hook: device-vs-recovery mismatch
    SfuConfig sfu;
    std::vector<QuantTensor>* observe_quant = nullptr;  // instrumentation hook
};

// High-fidelity preset: 30-bit operands in a single cell plane, 44-bit ADC,
// 30-bit DAC, double-precision SFU. Isolates the dataflow from quantization.
PipelineConfig ideal_config();

struct RunResult {
    Mat output;
    WriteLog writes;
    RunTrace trace;
};

// Float ground truth: per head softmax(X W_Q^T W_K X^T / sqrt(d_k)) X W_V^T,
// heads concatenated, then W_O; applied n_layers times.
Mat run_reference_attention(const AttentionJob& job, const std::vector<LayerWeights>& weights);

RunResult run_digital_mode(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                           const PipelineConfig& cfg);
RunResult run_bilinear_mode(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                            const PipelineConfig& cfg);
RunResult run_trilinear_mode(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                             const PipelineConfig& cfg);
RunResult run_mode(const AttentionJob& job, const std::vector<LayerWeights>& weights,
                   const PipelineConfig& cfg);  // dispatch on job.mode

// One full encoder block: LN(X + MHSA(X)), then LN(Z + FFN(Z)) with the
// GELU pipeline between the FFN projections.
RunResult run_encoder_block(const AttentionJob& job, const LayerWeights& lw,
                            const PipelineConfig& cfg);

// Individual trilinear stages, exposed for direct testing. Inputs arrive
// already quantized (the shared X row operand); outputs are real-valued and
// requantized by the caller.
Mat stage1_scaled_query(const QuantTensor& xq, const Mat& w_q, const PipelineConfig& cfg,
                        StageTrace* trace = nullptr);
Mat stage2_score(const QuantTensor& r1q, const Mat& w_k, const Mat& x_bg,
                 const PipelineConfig& cfg, StageTrace* trace = nullptr);
Mat stage3_value_agg(const Mat& score, const QuantTensor& xq, const Mat& w_v,
                     const PipelineConfig& cfg, StageTrace* trace = nullptr);

}  // namespace dgcim

#endif
