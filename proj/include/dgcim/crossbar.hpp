#ifndef DGCIM_CROSSBAR_HPP
#define DGCIM_CROSSBAR_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dgcim/common.hpp"
#include "dgcim/device.hpp"
#include "dgcim/quant.hpp"

namespace dgcim {

// Selector-less DG-FeFET crossbar reads. Rows carry input voltages (V_DS),
// columns collect currents (uA = uS * V), the per-column back-gate lines
// apply the volatile modulation (1 + eta * v_bg). A second read at v_bg = 0
// removes the DC term; the subtraction happens on post-ADC codes.

struct CrossbarArray {
    Mat g0_us;  // stored conductances, rows x cols
    double eta = 0.157;
    double band_lo_us = 29.0, band_hi_us = 69.0;
    int out_of_band_cells = 0;  // counted when programmed, warning not error

    std::size_t rows() const { return g0_us.rows; }
    std::size_t cols() const { return g0_us.cols; }
};

CrossbarArray program_array(Mat g0_us, double eta, double band_lo_us, double band_hi_us);

struct Peripherals {
    int adc_bits = 8;
    int dac_bits = 8;
    int mux_ratio = 8;           // columns per shared ADC
    double v_read = 1.0;         // row input full-scale (V)
    double v_bg_max = 1.0;       // back-gate DAC reference (V)
    double adc_full_scale_ua = 0.0;  // 0 = auto: rows * band_hi * v_read
    bool per_cell_eta = false;   // modulate with eta_bg(G0[i,j]) instead of the band constant
    DeviceParams device;         // used only by per_cell_eta
    std::ostream* debug_currents = nullptr;  // pre-ADC current dump when set
};

struct ReadResult {
    std::vector<std::int64_t> codes;      // post-ADC, one per column
    std::vector<double> currents_ua;      // pre-ADC diagnostics
    std::int64_t cycles = 0;              // mux/bit-serial cycles consumed
    std::int64_t array_reads = 0;         // analog evaluation count
    int clip_events = 0;                  // back-gate values clipped to the DAC range
};

// Symmetric mid-tread ADC: clamp(round(i/full_scale * qmax), +-qmax).
std::int64_t adc_quantize(double current_ua, double full_scale_ua, int adc_bits);

// Uniform mid-rise DAC over [-v_max, v_max] with 2^bits levels; out-of-range
// inputs clip to the extreme levels.
double dac_quantize(double v, int dac_bits, double v_max);

double auto_full_scale(const CrossbarArray& xbar, const Peripherals& p);

// Plain two-operand MVM: column currents sum_i G0[i,j] * v_in[i], then mux/ADC.
ReadResult bilinear_mvm(const CrossbarArray& xbar, const std::vector<double>& v_in,
                        const Peripherals& p);

// Three-operand read: modulated pass (1 + eta * v_bg[j]) minus reference pass
// (v_bg = 0), differenced per column on post-ADC codes. v_bg may be a single
// broadcast value or one value per column. Cycles count both passes.
ReadResult trilinear_read(const CrossbarArray& xbar, const std::vector<double>& v_in,
                          const std::vector<double>& v_bg, const Peripherals& p);

// Accumulation configuration (a), one step: every crossbar stores the same
// operand role (B^T); crossbar i sees its own row vector a_rows[i] and the
// shared back-gate column c_col; its column codes are summed digitally into
// one output element. Returns one element per crossbar.
struct AStepResult {
    std::vector<std::int64_t> elements;
    std::int64_t cycles = 0;
    std::int64_t array_reads = 0;
};
AStepResult config_a_step(const std::vector<CrossbarArray>& xbars,
                          const std::vector<std::vector<double>>& a_rows,
                          const std::vector<double>& c_col, const Peripherals& p);

// Accumulation configuration (b), one step: all crossbars hold identical
// weights (C^T); crossbar i keeps its row vector b_rows[i] applied and gets a
// scalar back-gate broadcast a_scalars[i]; matching column codes across
// crossbars are summed digitally. Returns one output vector (length cols).
struct BStepResult {
    std::vector<std::int64_t> column_codes;
    std::int64_t cycles = 0;
    std::int64_t array_reads = 0;
};
BStepResult config_b_step(const std::vector<CrossbarArray>& xbars,
                          const std::vector<std::vector<double>>& b_rows,
                          const std::vector<double>& a_scalars, const Peripherals& p);

// LSB-first bit-serial MVM over signed integer inputs; per-step ADC codes are
// shift-added digitally. Equals the direct integer MVM when the ADC is ideal.
struct BitSerialResult {
    std::vector<std::int64_t> codes;
    std::int64_t cycles = 0;
};
BitSerialResult bit_serial_mvm(const CrossbarArray& xbar, const std::vector<std::int64_t>& q_in,
                               int input_bits, const Peripherals& p);

inline std::int64_t mux_cycles(std::size_t cols, int mux_ratio) {
    return static_cast<std::int64_t>((cols + mux_ratio - 1) / static_cast<std::size_t>(mux_ratio));
}

}  // namespace dgcim

#endif
