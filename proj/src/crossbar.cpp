#include "dgcim/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace dgcim {

CrossbarArray program_array(Mat g0_us, double eta, double band_lo_us, double band_hi_us) {
    CrossbarArray x;
    x.eta = eta;
    x.band_lo_us = band_lo_us;
    x.band_hi_us = band_hi_us;
    x.out_of_band_cells = 0;
    for (double g : g0_us.data)
        if (g < band_lo_us || g > band_hi_us) ++x.out_of_band_cells;
    x.g0_us = std::move(g0_us);
    if (x.g0_us.rows < 1 || x.g0_us.cols < 1)
        throw std::invalid_argument("program_array: empty array");
    return x;
}

std::int64_t adc_quantize(double current_ua, double full_scale_ua, int adc_bits) {
    if (!(full_scale_ua > 0.0)) throw std::invalid_argument("adc_quantize: full scale must be > 0");
    const std::int64_t lim = qmax(adc_bits);
    double code = std::round(current_ua / full_scale_ua * static_cast<double>(lim));
    code = std::clamp(code, static_cast<double>(-lim), static_cast<double>(lim));
    return static_cast<std::int64_t>(code);
}

double dac_quantize(double v, int dac_bits, double v_max) {
    if (!(v_max > 0.0)) throw std::invalid_argument("dac_quantize: v_max must be > 0");
    const std::int64_t n_levels = std::int64_t{1} << dac_bits;
    const double step = 2.0 * v_max / static_cast<double>(n_levels);
    std::int64_t k = static_cast<std::int64_t>(std::floor((v + v_max) / step));
    k = std::clamp<std::int64_t>(k, 0, n_levels - 1);
    return -v_max + (static_cast<double>(k) + 0.5) * step;
}

double auto_full_scale(const CrossbarArray& xbar, const Peripherals& p) {
    if (p.adc_full_scale_ua > 0.0) return p.adc_full_scale_ua;
    return static_cast<double>(xbar.rows()) * xbar.band_hi_us * p.v_read;
}

namespace {

void check_input(const CrossbarArray& xbar, const std::vector<double>& v_in, const char* who) {
    if (v_in.size() != xbar.rows())
        throw std::invalid_argument(std::string(who) + ": input length != rows");
}

// One analog pass: column currents with per-column modulation factors.
// modulation = nullptr means the reference read (factor 1 everywhere).
std::vector<double> column_currents(const CrossbarArray& xbar, const std::vector<double>& v_in,
                                    const std::vector<double>* v_bg, const Peripherals& p) {
    std::vector<double> currents(xbar.cols(), 0.0);
    const bool per_cell = p.per_cell_eta;
    for (std::size_t i = 0; i < xbar.rows(); ++i) {
        const double v = v_in[i];
        if (v == 0.0) continue;
        const double* grow = xbar.g0_us.row(i);
        for (std::size_t j = 0; j < xbar.cols(); ++j) {
            double factor = 1.0;
            if (v_bg) {
                const double vb = v_bg->size() == 1 ? (*v_bg)[0] : (*v_bg)[j];
                const double eta = per_cell ? eta_bg(grow[j], p.device) : xbar.eta;
                factor = 1.0 + eta * vb;
            }
            currents[j] += v * grow[j] * factor;
        }
    }
    return currents;
}

void dump_currents(const Peripherals& p, const char* tag, const std::vector<double>& currents) {
    if (!p.debug_currents) return;
    *p.debug_currents << tag;
    for (double c : currents) *p.debug_currents << '\t' << c;
    *p.debug_currents << '\n';
}

// Clip back-gate voltages to the DAC range, counting clip events.
std::vector<double> clip_bg(const std::vector<double>& v_bg, const Peripherals& p, int* clips) {
    std::vector<double> out = v_bg;
    for (double& v : out) {
        if (v > p.v_bg_max) {
            v = p.v_bg_max;
            ++*clips;
        } else if (v < -p.v_bg_max) {
            v = -p.v_bg_max;
            ++*clips;
        }
    }
    return out;
}

}  // namespace

ReadResult bilinear_mvm(const CrossbarArray& xbar, const std::vector<double>& v_in,
                        const Peripherals& p) {
    check_input(xbar, v_in, "bilinear_mvm");
    const double fs = auto_full_scale(xbar, p);
    ReadResult r;
    r.currents_ua = column_currents(xbar, v_in, nullptr, p);
    dump_currents(p, "bilinear", r.currents_ua);
    r.codes.reserve(xbar.cols());
    for (double c : r.currents_ua) r.codes.push_back(adc_quantize(c, fs, p.adc_bits));
    r.cycles = mux_cycles(xbar.cols(), p.mux_ratio);
    r.array_reads = 1;
    return r;
}

ReadResult trilinear_read(const CrossbarArray& xbar, const std::vector<double>& v_in,
                          const std::vector<double>& v_bg, const Peripherals& p) {
    check_input(xbar, v_in, "trilinear_read");
    if (v_bg.size() != 1 && v_bg.size() != xbar.cols())
        throw std::invalid_argument("trilinear_read: v_bg must be scalar or one per column");

    ReadResult r;
    const std::vector<double> bg = clip_bg(v_bg, p, &r.clip_events);
    const double fs = auto_full_scale(xbar, p);

    const std::vector<double> modulated = column_currents(xbar, v_in, &bg, p);
    const std::vector<double> reference = column_currents(xbar, v_in, nullptr, p);
    r.currents_ua.resize(xbar.cols());
    r.codes.resize(xbar.cols());
    for (std::size_t j = 0; j < xbar.cols(); ++j) {
        r.currents_ua[j] = modulated[j] - reference[j];
        r.codes[j] = adc_quantize(modulated[j], fs, p.adc_bits) -
                     adc_quantize(reference[j], fs, p.adc_bits);
    }
    dump_currents(p, "trilinear-diff", r.currents_ua);
    r.cycles = 2 * mux_cycles(xbar.cols(), p.mux_ratio);
    r.array_reads = 2;
    return r;
}

AStepResult config_a_step(const std::vector<CrossbarArray>& xbars,
                          const std::vector<std::vector<double>>& a_rows,
                          const std::vector<double>& c_col, const Peripherals& p) {
    if (xbars.empty()) throw std::invalid_argument("config_a_step: no crossbars");
    if (a_rows.size() != xbars.size())
        throw std::invalid_argument("config_a_step: one input row per crossbar required");
    for (const CrossbarArray& x : xbars)
        if (x.rows() != xbars[0].rows() || x.cols() != xbars[0].cols())
            throw std::invalid_argument("config_a_step: crossbar shapes differ");
    if (c_col.size() != xbars[0].cols())
        throw std::invalid_argument("config_a_step: back-gate vector length != cols");

    AStepResult out;
    out.elements.reserve(xbars.size());
    for (std::size_t i = 0; i < xbars.size(); ++i) {
        const ReadResult r = trilinear_read(xbars[i], a_rows[i], c_col, p);
        std::int64_t acc = 0;  // intra-crossbar addition over all columns
        for (std::int64_t c : r.codes) acc += c;
        out.elements.push_back(acc);
        out.array_reads += r.array_reads;
        out.cycles = std::max(out.cycles, r.cycles);  // crossbars operate in parallel
    }
    return out;
}

BStepResult config_b_step(const std::vector<CrossbarArray>& xbars,
                          const std::vector<std::vector<double>>& b_rows,
                          const std::vector<double>& a_scalars, const Peripherals& p) {
    if (xbars.empty()) throw std::invalid_argument("config_b_step: no crossbars");
    if (b_rows.size() != xbars.size() || a_scalars.size() != xbars.size())
        throw std::invalid_argument("config_b_step: one input row and one scalar per crossbar");
    for (const CrossbarArray& x : xbars) {
        if (x.g0_us.rows != xbars[0].g0_us.rows || x.g0_us.cols != xbars[0].g0_us.cols ||
            x.g0_us.data != xbars[0].g0_us.data)
            throw std::invalid_argument("config_b_step: crossbars must hold identical weights");
    }

    BStepResult out;
    out.column_codes.assign(xbars[0].cols(), 0);
    for (std::size_t i = 0; i < xbars.size(); ++i) {
        const std::vector<double> bg{a_scalars[i]};  // broadcast over columns
        const ReadResult r = trilinear_read(xbars[i], b_rows[i], bg, p);
        for (std::size_t j = 0; j < r.codes.size(); ++j) out.column_codes[j] += r.codes[j];
        out.array_reads += r.array_reads;
        out.cycles = std::max(out.cycles, r.cycles);
    }
    return out;
}

BitSerialResult bit_serial_mvm(const CrossbarArray& xbar, const std::vector<std::int64_t>& q_in,
                               int input_bits, const Peripherals& p) {
    if (q_in.size() != xbar.rows())
        throw std::invalid_argument("bit_serial_mvm: input length != rows");
    const double fs = auto_full_scale(xbar, p);

    BitSerialResult out;
    out.codes.assign(xbar.cols(), 0);
    std::vector<double> v(q_in.size());
    for (int b = 0; b < input_bits; ++b) {
        for (std::size_t i = 0; i < q_in.size(); ++i) {
            const std::int64_t mag = std::abs(q_in[i]);
            const int bit = static_cast<int>((mag >> b) & 1);
            v[i] = (q_in[i] < 0 ? -1.0 : 1.0) * bit * p.v_read;
        }
        const std::vector<double> currents = column_currents(xbar, v, nullptr, p);
        for (std::size_t j = 0; j < currents.size(); ++j)
            out.codes[j] += adc_quantize(currents[j], fs, p.adc_bits) << b;
    }
    out.cycles = static_cast<std::int64_t>(input_bits) * mux_cycles(xbar.cols(), p.mux_ratio);
    return out;
}

}  // namespace dgcim
