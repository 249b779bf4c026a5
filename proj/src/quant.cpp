#include "dgcim/quant.hpp"

#include <cmath>
#include <stdexcept>

namespace dgcim {

void validate(const QuantScheme& s) {
    if (s.input_bits < 1 || s.weight_bits < 1 || s.adc_bits < 1 || s.dac_bits < 1 ||
        s.bits_per_cell < 1)
        throw std::invalid_argument("QuantScheme: all bit counts must be >= 1");
    if (s.bits_per_cell > s.weight_bits)
        throw std::invalid_argument("QuantScheme: bits_per_cell must not exceed weight_bits");
    if (!(s.act_scale > 0.0) || !(s.weight_scale > 0.0))
        throw std::invalid_argument("QuantScheme: scales must be > 0");
}

double calibrate_scale(const Mat& samples, int bits) {
    if (samples.empty()) throw std::invalid_argument("calibrate_scale: empty samples");
    const double m = samples.max_abs();
    if (m == 0.0) return 1.0;  // all-zero fallback
    return m / static_cast<double>(qmax(bits));
}

QuantTensor quantize(const Mat& x, double scale, int bits) {
    if (!(scale > 0.0)) throw std::invalid_argument("quantize: scale must be > 0");
    const std::int64_t lim = qmax(bits);
    QuantTensor q;
    q.scale = scale;
    q.bits = bits;
    q.data = IMat(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        // std::round is half-away-from-zero, matching the signed symmetric range
        double r = std::round(x.data[i] / scale);
        if (r > static_cast<double>(lim)) r = static_cast<double>(lim);
        if (r < static_cast<double>(-lim)) r = static_cast<double>(-lim);
        q.data.data[i] = static_cast<std::int64_t>(r);
    }
    return q;
}

Mat dequantize(const QuantTensor& q) {
    Mat x(q.data.rows, q.data.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        x.data[i] = static_cast<double>(q.data.data[i]) * q.scale;
    return x;
}

CellDecomposition decompose_cells(const QuantTensor& w, int bits_per_cell) {
    if (bits_per_cell < 1 || bits_per_cell > w.bits)
        throw std::invalid_argument("decompose_cells: bits_per_cell out of range");
    const int n_planes = planes_per_value(w.bits, bits_per_cell);
    const std::int64_t radix = std::int64_t{1} << bits_per_cell;

    CellDecomposition dec;
    dec.bits_per_cell = bits_per_cell;
    dec.sign_plane = IMat(w.data.rows, w.data.cols, 1);
    dec.planes.assign(n_planes, IMat(w.data.rows, w.data.cols));
    for (std::size_t i = 0; i < w.data.data.size(); ++i) {
        const std::int64_t v = w.data.data[i];
        if (v < 0) dec.sign_plane.data[i] = -1;
        std::int64_t mag = std::abs(v);
        for (int p = 0; p < n_planes; ++p) {
            dec.planes[p].data[i] = mag % radix;
            mag /= radix;
        }
    }
    return dec;
}

IMat recombine(const std::vector<IMat>& planes, const IMat& sign_plane, int bits_per_cell) {
    if (planes.empty()) throw std::invalid_argument("recombine: no planes");
    for (const IMat& p : planes)
        if (!p.same_shape(planes.front())) throw std::invalid_argument("recombine: plane shape mismatch");
    if (!sign_plane.same_shape(planes.front()))
        throw std::invalid_argument("recombine: sign plane shape mismatch");

    IMat out(planes.front().rows, planes.front().cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        std::int64_t acc = 0;
        for (std::size_t p = 0; p < planes.size(); ++p)
            acc += planes[p].data[i] << (p * static_cast<std::size_t>(bits_per_cell));
        out.data[i] = sign_plane.data[i] * acc;
    }
    return out;
}

double map_to_conductance(std::int64_t plane_value, int bits_per_cell,
                          double band_lo_us, double band_hi_us) {
    const std::int64_t levels = (std::int64_t{1} << bits_per_cell) - 1;
    if (plane_value < 0 || plane_value > levels)
        throw std::invalid_argument("map_to_conductance: plane value out of range");
    if (levels == 0) return band_lo_us;
    return band_lo_us + static_cast<double>(plane_value) * (band_hi_us - band_lo_us) /
                            static_cast<double>(levels);
}

}  // namespace dgcim
