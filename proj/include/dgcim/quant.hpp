#ifndef DGCIM_QUANT_HPP
#define DGCIM_QUANT_HPP

#include <cstdint>
#include <vector>

#include "dgcim/common.hpp"

namespace dgcim {

// Symmetric uniform post-training quantization with per-tensor scales, plus
// the multi-bit-cell decomposition used to place signed integers onto
// positive/negative conductance arrays.

struct QuantScheme {
    int input_bits = 8;
    int weight_bits = 8;
    int adc_bits = 8;
    int dac_bits = 8;        // back-gate DAC
    int bits_per_cell = 2;
    double act_scale = 1.0;
    double weight_scale = 1.0;
    bool bit_serial_input = true;  // affects cycle accounting, LSB-first
};

void validate(const QuantScheme& s);  // throws std::invalid_argument

// Largest magnitude representable in the symmetric signed range: 2^(bits-1)-1.
inline std::int64_t qmax(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

// scale = max|x| / qmax(bits); an all-zero tensor falls back to scale = 1.
double calibrate_scale(const Mat& samples, int bits);

struct QuantTensor {
    IMat data;
    double scale = 1.0;
    int bits = 8;
};

// clamp(round(x/scale)) with round-half-away-from-zero.
QuantTensor quantize(const Mat& x, double scale, int bits);
Mat dequantize(const QuantTensor& q);

struct CellDecomposition {
    std::vector<IMat> planes;  // base-2^bits_per_cell digits of |w|, LSB first
    int bits_per_cell = 2;
    IMat sign_plane;           // +1 / -1, sign(0) = +1
};

CellDecomposition decompose_cells(const QuantTensor& w, int bits_per_cell);

// Exact inverse of decompose_cells: sign * sum_i planes[i] * 2^(i*bits_per_cell).
IMat recombine(const std::vector<IMat>& planes, const IMat& sign_plane, int bits_per_cell);

// Affine map of a cell digit onto the operating band; digit 0 sits at band_lo,
// not at zero conductance (the offset cancels in the differential read).
double map_to_conductance(std::int64_t plane_value, int bits_per_cell,
                          double band_lo_us, double band_hi_us);

inline int planes_per_value(int value_bits, int bits_per_cell) {
    return (value_bits + bits_per_cell - 1) / bits_per_cell;
}

}  // namespace dgcim

#endif
