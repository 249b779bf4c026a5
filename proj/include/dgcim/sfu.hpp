#ifndef DGCIM_SFU_HPP
#define DGCIM_SFU_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dgcim/common.hpp"

namespace dgcim {

// Digital special-function pipelines: LUT-based softmax, two-pass LayerNorm
// and sigmoid-approximated GELU. All datapaths are integer; the LUTs are
// built once at configuration time.

struct FixedVec {
    std::vector<std::int32_t> data;
    double scale = 1.0;
    int bits = 8;
};

FixedVec to_fixed(const std::vector<double>& x, int bits);  // calibrated scale
FixedVec to_fixed(const std::vector<double>& x, double scale, int bits);
std::vector<double> to_real(const FixedVec& v);

struct Lut256 {
    std::array<std::int32_t, 256> entries{};
    double domain_lo = 0.0, domain_hi = 0.0;
    double out_scale = 1.0;
};

// exp(x) over [-8, 0], entries unsigned Q0.8. Index 255 is exp(0) = 255/255.
Lut256 make_exp_lut();
// logistic sigmoid over [-8, 8], entries unsigned Q0.8.
Lut256 make_sigmoid_lut();
// 2^24 / (256 + idx): reciprocal of a mantissa normalized to [1, 2).
Lut256 make_recip_lut();
// 2^15 / sqrt(1 + idx/256): inverse square root of a mantissa in [1, 2).
Lut256 make_inv_sqrt_lut();

void dump_lut(const Lut256& lut, std::ostream& out);

struct SfuConfig {
    Lut256 exp_lut = make_exp_lut();
    Lut256 sigmoid_lut = make_sigmoid_lut();
    Lut256 recip_lut = make_recip_lut();
    Lut256 inv_sqrt_lut = make_inv_sqrt_lut();
    // shift-add decomposition of the 1.702 GELU prescale:
    // x + x>>1 + x>>3 + x>>4 + x>>7 = 1.7109375 * x
    std::vector<int> gelu_scaler_shifts = {0, 1, 3, 4, 7};
};

// Four stages: comparator-tree max, exp LUT on x_i - x_max, adder-tree sum,
// reciprocal LUT + multiply. Output is Q1.9 (bits = 10, scale = 2^-9) and sums
// to one within n LSB. Subtracting the integer max first makes the result
// exactly invariant under a common integer shift of the inputs.
FixedVec softmax_pipeline(const FixedVec& x, const SfuConfig& cfg = SfuConfig());

// Two passes over the d-dimensional vector: adder-tree mean, then variance,
// inverse-sqrt LUT and the learned per-dimension affine. Zero variance falls
// back to the epsilon floor (one LSB^2, i.e. 2^-16 of full scale squared).
FixedVec layernorm_pipeline(const FixedVec& x, const FixedVec& gamma, const FixedVec& beta,
                            const SfuConfig& cfg = SfuConfig());

// x * sigmoid(1.702 x): shift-add prescale, 256-entry sigmoid LUT,
// fixed-point multiply. Output scale is input scale / 16.
FixedVec gelu_pipeline(const FixedVec& x, const SfuConfig& cfg = SfuConfig());

}  // namespace dgcim

#endif
