#include "dgcim/sfu.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "dgcim/quant.hpp"

namespace dgcim {

FixedVec to_fixed(const std::vector<double>& x, int bits) {
    Mat m(1, x.size());
    m.data = x;
    return to_fixed(x, calibrate_scale(m, bits), bits);
}

FixedVec to_fixed(const std::vector<double>& x, double scale, int bits) {
    FixedVec v;
    v.scale = scale;
    v.bits = bits;
    const double lim = static_cast<double>(qmax(bits));
    v.data.reserve(x.size());
    for (double e : x) {
        double r = std::round(e / scale);
        r = std::clamp(r, -lim, lim);
        v.data.push_back(static_cast<std::int32_t>(r));
    }
    return v;
}

std::vector<double> to_real(const FixedVec& v) {
    std::vector<double> out;
    out.reserve(v.data.size());
    for (std::int32_t e : v.data) out.push_back(e * v.scale);
    return out;
}

Lut256 make_exp_lut() {
    Lut256 lut;
    lut.domain_lo = -8.0;
    lut.domain_hi = 0.0;
    lut.out_scale = 1.0 / 255.0;
    for (int k = 0; k < 256; ++k) {
        const double x = lut.domain_lo + (lut.domain_hi - lut.domain_lo) * k / 255.0;
        lut.entries[k] = static_cast<std::int32_t>(std::lround(std::exp(x) * 255.0));
    }
    return lut;
}

Lut256 make_sigmoid_lut() {
    Lut256 lut;
    lut.domain_lo = -8.0;
    lut.domain_hi = 8.0;
    lut.out_scale = 1.0 / 255.0;
    for (int k = 0; k < 256; ++k) {
        const double x = lut.domain_lo + (lut.domain_hi - lut.domain_lo) * k / 255.0;
        lut.entries[k] = static_cast<std::int32_t>(std::lround(255.0 / (1.0 + std::exp(-x))));
    }
    return lut;
}

Lut256 make_recip_lut() {
    Lut256 lut;
    lut.domain_lo = 1.0;
    lut.domain_hi = 2.0;
    lut.out_scale = 1.0 / static_cast<double>(1 << 24);
    for (int k = 0; k < 256; ++k)
        lut.entries[k] = static_cast<std::int32_t>(std::lround(16777216.0 / (256.0 + k)));
    return lut;
}

Lut256 make_inv_sqrt_lut() {
    Lut256 lut;
    lut.domain_lo = 1.0;
    lut.domain_hi = 2.0;
    lut.out_scale = 1.0 / 32768.0;
    for (int k = 0; k < 256; ++k)
        lut.entries[k] = static_cast<std::int32_t>(std::lround(32768.0 / std::sqrt(1.0 + k / 256.0)));
    return lut;
}

void dump_lut(const Lut256& lut, std::ostream& out) {
    out << "# index\tentry\tdomain=[" << lut.domain_lo << "," << lut.domain_hi
        << "] out_scale=" << lut.out_scale << "\n";
    for (int k = 0; k < 256; ++k) out << k << "\t" << lut.entries[k] << "\n";
}

namespace {

inline int lut_index(double x, const Lut256& lut) {
    const double t = (x - lut.domain_lo) / (lut.domain_hi - lut.domain_lo) * 255.0;
    return static_cast<int>(std::clamp(std::lround(t), long{0}, long{255}));
}

inline std::int64_t divround(std::int64_t num, std::int64_t den) {
    // round half away from zero, den > 0
    const std::int64_t half = den / 2;
    return num >= 0 ? (num + half) / den : -((-num + half) / den);
}

inline int bit_length(std::uint64_t v) {
    int n = 0;
    while (v) {
        ++n;
        v >>= 1;
    }
    return n;
}

}  // namespace

FixedVec softmax_pipeline(const FixedVec& x, const SfuConfig& cfg) {
    if (x.data.empty()) throw std::invalid_argument("softmax_pipeline: empty input");
    const std::size_t n = x.data.size();

    // stage 1: comparator-tree max
    const std::int32_t x_max = *std::max_element(x.data.begin(), x.data.end());

    // stage 2: exp LUT on the (non-positive) difference
    std::vector<std::int64_t> e(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double arg = static_cast<double>(x.data[i] - x_max) * x.scale;
        e[i] = cfg.exp_lut.entries[lut_index(arg, cfg.exp_lut)];
    }

    // stage 3: adder-tree sum (the max element guarantees sum >= 255)
    std::int64_t sum = 0;
    for (std::int64_t v : e) sum += v;

    // stage 4: reciprocal LUT on the normalized mantissa, then multiply.
    // sum = m * 2^k with m in [1,2); entry approximates 2^24/(256*m).
    const int k = bit_length(static_cast<std::uint64_t>(sum)) - 1;
    std::int64_t m_idx = divround(static_cast<std::int64_t>(sum) << 8, std::int64_t{1} << k) - 256;
    m_idx = std::clamp<std::int64_t>(m_idx, 0, 255);
    const std::int64_t recip = cfg.recip_lut.entries[static_cast<int>(m_idx)];

    FixedVec out;
    out.bits = 10;
    out.scale = 1.0 / 512.0;
    out.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // e/sum ~= e * recip * 2^-(16+k); rescale to Q1.9
        const std::int64_t q = divround(e[i] * recip, std::int64_t{1} << (k + 7));
        out.data[i] = static_cast<std::int32_t>(std::clamp<std::int64_t>(q, 0, qmax(10)));
    }
    return out;
}

FixedVec layernorm_pipeline(const FixedVec& x, const FixedVec& gamma, const FixedVec& beta,
                            const SfuConfig& cfg) {
    const std::size_t d = x.data.size();
    if (d < 2) throw std::invalid_argument("layernorm_pipeline: need d >= 2");
    if (gamma.data.size() != d || beta.data.size() != d)
        throw std::invalid_argument("layernorm_pipeline: gamma/beta length mismatch");

    // pass 1: mean in input LSBs
    std::int64_t sum = 0;
    for (std::int32_t v : x.data) sum += v;
    const std::int64_t mean_q = divround(sum, static_cast<std::int64_t>(d));

    // pass 2: variance in LSB^2, with the epsilon floor for flat vectors
    std::int64_t var_q = 0;
    for (std::int32_t v : x.data) {
        const std::int64_t r = v - mean_q;
        var_q += r * r;
    }
    var_q = divround(var_q, static_cast<std::int64_t>(d));
    const std::int64_t eps_floor = std::max<std::int64_t>(1, (qmax(x.bits) * qmax(x.bits)) >> 16);
    var_q = std::max(var_q, eps_floor);

    // inverse sqrt via mantissa LUT: var = m * 2^k, 1/sqrt(var) = lut(m) * 2^-k/2
    const int k = bit_length(static_cast<std::uint64_t>(var_q)) - 1;
    std::int64_t m_idx = divround(var_q << 8, std::int64_t{1} << k) - 256;
    m_idx = std::clamp<std::int64_t>(m_idx, 0, 255);
    std::int64_t inv_sqrt = cfg.inv_sqrt_lut.entries[static_cast<int>(m_idx)];  // Q1.15
    static const std::int64_t inv_sqrt2_q15 = 23170;                            // 2^15/sqrt(2)
    if (k & 1) inv_sqrt = divround(inv_sqrt * inv_sqrt2_q15, std::int64_t{1} << 15);
    const int half_k = k / 2;

    // normalized residual in Q3.12 (saturating at +-8), then per-dimension affine
    FixedVec out;
    out.bits = 24;
    out.scale = (1.0 / 4096.0) * gamma.scale;
    out.data.resize(d);
    const double beta_rescale = beta.scale / out.scale;
    for (std::size_t i = 0; i < d; ++i) {
        const std::int64_t r = x.data[i] - mean_q;
        // r * inv_sqrt * 2^-15 * 2^-half_k, kept at 12 fractional bits
        std::int64_t norm_q = divround(r * inv_sqrt, std::int64_t{1} << (3 + half_k));
        norm_q = std::clamp<std::int64_t>(norm_q, -qmax(16), qmax(16));
        std::int64_t o = norm_q * gamma.data[i];
        o += static_cast<std::int64_t>(std::llround(beta.data[i] * beta_rescale));
        out.data[i] = static_cast<std::int32_t>(std::clamp<std::int64_t>(o, -qmax(24), qmax(24)));
    }
    return out;
}

FixedVec gelu_pipeline(const FixedVec& x, const SfuConfig& cfg) {
    FixedVec out;
    out.bits = std::min(x.bits + 5, 31);  // |x * sigma| <= |x|, kept at 4 extra fraction bits
    out.scale = x.scale * 16.0 / 255.0;   // sigma is Q0.8, product divided by 16
    out.data.resize(x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const std::int32_t xi = x.data[i];
        // shift-add prescale approximating 1.702 * x
        std::int64_t t = 0;
        for (int s : cfg.gelu_scaler_shifts) t += static_cast<std::int64_t>(xi) >> s;
        const double u = static_cast<double>(t) * x.scale;
        const std::int64_t sig = cfg.sigmoid_lut.entries[lut_index(u, cfg.sigmoid_lut)];
        // x * sigma, output at 4 extra fractional bits
        out.data[i] = static_cast<std::int32_t>(divround(static_cast<std::int64_t>(xi) * sig, 16));
    }
    return out;
}

}  // namespace dgcim
