#ifndef DGCIM_DEVICE_HPP
#define DGCIM_DEVICE_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dgcim {

// Double-gate FeFET compact model: a ferroelectric top gate stores a
// non-volatile conductance G0, a plain-dielectric back gate applies a volatile
// multiplicative modulation. Conductance in uS, voltage in V throughout; the
// product gamma_TG * mu_n(0) * C_TGOX is carried as the single fitted
// constant M (uS/V) because only (alpha, M) are ever fitted.

// Capacitances per unit area (F/m^2) of the gate-stack equivalent network.
struct CapacitorStack {
    double c_fe;    // ferroelectric layer
    double c_il;    // interfacial layer
    double c_ch;    // channel
    double c_bgox;  // buried (back-gate) oxide
};

void validate(const CapacitorStack& stack);  // throws std::invalid_argument

// Effective top-gate oxide capacitance: series combination of the
// ferroelectric and interfacial-layer capacitances.
double ctgox(const CapacitorStack& stack);

// Back-gate-to-top-gate coupling coefficient of the capacitor network.
double gamma_tg(const CapacitorStack& stack);

// Threshold shift induced by the back-gate bias: -gamma * v_bg.
double delta_vth(double gamma, double v_bg);

struct DeviceParams {
    double alpha = 0.137;       // mobility-sensitivity coefficient (1/V)
    double m_coeff = 1.54;      // electrostatic coupling constant M (uS/V)
    double gamma_tg = 0.0;      // capacitive coupling, informational only
    double band_lo_us = 29.0;   // operating-band floor (uS)
    double band_hi_us = 69.0;   // operating-band ceiling (uS)
    double eta_bar = 0.157;     // band-averaged sensitivity used for reads (1/V)
    double mu0 = 1.0;           // zero-bias mobility scale, full model only
};

void validate(const DeviceParams& p);  // throws std::invalid_argument

// Soft consistency checks (returned, never thrown). Notably the stock
// eta_bar = 0.157 sits below eta_bg(band_hi) = 0.15932, so the stock
// configuration itself reports one warning here.
std::vector<std::string> consistency_warnings(const DeviceParams& p);

bool in_operating_band(double g0_us, const DeviceParams& p);

// First-order back-gate modulation sensitivity alpha + M/G0.
double eta_bg(double g0_us, const DeviceParams& p);  // throws on g0 <= 0

// Linearized conductance response G0 * (1 + eta * v_bg).
double gds_linear(double g0_us, double v_bg, double eta);

// Full response with field-dependent mobility mu_n(V) = mu_n(0)(1 + alpha V):
// differs from the linearized form by exactly M * alpha * v_bg^2.
double gds_full(double g0_us, double v_bg, const DeviceParams& p);

enum class EtaAverage {
    UniformGridMean,  // arithmetic mean of eta_bg over an even grid
    EndpointMean,     // (eta(lo) + eta(hi)) / 2
    FixedConstant,    // p.eta_bar as-is
};

double band_average_eta(double band_lo_us, double band_hi_us, const DeviceParams& p,
                        EtaAverage method, int grid_points = 1001);

// Largest deviation of eta_bg from its grid mean across the band: a computed
// diagnostic of the uniform-sensitivity approximation, not a fixed constant.
double band_uniformity_bound(double band_lo_us, double band_hi_us, const DeviceParams& p,
                             int grid_points = 1001);

// One measured point of the conductance-vs-back-gate-voltage curve.
struct GVSample {
    double v_bg;     // V
    double g_ds_us;  // uS, > 0
};

struct FitResult {
    double alpha;          // 1/V
    double m_coeff;        // uS/V
    double residual_norm;  // sqrt(sum of squared residuals), uS
};

// Least-squares fit of G(V) = G0 + (alpha*G0 + M)V + M*alpha*V^2 at known G0.
// The quadratic in alpha has roots {alpha, M/G0}; alpha is taken as the larger
// root (band-conductance devices have M/G0 well below alpha).
// Throws std::invalid_argument when fewer than 3 distinct voltages are given,
// std::runtime_error when the fitted coefficients come out negative.
FitResult fit_alpha_m(const std::vector<GVSample>& samples, double g0_us);

// Two-column text (v_bg, g_ds), '#' comments ignored, header line optional.
std::vector<GVSample> load_gv_samples(std::istream& in);
std::vector<GVSample> load_gv_samples_file(const std::string& path);

}  // namespace dgcim

#endif
