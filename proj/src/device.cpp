#include "dgcim/device.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dgcim {

void validate(const CapacitorStack& s) {
    if (!(s.c_fe > 0.0 && s.c_il > 0.0 && s.c_ch > 0.0 && s.c_bgox > 0.0))
        throw std::invalid_argument("CapacitorStack: all capacitances must be > 0");
}

double ctgox(const CapacitorStack& s) {
    validate(s);
    return s.c_fe * s.c_il / (s.c_fe + s.c_il);
}

double gamma_tg(const CapacitorStack& s) {
    const double c_tgox = ctgox(s);
    return (s.c_ch * s.c_bgox) / (c_tgox * (s.c_ch + s.c_bgox));
}

double delta_vth(double gamma, double v_bg) { return -gamma * v_bg; }

void validate(const DeviceParams& p) {
    if (!(p.band_lo_us < p.band_hi_us))
        throw std::invalid_argument("DeviceParams: band_lo must be < band_hi");
    if (!(p.band_lo_us > 0.0)) throw std::invalid_argument("DeviceParams: band_lo must be > 0");
    if (!(p.alpha > 0.0)) throw std::invalid_argument("DeviceParams: alpha must be > 0");
    if (!(p.m_coeff > 0.0)) throw std::invalid_argument("DeviceParams: m_coeff must be > 0");
    if (!(p.eta_bar > 0.0)) throw std::invalid_argument("DeviceParams: eta_bar must be > 0");
}

std::vector<std::string> consistency_warnings(const DeviceParams& p) {
    std::vector<std::string> warnings;
    const double eta_hi = eta_bg(p.band_hi_us, p);  // band minimum of eta
    const double eta_lo = eta_bg(p.band_lo_us, p);  // band maximum
    if (p.eta_bar < eta_hi || p.eta_bar > eta_lo) {
        std::ostringstream os;
        os << "eta_bar = " << p.eta_bar << " 1/V lies outside the band range ["
           << eta_hi << ", " << eta_lo << "] implied by alpha, M and the operating band";
        warnings.push_back(os.str());
    }
    return warnings;
}

bool in_operating_band(double g0_us, const DeviceParams& p) {
    return g0_us >= p.band_lo_us && g0_us <= p.band_hi_us;
}

double eta_bg(double g0_us, const DeviceParams& p) {
    if (!(g0_us > 0.0)) throw std::invalid_argument("eta_bg: g0 must be > 0");
    return p.alpha + p.m_coeff / g0_us;
}

double gds_linear(double g0_us, double v_bg, double eta) {
    return g0_us * (1.0 + eta * v_bg);
}

double gds_full(double g0_us, double v_bg, const DeviceParams& p) {
    const double mobility_ratio = 1.0 + p.alpha * v_bg;  // mu_n(V)/mu_n(0)
    return mobility_ratio * g0_us + p.m_coeff * mobility_ratio * v_bg;
}

double band_average_eta(double band_lo_us, double band_hi_us, const DeviceParams& p,
                        EtaAverage method, int grid_points) {
    if (!(band_lo_us < band_hi_us)) throw std::invalid_argument("band_average_eta: invalid band");
    switch (method) {
        case EtaAverage::FixedConstant:
            return p.eta_bar;
        case EtaAverage::EndpointMean:
            return 0.5 * (eta_bg(band_lo_us, p) + eta_bg(band_hi_us, p));
        case EtaAverage::UniformGridMean: {
            const int n = std::max(grid_points, 100);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const double g = band_lo_us + (band_hi_us - band_lo_us) * i / (n - 1);
                acc += eta_bg(g, p);
            }
            return acc / n;
        }
    }
    throw std::logic_error("band_average_eta: unknown method");
}

double band_uniformity_bound(double band_lo_us, double band_hi_us, const DeviceParams& p,
                             int grid_points) {
    const double mean =
        band_average_eta(band_lo_us, band_hi_us, p, EtaAverage::UniformGridMean, grid_points);
    const int n = std::max(grid_points, 100);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = band_lo_us + (band_hi_us - band_lo_us) * i / (n - 1);
        worst = std::max(worst, std::abs(eta_bg(g, p) - mean));
    }
    return worst;
}

namespace {

// Solves the symmetric 2x2 normal equations of the linear LS problem
// y = b*V + c*V^2 in closed form.
struct LinFit {
    double b, c, residual_norm;
};

LinFit fit_quadratic_through_origin(const std::vector<GVSample>& samples, double g0_us) {
    double s2 = 0, s3 = 0, s4 = 0, sy1 = 0, sy2 = 0;
    for (const GVSample& s : samples) {
        const double v = s.v_bg;
        const double y = s.g_ds_us - g0_us;
        s2 += v * v;
        s3 += v * v * v;
        s4 += v * v * v * v;
        sy1 += v * y;
        sy2 += v * v * y;
    }
    const double det = s2 * s4 - s3 * s3;
    if (std::abs(det) < 1e-30) throw std::invalid_argument("fit_alpha_m: singular normal equations");
    const double b = (sy1 * s4 - sy2 * s3) / det;
    const double c = (s2 * sy2 - s3 * sy1) / det;
    double rss = 0.0;
    for (const GVSample& s : samples) {
        const double r = (s.g_ds_us - g0_us) - b * s.v_bg - c * s.v_bg * s.v_bg;
        rss += r * r;
    }
    return {b, c, std::sqrt(rss)};
}

}  // namespace

FitResult fit_alpha_m(const std::vector<GVSample>& samples, double g0_us) {
    if (!(g0_us > 0.0)) throw std::invalid_argument("fit_alpha_m: g0 must be > 0");
    std::vector<double> voltages;
    for (const GVSample& s : samples) voltages.push_back(s.v_bg);
    std::sort(voltages.begin(), voltages.end());
    voltages.erase(std::unique(voltages.begin(), voltages.end()), voltages.end());
    if (voltages.size() < 3)
        throw std::invalid_argument("fit_alpha_m: need samples at >= 3 distinct voltages");

    const LinFit lin = fit_quadratic_through_origin(samples, g0_us);
    // b = alpha*G0 + M, c = alpha*M  =>  G0*alpha^2 - b*alpha + c = 0.
    const double disc = lin.b * lin.b - 4.0 * g0_us * lin.c;
    if (disc < -1e-9 * lin.b * lin.b)
        throw std::runtime_error("fit_alpha_m: no real (alpha, M) solves the fitted polynomial");
    const double root = std::sqrt(std::max(disc, 0.0));
    const double alpha = (lin.b + root) / (2.0 * g0_us);
    const double m = lin.b - alpha * g0_us;
    if (alpha < 0.0 || m < -1e-12)
        throw std::runtime_error("fit_alpha_m: fitted coefficients are negative");
    return {alpha, std::max(m, 0.0), lin.residual_norm};
}

std::vector<GVSample> load_gv_samples(std::istream& in) {
    std::vector<GVSample> out;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double v, g;
        if (ls >> v >> g) {
            if (!(g > 0.0)) throw std::runtime_error("gv data: g_ds must be > 0");
            out.push_back({v, g});
        }
        // non-numeric lines (e.g. a header) are skipped
    }
    return out;
}

std::vector<GVSample> load_gv_samples_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open gv data file: " + path);
    return load_gv_samples(in);
}

}  // namespace dgcim
