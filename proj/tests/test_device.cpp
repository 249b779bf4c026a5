#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dgcim/common.hpp"
#include "dgcim/device.hpp"

using namespace dgcim;

TEST_CASE("ctgox: series combination of the top-gate capacitances") {
    CHECK(ctgox({2.0, 2.0, 1.0, 1.0}) == doctest::Approx(1.0));
    CHECK(ctgox({3.0, 6.0, 1.0, 1.0}) == doctest::Approx(2.0));
    // series limit: huge c_fe leaves c_il
    const double c = 0.7;
    CHECK(ctgox({1e9 * c, c, 1.0, 1.0}) == doctest::Approx(c).epsilon(1e-6));
    CHECK_THROWS_AS(ctgox({0.0, 1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("gamma_tg: capacitor-network coupling") {
    // all four node capacitances equal 1 (c_fe = c_il = 2 makes ctgox = 1)
    CHECK(gamma_tg({2.0, 2.0, 1.0, 1.0}) == doctest::Approx(0.5));
    // no back-gate oxide, no coupling
    CHECK(gamma_tg({2.0, 2.0, 1.0, 1e-12}) == doctest::Approx(0.0).epsilon(1e-9));
    // scale invariance: doubling every capacitance leaves gamma unchanged
    const double g1 = gamma_tg({3.0, 5.0, 2.0, 4.0});
    const double g2 = gamma_tg({6.0, 10.0, 4.0, 8.0});
    CHECK(g1 == doctest::Approx(g2).epsilon(1e-12));
}

TEST_CASE("delta_vth: sign and magnitude") {
    CHECK(delta_vth(0.5, 1.0) == doctest::Approx(-0.5));
    CHECK(delta_vth(0.3, 0.0) == 0.0);
    CHECK(delta_vth(0.9, 2.0) < 0.0);
}

TEST_CASE("eta_bg: alpha + M/G0") {
    DeviceParams p;
    CHECK(eta_bg(69.0, p) == doctest::Approx(0.15932).epsilon(1e-4));
    CHECK(eta_bg(1e9, p) == doctest::Approx(p.alpha).epsilon(1e-6));
    CHECK_THROWS_AS(eta_bg(0.0, p), std::invalid_argument);
    CHECK_THROWS_AS(eta_bg(-3.0, p), std::invalid_argument);
    // strictly decreasing across the operating band
    double prev = eta_bg(29.0, p);
    for (int g = 30; g <= 69; ++g) {
        const double cur = eta_bg(static_cast<double>(g), p);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("gds_linear: zero-bias identity and first-order linearity") {
    CHECK(gds_linear(42.0, 0.0, 0.157) == doctest::Approx(42.0));
    CHECK(gds_linear(50.0, 1.0, 0.157) == doctest::Approx(57.85));
    const double g0 = 37.0, eta = 0.163, v = 0.4;
    const double d1 = gds_linear(g0, v, eta) - g0;
    const double d2 = gds_linear(g0, 2.0 * v, eta) - g0;
    CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-12));
}

TEST_CASE("gds_full: differs from the linear form by exactly M*alpha*V^2") {
    DeviceParams p;
    CHECK(gds_full(50.0, 0.0, p) == doctest::Approx(50.0));
    for (double g0 : {29.0, 42.0, 69.0})
        for (double v : {-1.0, -0.3, 0.2, 1.0}) {
            const double expected = p.m_coeff * p.alpha * v * v;
            const double diff = gds_full(g0, v, p) - gds_linear(g0, v, eta_bg(g0, p));
            CHECK(diff == doctest::Approx(expected).epsilon(1e-9));
        }
    // the frozen example: 29 uS at 1 V
    const double diff = gds_full(29.0, 1.0, p) - gds_linear(29.0, 1.0, eta_bg(29.0, p));
    CHECK(diff == doctest::Approx(0.211).epsilon(1e-2));
}

TEST_CASE("fit_alpha_m: noiseless round trip") {
    DeviceParams p;
    std::vector<GVSample> samples;
    for (int i = 0; i <= 8; ++i) {
        const double v = -1.0 + 0.25 * i;
        samples.push_back({v, gds_full(50.0, v, p)});
    }
    const FitResult fit = fit_alpha_m(samples, 50.0);
    CHECK(fit.alpha == doctest::Approx(0.137).epsilon(1e-6));
    CHECK(fit.m_coeff == doctest::Approx(1.54).epsilon(1e-6));
    CHECK(fit.residual_norm < 1e-9);
}

TEST_CASE("fit_alpha_m: degenerate M = 0 recovers the pure slope") {
    std::vector<GVSample> samples;
    const double alpha = 0.11, g0 = 40.0;
    for (int i = 0; i <= 6; ++i) {
        const double v = -0.9 + 0.3 * i;
        samples.push_back({v, g0 * (1.0 + alpha * v)});
    }
    const FitResult fit = fit_alpha_m(samples, g0);
    CHECK(fit.alpha == doctest::Approx(alpha).epsilon(1e-9));
    CHECK(fit.m_coeff == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("fit_alpha_m: gaussian noise, recovery within 5%") {
    DeviceParams p;
    auto rng = seeded_stream(7, "test.fit.noise");
    auto gaussian = [&rng](double sigma) {  // Box-Muller
        const double u1 = std::max(uniform_double(rng, 0.0, 1.0), 1e-12);
        const double u2 = uniform_double(rng, 0.0, 1.0);
        return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    };
    std::vector<GVSample> samples;
    for (int i = 0; i <= 40; ++i) {
        const double v = -1.0 + 0.05 * i;
        samples.push_back({v, gds_full(50.0, v, p) + gaussian(0.1)});
    }
    const FitResult fit = fit_alpha_m(samples, 50.0);
    CHECK(fit.alpha == doctest::Approx(p.alpha).epsilon(0.05));
    CHECK(fit.m_coeff == doctest::Approx(p.m_coeff).epsilon(0.05));
    CHECK(fit.residual_norm > 0.0);
}

TEST_CASE("fit_alpha_m: underdetermined input is rejected") {
    std::vector<GVSample> two = {{0.0, 50.0}, {1.0, 58.0}, {1.0, 58.0}};
    CHECK_THROWS_AS(fit_alpha_m(two, 50.0), std::invalid_argument);
}

TEST_CASE("band_average_eta: the three averaging methods") {
    DeviceParams p;
    CHECK(band_average_eta(29.0, 69.0, p, EtaAverage::FixedConstant) == doctest::Approx(0.157));
    // closed-form integral mean: alpha + M * ln(hi/lo) / (hi - lo)
    const double closed = p.alpha + p.m_coeff * std::log(69.0 / 29.0) / 40.0;
    CHECK(closed == doctest::Approx(0.1704).epsilon(1e-3));
    CHECK(band_average_eta(29.0, 69.0, p, EtaAverage::UniformGridMean) ==
          doctest::Approx(closed).epsilon(1e-3));
    CHECK(band_average_eta(29.0, 69.0, p, EtaAverage::EndpointMean) ==
          doctest::Approx(0.5 * (eta_bg(29.0, p) + eta_bg(69.0, p))));
    CHECK(band_average_eta(29.0, 69.0, p, EtaAverage::EndpointMean) ==
          doctest::Approx(0.1747).epsilon(1e-3));
    // near-degenerate band collapses to the point sensitivity
    CHECK(band_average_eta(29.0, 29.0 + 1e-7, p, EtaAverage::UniformGridMean) ==
          doctest::Approx(eta_bg(29.0, p)).epsilon(1e-3));
    CHECK_THROWS_AS(band_average_eta(69.0, 29.0, p, EtaAverage::UniformGridMean),
                    std::invalid_argument);
}

TEST_CASE("band uniformity bound: positive, attained at an endpoint") {
    DeviceParams p;
    const double bound = band_uniformity_bound(29.0, 69.0, p);
    CHECK(bound > 0.0);
    const double mean = band_average_eta(29.0, 69.0, p, EtaAverage::UniformGridMean);
    // eta is monotone in g0, so the worst deviation sits at a band edge
    const double edge = std::max(eta_bg(29.0, p) - mean, mean - eta_bg(69.0, p));
    CHECK(bound == doctest::Approx(edge).epsilon(1e-9));
}

TEST_CASE("stock eta_bar sits outside the band-implied range and is reported") {
    DeviceParams p;
    const auto warnings = consistency_warnings(p);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("eta_bar") != std::string::npos);
    // a band-consistent value produces no warning
    p.eta_bar = 0.17;
    CHECK(consistency_warnings(p).empty());
}

TEST_CASE("gv sample file loading") {
    std::istringstream in(
        "# measured sweep\n"
        "v_bg g_ds\n"
        "0.0 50.0\n"
        "0.5 54.1  # mid point\n"
        "1.0 58.5\n");
    const auto samples = load_gv_samples(in);
    REQUIRE(samples.size() == 3);
    CHECK(samples[1].v_bg == doctest::Approx(0.5));
    CHECK(samples[2].g_ds_us == doctest::Approx(58.5));
}

TEST_CASE("operating band membership") {
    DeviceParams p;
    CHECK(in_operating_band(29.0, p));
    CHECK(in_operating_band(69.0, p));
    CHECK_FALSE(in_operating_band(28.9, p));
    CHECK_FALSE(in_operating_band(70.0, p));
}
