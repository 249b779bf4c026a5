#include <doctest.h>

#include <cmath>

#include "dgcim/quant.hpp"

using namespace dgcim;

namespace {

Mat scalar_mat(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

}  // namespace

TEST_CASE("calibrate_scale") {
    CHECK(calibrate_scale(scalar_mat(127.0), 8) == doctest::Approx(1.0));
    CHECK(calibrate_scale(scalar_mat(-6.35), 8) == doctest::Approx(0.05));
    CHECK(calibrate_scale(scalar_mat(0.0), 8) == doctest::Approx(1.0));  // fallback
}

TEST_CASE("quantize: rounding and saturation") {
    const double s = 0.03;
    CHECK(quantize(scalar_mat(0.0), s, 8).data(0, 0) == 0);
    CHECK(quantize(scalar_mat(s * 100.4), s, 8).data(0, 0) == 100);
    CHECK(quantize(scalar_mat(s * 100.5), s, 8).data(0, 0) == 101);  // half away from zero
    CHECK(quantize(scalar_mat(s * -100.5), s, 8).data(0, 0) == -101);
    CHECK(quantize(scalar_mat(s * 300.0), s, 8).data(0, 0) == 127);
    CHECK(quantize(scalar_mat(s * -300.0), s, 8).data(0, 0) == -127);
    CHECK_THROWS_AS(quantize(scalar_mat(1.0), 0.0, 8), std::invalid_argument);
}

TEST_CASE("quantize is odd: q(-x) = -q(x)") {
    for (double x = -4.0; x <= 4.0; x += 0.37) {
        const auto a = quantize(scalar_mat(x), 0.05, 8);
        const auto b = quantize(scalar_mat(-x), 0.05, 8);
        CHECK(a.data(0, 0) == -b.data(0, 0));
    }
}

TEST_CASE("dequantize and the quantizer fixed point") {
    QuantTensor q;
    q.data = IMat(1, 1, 127);
    q.scale = 0.05;
    q.bits = 8;
    CHECK(dequantize(q)(0, 0) == doctest::Approx(6.35));
    // quantize(dequantize(q)) == q for every representable code
    for (int v = -127; v <= 127; ++v) {
        QuantTensor in;
        in.data = IMat(1, 1, v);
        in.scale = 0.013;
        in.bits = 8;
        const QuantTensor back = quantize(dequantize(in), in.scale, in.bits);
        CHECK(back.data(0, 0) == v);
    }
}

TEST_CASE("quantization error bound: |x - deq(q(x))| <= scale/2 in range") {
    const double s = 0.05;
    for (double x = -6.3; x <= 6.3; x += 0.0173) {
        const QuantTensor q = quantize(scalar_mat(x), s, 8);
        CHECK(std::abs(x - dequantize(q)(0, 0)) <= s / 2 + 1e-12);
    }
}

TEST_CASE("decompose_cells: base-4 digits, LSB first") {
    // magnitude 118 = 0b01110110 -> digits [2, 1, 3, 1]
    QuantTensor q;
    q.data = IMat(1, 1, 118);
    q.scale = 1.0;
    q.bits = 8;
    const CellDecomposition dec = decompose_cells(q, 2);
    REQUIRE(dec.planes.size() == 4);
    CHECK(dec.planes[0](0, 0) == 2);
    CHECK(dec.planes[1](0, 0) == 1);
    CHECK(dec.planes[2](0, 0) == 3);
    CHECK(dec.planes[3](0, 0) == 1);
    CHECK(dec.sign_plane(0, 0) == 1);
}

TEST_CASE("decompose_cells: zero value and degenerate split") {
    QuantTensor q;
    q.data = IMat(1, 1, 0);
    q.scale = 1.0;
    q.bits = 8;
    const CellDecomposition dec = decompose_cells(q, 2);
    for (const IMat& p : dec.planes) CHECK(p(0, 0) == 0);
    CHECK(dec.sign_plane(0, 0) == 1);  // sign(0) = +1

    QuantTensor q2;
    q2.data = IMat(1, 1, -77);
    q2.scale = 1.0;
    q2.bits = 8;
    const CellDecomposition whole = decompose_cells(q2, 8);
    REQUIRE(whole.planes.size() == 1);
    CHECK(whole.planes[0](0, 0) == 77);
    CHECK(whole.sign_plane(0, 0) == -1);
}

TEST_CASE("recombine inverts decompose exhaustively (2-bit and 1-bit cells)") {
    for (int bpc : {2, 1}) {
        for (int v = -127; v <= 127; ++v) {
            QuantTensor q;
            q.data = IMat(1, 1, v);
            q.scale = 1.0;
            q.bits = 8;
            const CellDecomposition dec = decompose_cells(q, bpc);
            const IMat back = recombine(dec.planes, dec.sign_plane, bpc);
            REQUIRE(back(0, 0) == v);
        }
    }
}

TEST_CASE("recombine: frozen example and error paths") {
    std::vector<IMat> planes;
    for (std::int64_t d : {2, 1, 3, 1}) planes.push_back(IMat(1, 1, d));
    const IMat sign(1, 1, 1);
    CHECK(recombine(planes, sign, 2)(0, 0) == 118);
    CHECK(recombine({IMat(1, 1, 0)}, sign, 2)(0, 0) == 0);
    CHECK_THROWS_AS(recombine({}, sign, 2), std::invalid_argument);
    CHECK_THROWS_AS(recombine({IMat(1, 2, 0)}, sign, 2), std::invalid_argument);
}

TEST_CASE("map_to_conductance: affine map onto the band") {
    CHECK(map_to_conductance(0, 2, 29.0, 69.0) == doctest::Approx(29.0));
    CHECK(map_to_conductance(3, 2, 29.0, 69.0) == doctest::Approx(69.0));
    CHECK(map_to_conductance(1, 2, 29.0, 69.0) == doctest::Approx(29.0 + 40.0 / 3.0));
    CHECK_THROWS_AS(map_to_conductance(4, 2, 29.0, 69.0), std::invalid_argument);
    // monotone, image inside the band
    double prev = -1.0;
    for (std::int64_t v = 0; v < 4; ++v) {
        const double g = map_to_conductance(v, 2, 29.0, 69.0);
        CHECK(g > prev);
        CHECK(g >= 29.0);
        CHECK(g <= 69.0);
        prev = g;
    }
}

TEST_CASE("QuantScheme validation") {
    QuantScheme s;
    CHECK_NOTHROW(validate(s));
    s.bits_per_cell = 9;
    CHECK_THROWS_AS(validate(s), std::invalid_argument);
    s = QuantScheme();
    s.act_scale = 0.0;
    CHECK_THROWS_AS(validate(s), std::invalid_argument);
}
