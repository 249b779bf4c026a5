#include <doctest.h>

#include <cmath>

#include "dgcim/attention.hpp"
#include "dgcim/oracle.hpp"

using namespace dgcim;

TEST_CASE("triple_product: hand case and identities") {
    Mat eye(2, 2), twos(2, 2), ones(2, 2, 1.0);
    eye(0, 0) = eye(1, 1) = 1.0;
    twos(0, 0) = twos(1, 1) = 2.0;
    const Mat r = oracle::triple_product(eye, twos, ones);
    for (double v : r.data) CHECK(v == doctest::Approx(2.0));

    auto rng = seeded_stream(41, "test.triple");
    const Mat a = random_mat(rng, 3, 4, -1.0, 1.0);
    const Mat i4 = [] {
        Mat m(4, 4);
        for (int k = 0; k < 4; ++k) m(k, k) = 1.0;
        return m;
    }();
    const Mat back = oracle::triple_product(a, i4, i4);
    CHECK(max_abs_diff(a, back) == 0.0);
}

TEST_CASE("float SFU references") {
    const auto p = oracle::float_softmax({0.0, 0.0, 0.0, 0.0});
    for (double v : p) CHECK(v == doctest::Approx(0.25));
    CHECK(oracle::float_gelu_sigmoid(0.0) == 0.0);
    CHECK(oracle::float_gelu_sigmoid(3.0) == doctest::Approx(2.9819).epsilon(1e-4));
}

TEST_CASE("naive_attention agrees with the reference implementation") {
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        AttentionJob job;
        job.seed = seed * 31;
        job.n_tokens = 2 + static_cast<int>(seed % 6);
        job.n_heads = (seed % 2) ? 2 : 1;
        job.d_k = 2 + static_cast<int>(seed % 3);
        job.d_model = job.n_heads * job.d_k;
        job.n_layers = 1;

        std::vector<LayerWeights> w = generate_weights(job);
        // reference path includes W_O; neutralize it for the comparison
        w[0].w_o = Mat(job.d_model, job.d_model);
        for (int i = 0; i < job.d_model; ++i) w[0].w_o(i, i) = 1.0;

        const Mat ref = run_reference_attention(job, w);
        const Mat naive = oracle::naive_attention(generate_input(job), w[0].w_q, w[0].w_k,
                                                  w[0].w_v);
        CHECK(max_abs_diff(ref, naive) <= 1e-6 * std::max(ref.max_abs(), 1e-30));
    }
}

TEST_CASE("naive_attention: single token gives the softmax-of-a-scalar path") {
    AttentionJob job;
    job.n_tokens = 1;
    job.n_heads = 1;
    job.d_k = 3;
    job.d_model = 3;
    job.seed = 5;
    const auto w = generate_weights(job);
    const Mat x = generate_input(job);
    const Mat out = oracle::naive_attention(x, w[0].w_q, w[0].w_k, w[0].w_v);
    // softmax over one element is 1, so the output is x * w_v^T
    const Mat expect = matmul(x, transpose(w[0].w_v[0]));
    CHECK(max_abs_diff(out, expect) <= 1e-12);
}

TEST_CASE("oracle and library kernels use genuinely different accumulation orders") {
    // adversarial magnitudes make the rounding sequences visible: the two
    // paths agree loosely but not bitwise, so they cannot share a kernel
    Mat a(1, 3);
    a(0, 0) = 1e16;
    a(0, 1) = -1e16;
    a(0, 2) = 1.0;
    Mat b(3, 1, 1.0);
    Mat eye(1, 1);
    eye(0, 0) = 1.0;

    const Mat lib = matmul(matmul(a, b), eye);
    const Mat orc = oracle::triple_product(a, b, eye);
    CHECK(std::abs(lib(0, 0) - orc(0, 0)) <= 4.0);  // loose agreement (ulp scale of 1e16)
    CHECK(lib(0, 0) != orc(0, 0));                  // different rounding sequence
}

TEST_CASE("symmetric inputs with shared weights give a symmetric attention matrix") {
    // X symmetric (as a matrix) and W_Q = W_K makes Q K^T symmetric; check via
    // the naive path by probing two transposed positions
    AttentionJob job;
    job.n_tokens = 4;
    job.n_heads = 1;
    job.d_k = 4;
    job.d_model = 4;
    job.seed = 99;
    auto w = generate_weights(job);
    w[0].w_k[0] = w[0].w_q[0];
    auto rng = seeded_stream(99, "sym");
    Mat x(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = uniform_double(rng, -1.0, 1.0);
            x(i, j) = v;
            x(j, i) = v;
        }
    const Mat q = matmul(x, transpose(w[0].w_q[0]));
    const Mat k = matmul(x, transpose(w[0].w_k[0]));
    const Mat scores = matmul(q, transpose(k));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(scores(i, j) == doctest::Approx(scores(j, i)).epsilon(1e-9));
}
