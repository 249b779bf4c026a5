#include "dgcim/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace dgcim {
namespace oracle {

namespace {

// Hand-rolled loops, deliberately accumulating in reverse index order so the
// rounding sequence differs from the library matmul it cross-checks.
Mat loop_product(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("oracle: inner dimensions disagree");
    Mat out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = a.cols; k-- > 0;) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

}  // namespace

Mat naive_attention(const Mat& x, const std::vector<Mat>& w_q, const std::vector<Mat>& w_k,
                    const std::vector<Mat>& w_v) {
    const std::size_t h = w_q.size();
    if (h == 0 || w_k.size() != h || w_v.size() != h)
        throw std::invalid_argument("naive_attention: head count mismatch");
    const std::size_t n = x.rows, d = x.cols, d_k = w_q[0].rows;
    Mat out(n, h * d_k);

    for (std::size_t head = 0; head < h; ++head) {
        const Mat& wq = w_q[head];
        const Mat& wk = w_k[head];
        const Mat& wv = w_v[head];
        if (wq.cols != d || wk.cols != d || wv.cols != d || wq.rows != d_k || wk.rows != d_k ||
            wv.rows != d_k)
            throw std::invalid_argument("naive_attention: weight shape mismatch");

        // q/k/v projections, one scalar at a time
        Mat q(n, d_k), k(n, d_k), v(n, d_k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < d_k; ++a) {
                double sq = 0.0, sk = 0.0, sv = 0.0;
                for (std::size_t c = d; c-- > 0;) {
                    sq += x(i, c) * wq(a, c);
                    sk += x(i, c) * wk(a, c);
                    sv += x(i, c) * wv(a, c);
                }
                q(i, a) = sq;
                k(i, a) = sk;
                v(i, a) = sv;
            }

        const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
        for (std::size_t i = 0; i < n; ++i) {
            // row of scaled scores
            std::vector<double> score(n);
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t a = d_k; a-- > 0;) s += q(i, a) * k(j, a);
                score[j] = s * inv_sqrt_dk;
            }
            const std::vector<double> p = float_softmax(score);
            for (std::size_t a = 0; a < d_k; ++a) {
                double acc = 0.0;
                for (std::size_t j = n; j-- > 0;) acc += p[j] * v(j, a);
                out(i, head * d_k + a) = acc;
            }
        }
    }
    return out;
}

Mat triple_product(const Mat& a, const Mat& b, const Mat& c) {
    const Mat left = loop_product(loop_product(a, b), c);
    const Mat right = loop_product(a, loop_product(b, c));
    double scale = 0.0;
    for (double v : left.data) scale = std::max(scale, std::abs(v));
    if (max_abs_diff(left, right) > 1e-9 * std::max(scale, 1.0))
        throw std::runtime_error("triple_product: associativity cross-check failed");
    return left;
}

std::vector<double> float_softmax(const std::vector<double>& x) {
    double m = -1e300;
    for (double v : x) m = std::max(m, v);
    std::vector<double> out(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

std::vector<double> float_layernorm(const std::vector<double>& x, const std::vector<double>& gamma,
                                    const std::vector<double>& beta, double eps) {
    const std::size_t d = x.size();
    if (gamma.size() != d || beta.size() != d)
        throw std::invalid_argument("float_layernorm: length mismatch");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
    return out;
}

double float_gelu_sigmoid(double x) { return x / (1.0 + std::exp(-1.702 * x)); }

}  // namespace oracle
}  // namespace dgcim
