#ifndef DGCIM_ORACLE_HPP
#define DGCIM_ORACLE_HPP

#include <vector>

#include "dgcim/common.hpp"

namespace dgcim {
namespace oracle {

// Brute-force references kept in the main library so reports can carry
// error-vs-oracle columns. None of these share kernels with the simulator:
// naive_attention is triple-nested loops with its own accumulation order.

struct OracleCase {
    std::uint64_t seed = 0;
    int n = 4, d = 8, d_k = 4, h = 2;  // each <= 32 by construction
    double tolerance = 1e-6;
    std::string description;
};

// Multi-head scaled dot-product attention, concatenated heads, no output
// projection. w_q/w_k/w_v are per-head d_k x d matrices.
Mat naive_attention(const Mat& x, const std::vector<Mat>& w_q, const std::vector<Mat>& w_k,
                    const std::vector<Mat>& w_v);

// Exact (A*B)*C with an associativity cross-check against A*(B*C).
Mat triple_product(const Mat& a, const Mat& b, const Mat& c);

std::vector<double> float_softmax(const std::vector<double>& x);
std::vector<double> float_layernorm(const std::vector<double>& x, const std::vector<double>& gamma,
                                    const std::vector<double>& beta, double eps = 0.0);
double float_gelu_sigmoid(double x);  // x * sigma(1.702 x)

}  // namespace oracle
}  // namespace dgcim

#endif
