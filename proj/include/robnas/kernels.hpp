#pragma once

#include "robnas/adversary.hpp"
#include "robnas/netcore.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace robnas::kernels {

// Dense matrices here are column-major; Gram matrices are small (N x N).
using Matrix = Eigen::MatrixXd;

// Rows are per-input gradients of the scalar output with respect to vec(W).
Mat jacobian(const netcore::NetworkSpec& spec, const netcore::WeightSet& weights, std::span<const Vec> inputs);

// Entry (i, j) = <grad_W f(a_i), grad_W f(b_j)> at the given weights.
Matrix empirical_ntk_gram(std::span<const Vec> inputs_a, std::span<const Vec> inputs_b,
                          const netcore::NetworkSpec& spec, const netcore::WeightSet& weights);
// Same, at freshly initialized weights drawn from seed.
Matrix empirical_ntk_gram(std::span<const Vec> inputs_a, std::span<const Vec> inputs_b,
                          const netcore::NetworkSpec& spec, std::uint64_t seed);

struct KernelSet {
    Matrix clean;         // K
    Matrix cross;         // K-bar_rho:   k(x_i, xhat_j)
    Matrix robust;        // K-hat_rho:   k(xhat_i, xhat_j)
    Matrix cross_twice;   // K-bar_2rho:  k(xhat_i, xhathat_j)
    Matrix robust_twice;  // K-hat_2rho:  k(xhathat_i, xhathat_j)
    double beta = 0.0;
    double radius = 0.0;
    std::string provenance;  // JSON describing spec, seed and adversary
};

// All five Gram matrices share one weight draw.
KernelSet build_kernel_set(std::span<const Vec> inputs, std::span<const int> labels, const netcore::NetworkSpec& spec,
                           std::uint64_t seed, const adversary::AdversaryConfig& adversary, double beta);

// (1-b)^2 K + b(1-b)(Kbar + Kbar^T) + b^2 Khat
Matrix assemble_clean_kernel(const KernelSet& ks);
// (1-b)^2 Khat + b(1-b)(Kbar2 + Kbar2^T) + b^2 Khat2
Matrix assemble_robust_kernel(const KernelSet& ks);

enum class ScoreVariant { clean, robust, robust_twice };
enum class ScoreAggregate { frobenius, trace };

std::string score_variant_name(ScoreVariant v);

double gram_score(const Matrix& gram, ScoreAggregate aggregate = ScoreAggregate::frobenius);

// NTK-score: Frobenius norm (or trace) of the chosen Gram at initialization.
double ntk_score(const netcore::NetworkSpec& spec, std::span<const Vec> inputs, std::span<const int> labels,
                 std::uint64_t seed, ScoreVariant variant, const adversary::AdversaryConfig& adversary,
                 ScoreAggregate aggregate = ScoreAggregate::frobenius);

double lambda_min_exact(const Matrix& m);

// Orthonormal probabilists' Hermite coefficient E[sigma(z) h_r(z)], z ~ N(0, 1),
// by Gauss-Hermite quadrature.
double hermite_coefficient(const std::function<double(double)>& sigma, int r, int nodes = 200);
// relu and leaky_relu use their closed forms.
double hermite_coefficient(const netcore::Activation& sigma, int r, int nodes = 200);

struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;  // sum to 1 (standard normal measure)
};
GaussHermiteRule gauss_hermite_rule(int n);
// h_0 .. h_rmax at z.
std::vector<double> orthonormal_hermite(double z, int rmax);

// Smallest r >= 1 with (N - 1) c^r < 1. Throws when c >= 1.
int choose_r(std::size_t n, double c);

struct LowerBound {
    double value = 0.0;
    double overlap = 0.0;  // c = max_{i != j} |<x_i, x_j>| + 2 rho + rho^2
    int r = 1;
    double mu_r = 0.0;
};

// 2 mu_r(sigma_1)^2 (1 - (N - 1) c^r)
LowerBound lambda_min_lower_bound(std::span<const Vec> inputs, double radius, const netcore::Activation& sigma);

struct BoundReport {
    double clean_quadratic = 0.0;   // y^T K_all^{-1} y
    double robust_quadratic = 0.0;  // y^T K~_all^{-1} y
    double clean_bound_main = 0.0;  // sqrt(L^2 y^T K_all^{-1} y / N)
    double robust_bound_main = 0.0;
    double lambda_min_clean = 0.0;
    double lambda_min_robust = 0.0;
    double clean_courant = 0.0;  // y^T y / lambda_min(K_all)
    double robust_courant = 0.0;
    double clean_bound_courant = 0.0;  // sqrt(L^2 y^T y / (lambda_min N))
    double robust_bound_courant = 0.0;
    double confidence_term = 0.0;  // sqrt(log(1/delta) / N)
    double clean_jitter = 0.0;
    double robust_jitter = 0.0;

    [[nodiscard]] std::string to_json() const;
};

struct QuadraticForm {
    double value = 0.0;
    double jitter = 0.0;
};

// y^T M^{-1} y by Cholesky, escalating diagonal jitter 1e-10 .. 1e-6 on failure.
QuadraticForm inverse_quadratic_form(const Matrix& m, const Vec& y);

BoundReport generalization_bound_terms(const Matrix& k_all, const Matrix& k_tilde_all, const Vec& y, int depth,
                                       double delta);

}  // namespace robnas::kernels
