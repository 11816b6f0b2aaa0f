#include "robnas/error.hpp"
#include "robnas/kernels.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace robnas::kernels {

GaussHermiteRule gauss_hermite_rule(int n) {
    if (n < 1) fail(ErrorKind::validation, "quadrature needs at least one node");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite recurrence.
    Vec diag = Vec::Zero(n);
    Vec sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) fail(ErrorKind::numerical, "Gauss-Hermite eigensolve failed");
    GaussHermiteRule rule;
    for (int i = 0; i < n; ++i) {
        rule.nodes.push_back(solver.eigenvalues()(i));
        const double v = solver.eigenvectors()(0, i);
        rule.weights.push_back(v * v);
    }
    return rule;
}

std::vector<double> orthonormal_hermite(double z, int rmax) {
    std::vector<double> h(static_cast<std::size_t>(rmax) + 1);
    h[0] = 1.0;
    if (rmax >= 1) h[1] = z;
    // h_{k+1} = (z h_k - sqrt(k) h_{k-1}) / sqrt(k+1)
    for (int k = 1; k < rmax; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        h[ku + 1] = (z * h[ku] - std::sqrt(static_cast<double>(k)) * h[ku - 1]) / std::sqrt(k + 1.0);
    }
    return h;
}

namespace {

const GaussHermiteRule& cached_rule(int n) {
    static std::mutex mu;
    static std::map<int, GaussHermiteRule> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_hermite_rule(n)).first;
    return it->second;
}

void check_growth(const std::function<double(double)>& sigma) {
    const double scale = 1.0 + std::abs(sigma(0.0)) + std::abs(sigma(1.0)) + std::abs(sigma(-1.0));
    for (double z : {-40.0, -20.0, 20.0, 40.0}) {
        const double v = sigma(z);
        if (!std::isfinite(v) || std::abs(v) > 10.0 * scale * std::pow(1.0 + std::abs(z), 8.0))
            fail(ErrorKind::validation, "activation grows faster than a polynomial; Hermite coefficient diverges");
    }
}

}  // namespace

double hermite_coefficient(const std::function<double(double)>& sigma, int r, int nodes) {
    if (r < 0) fail(ErrorKind::validation, "Hermite order must be >= 0");
    check_growth(sigma);
    const GaussHermiteRule& rule = cached_rule(nodes);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z = rule.nodes[i];
        acc += rule.weights[i] * sigma(z) * orthonormal_hermite(z, r)[static_cast<std::size_t>(r)];
    }
    return acc;
}

namespace {

// Exact coefficients of relu; quadrature converges slowly across its kink at 0.
double relu_coefficient(int r) {
    const double root_two_pi = std::sqrt(2.0 * std::numbers::pi);
    if (r == 0) return 1.0 / root_two_pi;
    if (r == 1) return 0.5;
    if (r % 2 == 1) return 0.0;
    // (-1)^(r/2 + 1) (r - 3)!! / sqrt(2 pi r!)
    double dfact = 1.0;
    for (int k = r - 3; k > 1; k -= 2) dfact *= k;
    const double log_fact = std::lgamma(r + 1.0);
    const double sign = (r / 2) % 2 == 0 ? -1.0 : 1.0;
    return sign * dfact * std::exp(-0.5 * log_fact) / root_two_pi;
}

}  // namespace

double hermite_coefficient(const netcore::Activation& sigma, int r, int nodes) {
    if (r < 0) fail(ErrorKind::validation, "Hermite order must be >= 0");
    switch (sigma.kind) {
        case netcore::ActivationKind::relu: return relu_coefficient(r);
        case netcore::ActivationKind::leaky_relu:
            return (r == 1 ? sigma.slope : 0.0) + (1.0 - sigma.slope) * relu_coefficient(r);
        default: return hermite_coefficient([&](double z) { return sigma(z); }, r, nodes);
    }
}

int choose_r(std::size_t n, double c) {
    if (!(c < 1.0)) fail(ErrorKind::validation, "overlap assumption violated: bound vacuous (overlap c >= 1)");
    if (n <= 1 || c <= 0.0) return 1;
    const double lead = static_cast<double>(n - 1);
    int r = 1;
    double power = c;
    while (!(lead * power < 1.0)) {
        ++r;
        power *= c;
    }
    return r;
}

LowerBound lambda_min_lower_bound(std::span<const Vec> inputs, double radius, const netcore::Activation& sigma) {
    if (inputs.empty()) fail(ErrorKind::validation, "lower bound needs at least one input");
    for (const auto& x : inputs)
        if (std::abs(x.norm() - 1.0) > 1e-10) fail(ErrorKind::validation, "lower bound needs unit-norm inputs");
    double max_inner = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        for (std::size_t j = 0; j < inputs.size(); ++j)
            if (i != j) max_inner = std::max(max_inner, std::abs(inputs[i].dot(inputs[j])));
    LowerBound b;
    b.overlap = inputs.size() > 1 ? max_inner + 2.0 * radius + radius * radius : 0.0;
    b.r = choose_r(inputs.size(), b.overlap);
    b.mu_r = hermite_coefficient(sigma, b.r);
    b.value = 2.0 * b.mu_r * b.mu_r *
              (1.0 - static_cast<double>(inputs.size() - 1) * std::pow(b.overlap, static_cast<double>(b.r)));
    return b;
}

}  // namespace robnas::kernels
