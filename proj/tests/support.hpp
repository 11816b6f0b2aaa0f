#pragma once

#include "robnas/netcore.hpp"
#include "robnas/types.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace robnas::testing {

inline Vec random_vec(Eigen::Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

inline Vec gaussian_vec(Eigen::Index n, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Central difference of f at w along coordinate i with h = 1e-5 (1 + |w_i|).
template <class F>
double central_difference(const F& f, Vec w, Eigen::Index i) {
    const double h = 1e-5 * (1.0 + std::abs(w(i)));
    const double w0 = w(i);
    w(i) = w0 + h;
    const double up = f(w);
    w(i) = w0 - h;
    const double down = f(w);
    return (up - down) / (2.0 * h);
}

// Standard normal quantile: rational initial guess refined by Halley steps on erfc.
inline double inverse_normal_cdf(double u) {
    const double p = std::min(u, 1.0 - u);
    const double t = std::sqrt(-2.0 * std::log(p));
    double z = t - (2.515517 + 0.802853 * t + 0.010328 * t * t) / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    z = -z;  // quantile of p <= 0.5
    for (int i = 0; i < 3; ++i) {
        const double err = 0.5 * std::erfc(-z / std::sqrt(2.0)) - p;
        const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
        const double step = err / pdf;
        z -= step / (1.0 + 0.5 * z * step);
    }
    return u < 0.5 ? z : -z;
}

// Stratified Monte Carlo estimate of E[f(z)], z ~ N(0, 1): one uniform draw per
// equal-probability stratum.
template <class F>
void stratified_normal_mean(std::size_t strata, Rng& rng, F&& accumulate) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double n = static_cast<double>(strata);
    for (std::size_t i = 0; i < strata; ++i) {
        double v = (static_cast<double>(i) + u(rng)) / n;
        v = std::clamp(v, 1e-300, 1.0 - 1e-16);
        accumulate(inverse_normal_cdf(v));
    }
}

// Small random specs of every trainable family.
inline netcore::NetworkSpec random_spec(int index, Rng& rng) {
    using netcore::Activation;
    using netcore::ActivationKind;
    using netcore::Family;
    netcore::NetworkSpec s;
    std::uniform_int_distribution<int> pick(0, 1 << 20);
    const ActivationKind smooth[] = {ActivationKind::erf, ActivationKind::sigmoid, ActivationKind::relu,
                                     ActivationKind::leaky_relu};
    switch (index % 3) {
        case 0:
            s.family = Family::residual_fcnn;
            s.depth = 2 + pick(rng) % 3;
            s.width = 4 + pick(rng) % 6;
            s.input_dim = 2 + pick(rng) % 5;
            break;
        case 1:
            s.family = Family::residual_cnn;
            s.depth = 2 + pick(rng) % 3;
            s.width = 2 + pick(rng) % 3;
            s.input_dim = 1 + pick(rng) % 3;
            s.pixels = 3 + pick(rng) % 4;
            s.filter_size = (pick(rng) % 2) ? 3 : 1;
            break;
        default:
            s.family = Family::cell_network;
            s.genotype = cellspace::Genotype::from_index(static_cast<std::size_t>(pick(rng)) % cellspace::kSpaceSize);
            s.cell_count = 1 + pick(rng) % 2;
            s.stem_channels = 2 + pick(rng) % 2;
            s.in_channels = 1 + pick(rng) % 2;
            s.image_size = 3 + pick(rng) % 2;
            s.num_classes = 3;
            return s;
    }
    for (int l = 1; l < s.depth; ++l) {
        Activation a;
        a.kind = smooth[pick(rng) % 4];
        s.activations.push_back(a);
    }
    for (int l = 1; l <= s.depth - 2; ++l) s.skip_flags.push_back(pick(rng) % 2);
    return s;
}

}  // namespace robnas::testing
