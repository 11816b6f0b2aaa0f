#pragma once

#include "robnas/types.hpp"

#include <cmath>

namespace robnas {

// log(1 + exp(-z)) without overflow for large |z|.
inline double logistic_loss(double z) {
    if (z > 0) return std::log1p(std::exp(-z));
    return -z + std::log1p(std::exp(z));
}

// d/dz log(1 + exp(-z)) = -1 / (1 + exp(z)).
inline double logistic_loss_derivative(double z) {
    if (z > 0) {
        const double e = std::exp(-z);
        return -e / (1.0 + e);
    }
    return -1.0 / (1.0 + std::exp(z));
}

struct SoftmaxXent {
    double loss;
    Vec dlogits;
};

inline SoftmaxXent softmax_cross_entropy(const Vec& logits, int label) {
    const double shift = logits.maxCoeff();
    Vec p = (logits.array() - shift).exp();
    const double z = p.sum();
    p /= z;
    SoftmaxXent out{std::log(z) + shift - logits(label), p};
    out.dlogits(label) -= 1.0;
    return out;
}

}  // namespace robnas
