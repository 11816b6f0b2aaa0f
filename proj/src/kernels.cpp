#include "robnas/kernels.hpp"

#include "robnas/config.hpp"
#include "robnas/error.hpp"

#include <cmath>

namespace robnas::kernels {

using netcore::NetworkSpec;
using netcore::WeightSet;

Mat jacobian(const NetworkSpec& spec, const WeightSet& weights, std::span<const Vec> inputs) {
    Mat j(static_cast<Eigen::Index>(inputs.size()), static_cast<Eigen::Index>(weights.parameter_count()));
    for (std::size_t i = 0; i < inputs.size(); ++i)
        j.row(static_cast<Eigen::Index>(i)) = netcore::gradient_wrt_weights(spec, weights, inputs[i]).transpose();
    return j;
}

Matrix empirical_ntk_gram(std::span<const Vec> inputs_a, std::span<const Vec> inputs_b, const NetworkSpec& spec,
                          const WeightSet& weights) {
    const Mat ja = jacobian(spec, weights, inputs_a);
    if (inputs_a.data() == inputs_b.data() && inputs_a.size() == inputs_b.size()) {
        Matrix g = ja * ja.transpose();
        return 0.5 * (g + g.transpose());
    }
    const Mat jb = jacobian(spec, weights, inputs_b);
    return ja * jb.transpose();
}

Matrix empirical_ntk_gram(std::span<const Vec> inputs_a, std::span<const Vec> inputs_b, const NetworkSpec& spec,
                          std::uint64_t seed) {
    return empirical_ntk_gram(inputs_a, inputs_b, spec, netcore::init_weights(spec, seed));
}

namespace {

void check_theory_inputs(std::span<const Vec> inputs, const adversary::AdversaryConfig& adversary) {
    if (adversary.norm != adversary::Norm::l2_sphere) return;
    for (const auto& x : inputs)
        if (std::abs(x.norm() - 1.0) > 1e-10)
            fail(ErrorKind::validation, "sphere-mode kernels need unit-norm inputs");
}

struct AttackedInputs {
    std::vector<Vec> once;
    std::vector<Vec> twice;
};

AttackedInputs attack_all(std::span<const Vec> inputs, std::span<const int> labels, const NetworkSpec& spec,
                          const WeightSet& w, const adversary::AdversaryConfig& adversary, bool need_twice) {
    if (labels.size() != inputs.size()) fail(ErrorKind::validation, "labels and inputs differ in length");
    AttackedInputs out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        out.once.push_back(adversary::pgd(inputs[i], labels[i], spec, w, adversary));
        if (need_twice) out.twice.push_back(adversary::pgd(out.once.back(), labels[i], spec, w, adversary));
    }
    return out;
}

}  // namespace

KernelSet build_kernel_set(std::span<const Vec> inputs, std::span<const int> labels, const NetworkSpec& spec,
                           std::uint64_t seed, const adversary::AdversaryConfig& adversary, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorKind::validation, "beta must lie in [0, 1]");
    check_theory_inputs(inputs, adversary);
    const WeightSet w = netcore::init_weights(spec, seed);
    const AttackedInputs att = attack_all(inputs, labels, spec, w, adversary, true);
    const Mat j = jacobian(spec, w, inputs);
    const Mat jh = jacobian(spec, w, att.once);
    const Mat jhh = jacobian(spec, w, att.twice);
    KernelSet ks;
    auto sym = [](const Matrix& g) -> Matrix { return 0.5 * (g + g.transpose()); };
    ks.clean = sym(j * j.transpose());
    ks.cross = j * jh.transpose();
    ks.robust = sym(jh * jh.transpose());
    ks.cross_twice = jh * jhh.transpose();
    ks.robust_twice = sym(jhh * jhh.transpose());
    ks.beta = beta;
    ks.radius = adversary.radius;
    ks.provenance =
        config::json{{"spec", config::to_json(spec)}, {"seed", seed}, {"adversary", config::to_json(adversary)}}.dump();
    return ks;
}

namespace {

Matrix mix(const Matrix& a, const Matrix& cross, const Matrix& b, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorKind::validation, "beta must lie in [0, 1]");
    // Endpoints are returned verbatim so they match the component kernels bitwise.
    if (beta == 0.0) return a;
    if (beta == 1.0) return b;
    const double c = 1.0 - beta;
    Matrix out = (c * c) * a + (beta * c) * (cross + cross.transpose()) + (beta * beta) * b;
    return 0.5 * (out + out.transpose());
}

}  // namespace

Matrix assemble_clean_kernel(const KernelSet& ks) { return mix(ks.clean, ks.cross, ks.robust, ks.beta); }

Matrix assemble_robust_kernel(const KernelSet& ks) {
    return mix(ks.robust, ks.cross_twice, ks.robust_twice, ks.beta);
}

std::string score_variant_name(ScoreVariant v) {
    switch (v) {
        case ScoreVariant::clean: return "clean";
        case ScoreVariant::robust: return "robust";
        case ScoreVariant::robust_twice: return "robust_twice";
    }
    return "?";
}

double gram_score(const Matrix& gram, ScoreAggregate aggregate) {
    return aggregate == ScoreAggregate::frobenius ? gram.norm() : gram.trace();
}

double ntk_score(const NetworkSpec& spec, std::span<const Vec> inputs, std::span<const int> labels,
                 std::uint64_t seed, ScoreVariant variant, const adversary::AdversaryConfig& adversary,
                 ScoreAggregate aggregate) {
    const WeightSet w = netcore::init_weights(spec, seed);
    if (variant == ScoreVariant::clean) {
        const Mat j = jacobian(spec, w, inputs);
        return gram_score(j * j.transpose(), aggregate);
    }
    check_theory_inputs(inputs, adversary);
    const AttackedInputs att = attack_all(inputs, labels, spec, w, adversary, variant == ScoreVariant::robust_twice);
    const Mat j = jacobian(spec, w, variant == ScoreVariant::robust ? att.once : att.twice);
    return gram_score(j * j.transpose(), aggregate);
}

double lambda_min_exact(const Matrix& m) {
    if (m.rows() != m.cols()) fail(ErrorKind::validation, "lambda_min needs a square matrix");
    if (!m.allFinite()) fail(ErrorKind::numerical, "lambda_min: matrix has non-finite entries");
    const Matrix s = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(s, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) fail(ErrorKind::numerical, "lambda_min: eigensolver failed");
    return solver.eigenvalues()(0);
}

QuadraticForm inverse_quadratic_form(const Matrix& m, const Vec& y) {
    if (m.rows() != m.cols() || m.rows() != y.size()) fail(ErrorKind::validation, "kernel/label size mismatch");
    if (!m.allFinite()) fail(ErrorKind::numerical, "kernel has non-finite entries");
    const Matrix s = 0.5 * (m + m.transpose());
    const Eigen::Index n = s.rows();
    for (double jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
        Eigen::LLT<Matrix> llt(s + jitter * Matrix::Identity(n, n));
        if (llt.info() != Eigen::Success) continue;
        const Vec v = llt.solve(y);
        if (!v.allFinite()) continue;
        return {y.dot(v), jitter};
    }
    fail(ErrorKind::numerical, "kernel numerically singular after jitter 1e-6; lambda_min = " +
                                   std::to_string(lambda_min_exact(s)));
}

BoundReport generalization_bound_terms(const Matrix& k_all, const Matrix& k_tilde_all, const Vec& y, int depth,
                                       double delta) {
    const auto n = static_cast<double>(y.size());
    if (y.size() == 0) fail(ErrorKind::validation, "bound needs at least one label");
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y(i) != 1.0 && y(i) != -1.0) fail(ErrorKind::validation, "labels must be +1 or -1");
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::validation, "delta must lie in (0, 1)");
    const double l2 = static_cast<double>(depth) * depth;
    BoundReport r;
    const QuadraticForm qc = inverse_quadratic_form(k_all, y);
    const QuadraticForm qr = inverse_quadratic_form(k_tilde_all, y);
    r.clean_quadratic = qc.value;
    r.robust_quadratic = qr.value;
    r.clean_jitter = qc.jitter;
    r.robust_jitter = qr.jitter;
    r.clean_bound_main = std::sqrt(l2 * r.clean_quadratic / n);
    r.robust_bound_main = std::sqrt(l2 * r.robust_quadratic / n);
    r.lambda_min_clean = lambda_min_exact(k_all);
    r.lambda_min_robust = lambda_min_exact(k_tilde_all);
    const double yy = y.squaredNorm();
    r.clean_courant = yy / r.lambda_min_clean;
    r.robust_courant = yy / r.lambda_min_robust;
    r.clean_bound_courant = std::sqrt(l2 * r.clean_courant / n);
    r.robust_bound_courant = std::sqrt(l2 * r.robust_courant / n);
    r.confidence_term = std::sqrt(std::log(1.0 / delta) / n);
    return r;
}

std::string BoundReport::to_json() const {
    config::json j{{"schema", "robnas.bound.v1"},
                   {"clean_quadratic", clean_quadratic},
                   {"robust_quadratic", robust_quadratic},
                   {"clean_bound_main", clean_bound_main},
                   {"robust_bound_main", robust_bound_main},
                   {"lambda_min_clean", lambda_min_clean},
                   {"lambda_min_robust", lambda_min_robust},
                   {"clean_courant", clean_courant},
                   {"robust_courant", robust_courant},
                   {"clean_bound_courant", clean_bound_courant},
                   {"robust_bound_courant", robust_bound_courant},
                   {"confidence_term", confidence_term},
                   {"clean_jitter", clean_jitter},
                   {"robust_jitter", robust_jitter}};
    return j.dump(2);
}

}  // namespace robnas::kernels
