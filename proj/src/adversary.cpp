#include "robnas/adversary.hpp"

#include "robnas/error.hpp"

#include <algorithm>
#include <cmath>

namespace robnas::adversary {

void AdversaryConfig::validate() const {
    auto bad = [](const std::string& why) { fail(ErrorKind::validation, "invalid adversary config: " + why); };
    if (!(radius >= 0.0)) bad("radius must be >= 0");
    if (steps < 1) bad("steps must be >= 1");
    if (!(step_size > 0.0) && radius > 0.0) bad("step_size must be > 0");
    if (kind == AttackKind::fgsm && (steps != 1 || step_size != radius))
        bad("fgsm requires steps = 1 and step_size = radius");
    if (norm == Norm::l2_sphere && clamp) bad("l2_sphere mode does not take a data-range clamp");
    if (clamp && !(clamp->lo <= clamp->hi)) bad("clamp lo must be <= hi");
}

AdversaryConfig AdversaryConfig::fgsm(double radius, std::optional<DataRange> clamp) {
    AdversaryConfig c;
    c.kind = AttackKind::fgsm;
    c.radius = radius;
    c.steps = 1;
    c.step_size = radius;
    c.clamp = clamp;
    return c;
}

AdversaryConfig AdversaryConfig::pgd(double radius, int steps, double step_size, Norm norm,
                                     std::optional<DataRange> clamp) {
    AdversaryConfig c;
    c.kind = AttackKind::pgd;
    c.radius = radius;
    c.steps = steps;
    c.step_size = step_size;
    c.norm = norm;
    c.clamp = norm == Norm::l2_sphere ? std::nullopt : clamp;
    return c;
}

AdversaryConfig AdversaryConfig::training_preset() { return pgd(8.0 / 255.0, 7, 2.0 / 255.0); }

AdversaryConfig AdversaryConfig::evaluation_pgd(double radius) { return pgd(radius, 20, 2.5 * radius / 20.0); }

AdversaryConfig AdversaryConfig::evaluation_fgsm(double radius) { return fgsm(radius); }

std::string attack_kind_name(AttackKind k) { return k == AttackKind::fgsm ? "fgsm" : "pgd"; }
std::string norm_name(Norm n) { return n == Norm::l_inf ? "l_inf" : "l2_sphere"; }

AttackKind parse_attack_kind(const std::string& text) {
    if (text == "fgsm") return AttackKind::fgsm;
    if (text == "pgd") return AttackKind::pgd;
    fail(ErrorKind::validation, "unknown attack kind: " + text);
}

Norm parse_norm(const std::string& text) {
    if (text == "l_inf") return Norm::l_inf;
    if (text == "l2_sphere") return Norm::l2_sphere;
    fail(ErrorKind::validation, "unknown attack norm: " + text);
}

InputLoss model_loss(const netcore::NetworkSpec& spec, const netcore::WeightSet& weights, int label) {
    return [&spec, &weights, label](const Vec& x) { return netcore::loss_gradient_wrt_input(spec, weights, x, label); };
}

Vec normalize_input(const Vec& x) {
    const double n = x.norm();
    if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorKind::validation, "cannot normalize a zero or non-finite input");
    return x / n;
}

namespace {

// Projection onto the spherical cap {u : |u| = 1, |u - c| <= r} for a unit centre c.
Vec onto_sphere_cap(const Vec& point, const Vec& center, double radius) {
    const double n = point.norm();
    if (!(n > 0.0)) return center;
    Vec u = point / n;
    if (radius >= 2.0 || (u - center).norm() <= radius) return u;
    Vec tangent = u - u.dot(center) * center;
    const double tn = tangent.norm();
    if (!(tn > 0.0)) return center;
    tangent /= tn;
    // |cos(t) c + sin(t) e - c|^2 = 2 - 2 cos(t) = r^2.
    double t = std::acos(std::clamp(1.0 - 0.5 * radius * radius, -1.0, 1.0));
    Vec out = std::cos(t) * center + std::sin(t) * tangent;
    for (int i = 0; i < 64 && (out - center).norm() > radius; ++i) {
        t *= 1.0 - 1e-12;
        out = std::cos(t) * center + std::sin(t) * tangent;
    }
    return out;
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

Vec project(const Vec& point, const Vec& center, double radius, Norm norm, const std::optional<DataRange>& clamp) {
    if (!(radius >= 0.0)) fail(ErrorKind::validation, "projection radius must be >= 0");
    if (point.size() != center.size()) fail(ErrorKind::validation, "projection point/centre size mismatch");
    if (norm == Norm::l_inf) {
        Vec out = point.array().max(center.array() - radius).min(center.array() + radius).matrix();
        if (clamp) out = out.cwiseMax(clamp->lo).cwiseMin(clamp->hi);
        return out;
    }
    Vec out = point;
    const Vec delta = point - center;
    const double dn = delta.norm();
    if (dn > radius) out = center + delta * (radius / dn);
    return onto_sphere_cap(out, center, radius);
}

Vec attack(const InputLoss& loss, const Vec& x, const AdversaryConfig& cfg) {
    cfg.validate();
    if (cfg.radius == 0.0) return x;
    Vec cur = x;
    if (cfg.random_start) {
        Rng rng = make_rng(cfg.seed, "adversary.random_start");
        if (cfg.norm == Norm::l_inf) {
            std::uniform_real_distribution<double> u(-cfg.radius, cfg.radius);
            for (Eigen::Index i = 0; i < cur.size(); ++i) cur(i) += u(rng);
        } else {
            std::normal_distribution<double> g(0.0, 1.0);
            Vec dir(cur.size());
            for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = g(rng);
            std::uniform_real_distribution<double> r(0.0, cfg.radius);
            cur += r(rng) * dir.normalized();
        }
        cur = project(cur, x, cfg.radius, cfg.norm, cfg.clamp);
    }
    for (int t = 0; t < cfg.steps; ++t) {
        const Vec grad = loss(cur).gradient;
        Vec step;
        if (cfg.norm == Norm::l_inf) {
            step = grad.unaryExpr([](double v) { return sign(v); });
        } else {
            const double gn = grad.norm();
            step = gn > 0.0 ? Vec(grad / gn) : Vec::Zero(grad.size());
        }
        cur = project(cur + cfg.step_size * step, x, cfg.radius, cfg.norm, cfg.clamp);
    }
    return cur;
}

Vec fgsm(const Vec& x, int label, const netcore::NetworkSpec& spec, const netcore::WeightSet& weights, double radius,
         const std::optional<DataRange>& clamp) {
    return attack(model_loss(spec, weights, label), x, AdversaryConfig::fgsm(radius, clamp));
}

Vec pgd(const Vec& x, int label, const netcore::NetworkSpec& spec, const netcore::WeightSet& weights,
        const AdversaryConfig& cfg) {
    return attack(model_loss(spec, weights, label), x, cfg);
}

Vec twice_perturb(const Vec& x, int label, const netcore::NetworkSpec& spec, const netcore::WeightSet& weights,
                  const AdversaryConfig& cfg) {
    const InputLoss loss = model_loss(spec, weights, label);
    return attack(loss, attack(loss, x, cfg), cfg);
}

}  // namespace robnas::adversary
