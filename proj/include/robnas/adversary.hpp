#pragma once

#include "robnas/netcore.hpp"
#include "robnas/types.hpp"

#include <functional>
#include <optional>
#include <string>

namespace robnas::adversary {

enum class AttackKind { fgsm, pgd };
enum class Norm {
    l_inf,      // empirical mode: sign steps, box projection, data-range clamp
    l2_sphere,  // theory mode: normalized-gradient steps, inputs kept on the unit sphere
};

struct DataRange {
    double lo = 0.0;
    double hi = 1.0;
};

struct AdversaryConfig {
    AttackKind kind = AttackKind::pgd;
    double radius = 0.0;
    int steps = 1;
    double step_size = 0.0;
    Norm norm = Norm::l_inf;
    std::optional<DataRange> clamp;
    bool random_start = false;
    std::uint64_t seed = 0;  // only consumed when random_start is set

    void validate() const;

    static AdversaryConfig fgsm(double radius, std::optional<DataRange> clamp = DataRange{});
    static AdversaryConfig pgd(double radius, int steps, double step_size, Norm norm = Norm::l_inf,
                               std::optional<DataRange> clamp = DataRange{});
    // Adversarial training: PGD-7, step 2/255, radius 8/255, l_inf, [0, 1].
    static AdversaryConfig training_preset();
    // Robust evaluation: PGD-20 with step 2.5 * radius / 20.
    static AdversaryConfig evaluation_pgd(double radius);
    static AdversaryConfig evaluation_fgsm(double radius);
};

std::string attack_kind_name(AttackKind k);
std::string norm_name(Norm n);
AttackKind parse_attack_kind(const std::string& text);
Norm parse_norm(const std::string& text);

// Loss and its gradient with respect to the input, for a fixed label and weights.
using InputLoss = std::function<netcore::LossGradient(const Vec&)>;

InputLoss model_loss(const netcore::NetworkSpec& spec, const netcore::WeightSet& weights, int label);

Vec normalize_input(const Vec& x);

Vec project(const Vec& point, const Vec& center, double radius, Norm norm, const std::optional<DataRange>& clamp);

// Generic projected ascent on an arbitrary differentiable loss.
Vec attack(const InputLoss& loss, const Vec& x, const AdversaryConfig& cfg);

Vec fgsm(const Vec& x, int label, const netcore::NetworkSpec& spec, const netcore::WeightSet& weights, double radius,
         const std::optional<DataRange>& clamp);
Vec pgd(const Vec& x, int label, const netcore::NetworkSpec& spec, const netcore::WeightSet& weights,
        const AdversaryConfig& cfg);
// Attack, then attack again centred at the first result with the same config.
Vec twice_perturb(const Vec& x, int label, const netcore::NetworkSpec& spec, const netcore::WeightSet& weights,
                  const AdversaryConfig& cfg);

}  // namespace robnas::adversary
