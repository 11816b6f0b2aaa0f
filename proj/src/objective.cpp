#include "robnas/objective.hpp"

#include "robnas/error.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace robnas::objective {

using netcore::NetworkSpec;
using netcore::WeightSet;

namespace {

void check_beta(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorKind::validation, "beta must lie in [0, 1]");
}

}  // namespace

void TrainConfig::validate() const {
    check_beta(beta);
    if (!(step_size > 0.0)) fail(ErrorKind::validation, "step size must be > 0");
    if (iterations < 1 && mode == TrainMode::algorithm1_online) fail(ErrorKind::validation, "iterations must be >= 1");
    if (recipe.epochs < 0 || recipe.batch_size < 1) fail(ErrorKind::validation, "invalid recipe epochs/batch size");
    if (!(recipe.warmup_fraction > 0.0 && recipe.warmup_fraction < 1.0))
        fail(ErrorKind::validation, "warmup fraction must lie in (0, 1)");
    adversary.validate();
}

RiskTerms mixed_empirical_risk(std::span<const LabeledSample> samples, const NetworkSpec& spec,
                               const WeightSet& weights, double beta, const adversary::AdversaryConfig& adversary) {
    check_beta(beta);
    if (samples.empty()) fail(ErrorKind::validation, "empirical risk over an empty sample set");
    RiskTerms r;
    for (const auto& s : samples) {
        r.clean += netcore::sample_loss(spec, weights, s.x, s.label);
        const Vec attacked = adversary::pgd(s.x, s.label, spec, weights, adversary);
        r.robust += netcore::sample_loss(spec, weights, attacked, s.label);
    }
    r.clean /= static_cast<double>(samples.size());
    r.robust /= static_cast<double>(samples.size());
    r.total = (1.0 - beta) * r.clean + beta * r.robust;
    return r;
}

WeightSet multiobjective_step(const NetworkSpec& spec, const WeightSet& weights, const LabeledSample& sample,
                              double beta, double step_size, const adversary::AdversaryConfig& adversary,
                              OnlineStep* losses) {
    check_beta(beta);
    const auto clean = netcore::loss_gradient_wrt_weights(spec, weights, sample.x, sample.label);
    const Vec attacked = adversary::pgd(sample.x, sample.label, spec, weights, adversary);
    const auto robust = netcore::loss_gradient_wrt_weights(spec, weights, attacked, sample.label);
    if (losses) *losses = {clean.loss, robust.loss};
    const Vec w = weights.flatten();
    const Vec next = w - step_size * (1.0 - beta) * clean.gradient - step_size * beta * robust.gradient;
    return weights.with_flat(next);
}

OnlineResult sgd_multiobjective(const SampleStream& stream, const NetworkSpec& spec, const WeightSet& initial,
                                const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.mode != TrainMode::algorithm1_online) fail(ErrorKind::validation, "sgd_multiobjective needs online mode");
    netcore::check_weights(spec, initial);
    Rng data_rng = make_rng(cfg.seed, "objective.stream");
    Rng pick_rng = make_rng(cfg.seed, "objective.select");
    // Draw the output index up front so only one iterate has to be retained.
    std::uniform_int_distribution<std::size_t> pick(1, static_cast<std::size_t>(cfg.iterations));
    OnlineResult out;
    out.selected_index = pick(pick_rng);
    WeightSet w = initial;
    for (std::size_t i = 1; i <= static_cast<std::size_t>(cfg.iterations); ++i) {
        if (i == out.selected_index) out.selected = w;
        const LabeledSample s = stream(data_rng);
        OnlineStep losses;
        w = multiobjective_step(spec, w, s, cfg.beta, cfg.step_size, cfg.adversary, &losses);
        out.steps.push_back(losses);
    }
    out.final_weights = std::move(w);
    return out;
}

double one_cycle_lr(double progress, const RecipeConfig& r) {
    progress = std::clamp(progress, 0.0, 1.0);
    const double w = r.warmup_fraction;
    if (progress <= w) return r.base_lr + (r.peak_lr - r.base_lr) * (progress / w);
    return r.peak_lr * (1.0 - progress) / (1.0 - w);
}

double evaluate_accuracy(const NetworkSpec& spec, const WeightSet& weights, std::span<const LabeledSample> eval_set,
                         const std::optional<adversary::AdversaryConfig>& attack, TieRule ties) {
    if (eval_set.empty()) fail(ErrorKind::validation, "accuracy over an empty evaluation set");
    double correct = 0.0;
    std::size_t tie_count = 0;
    for (const auto& s : eval_set) {
        const Vec x = attack ? adversary::pgd(s.x, s.label, spec, weights, *attack) : s.x;
        if (netcore::is_binary(spec)) {
            const double margin = s.label * netcore::scalar_output(spec, weights, x);
            if (margin > 0.0) {
                correct += 1.0;
            } else if (margin == 0.0) {
                if (ties == TieRule::sign_indicator || tie_count % 2 == 0) correct += 1.0;
                ++tie_count;
            }
        } else if (netcore::predict_class(spec, weights, x) == s.label) {
            correct += 1.0;
        }
    }
    return correct / static_cast<double>(eval_set.size());
}

RecipeResult train_recipe(std::span<const LabeledSample> data, const NetworkSpec& spec, const WeightSet& initial,
                          const TrainConfig& cfg) {
    cfg.validate();
    netcore::check_weights(spec, initial);
    RecipeResult out{initial, {}};
    if (cfg.recipe.epochs == 0 || data.empty()) return out;

    const std::size_t n = data.size();
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.recipe.batch_size), n);
    const std::size_t batches_per_epoch = (n + batch - 1) / batch;
    const double total_steps = static_cast<double>(batches_per_epoch) * cfg.recipe.epochs;

    Rng rng = make_rng(cfg.seed, "objective.recipe.shuffle");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Vec w = initial.flatten();
    Vec velocity = Vec::Zero(w.size());
    std::size_t step = 0;
    double lr = 0.0;

    for (int epoch = 1; epoch <= cfg.recipe.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochMetrics m;
        m.epoch = epoch;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const WeightSet current = initial.with_flat(w);
            Vec grad = Vec::Zero(w.size());
            const std::size_t begin = b * batch;
            const std::size_t end = std::min(n, begin + batch);
            for (std::size_t k = begin; k < end; ++k) {
                const LabeledSample& s = data[order[k]];
                const auto clean = netcore::loss_gradient_wrt_weights(spec, current, s.x, s.label);
                grad += (1.0 - cfg.beta) * clean.gradient;
                m.clean_loss += clean.loss;
                if (cfg.beta > 0.0) {
                    const Vec attacked = adversary::pgd(s.x, s.label, spec, current, cfg.adversary);
                    const auto robust = netcore::loss_gradient_wrt_weights(spec, current, attacked, s.label);
                    grad += cfg.beta * robust.gradient;
                    m.robust_loss += robust.loss;
                }
            }
            grad /= static_cast<double>(end - begin);
            grad += cfg.recipe.weight_decay * w;
            lr = one_cycle_lr(static_cast<double>(step) / total_steps, cfg.recipe);
            velocity = cfg.recipe.momentum * velocity + grad;
            w -= lr * velocity;
            ++step;
        }
        m.lr = lr;
        m.clean_loss /= static_cast<double>(n);
        m.robust_loss /= static_cast<double>(n);
        m.total_loss = (1.0 - cfg.beta) * m.clean_loss + cfg.beta * m.robust_loss;
        const WeightSet current = initial.with_flat(w);
        m.clean_accuracy = evaluate_accuracy(spec, current, data);
        m.robust_accuracy = evaluate_accuracy(spec, current, data, cfg.adversary);
        out.history.push_back(m);
    }
    out.weights = initial.with_flat(w);
    return out;
}

std::string history_csv(const std::vector<EpochMetrics>& history) {
    std::ostringstream os;
    os.precision(10);
    os << "epoch,lr,clean_acc,robust_acc,clean_loss,robust_loss,total_loss\n";
    for (const auto& m : history)
        os << m.epoch << ',' << m.lr << ',' << m.clean_accuracy << ',' << m.robust_accuracy << ',' << m.clean_loss
           << ',' << m.robust_loss << ',' << m.total_loss << '\n';
    return os.str();
}

}  // namespace robnas::objective
