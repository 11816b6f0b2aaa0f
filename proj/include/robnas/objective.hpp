#pragma once

#include "robnas/adversary.hpp"
#include "robnas/loss.hpp"
#include "robnas/netcore.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace robnas::objective {

struct LabeledSample {
    Vec x;
    int label = 1;  // +1/-1 for binary networks, class index for cell networks
};

struct RiskTerms {
    double total = 0.0;
    double clean = 0.0;
    double robust = 0.0;
};

// total = (1 - beta) * mean clean loss + beta * mean loss on attacked inputs.
RiskTerms mixed_empirical_risk(std::span<const LabeledSample> samples, const netcore::NetworkSpec& spec,
                               const netcore::WeightSet& weights, double beta,
                               const adversary::AdversaryConfig& adversary);

enum class TrainMode { algorithm1_online, minibatch_recipe };

struct RecipeConfig {
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_size = 256;
    int epochs = 50;
    double base_lr = 0.05;
    double peak_lr = 0.1;
    double warmup_fraction = 0.3;
};

struct TrainConfig {
    double beta = 1.0;
    double step_size = 0.1;  // gamma, online mode
    int iterations = 100;    // N, online mode
    adversary::AdversaryConfig adversary = adversary::AdversaryConfig::training_preset();
    TrainMode mode = TrainMode::algorithm1_online;
    RecipeConfig recipe;
    std::uint64_t seed = 0;

    void validate() const;
};

// Draws one fresh labelled sample per call.
using SampleStream = std::function<LabeledSample(Rng&)>;

struct OnlineStep {
    double clean_loss = 0.0;
    double robust_loss = 0.0;
};

struct OnlineResult {
    netcore::WeightSet selected;     // W-bar
    std::size_t selected_index = 0;  // 1-based index into W(1)..W(N)
    netcore::WeightSet final_weights;
    std::vector<OnlineStep> steps;
};

// W <- W - gamma (1 - beta) grad l(y f(x, W)) - gamma beta grad l(y f(A(x, W), W))
netcore::WeightSet multiobjective_step(const netcore::NetworkSpec& spec, const netcore::WeightSet& weights,
                                       const LabeledSample& sample, double beta, double step_size,
                                       const adversary::AdversaryConfig& adversary, OnlineStep* losses = nullptr);

// Online multi-objective SGD with one fresh sample per step; returns a uniformly
// chosen iterate among W(1)..W(N).
OnlineResult sgd_multiobjective(const SampleStream& stream, const netcore::NetworkSpec& spec,
                                const netcore::WeightSet& initial, const TrainConfig& cfg);

// Linear warm-up from base to peak over warmup_fraction, then linear decay to 0.
double one_cycle_lr(double progress, const RecipeConfig& recipe);

struct EpochMetrics {
    int epoch = 0;
    double lr = 0.0;
    double clean_accuracy = 0.0;
    double robust_accuracy = 0.0;
    double clean_loss = 0.0;
    double robust_loss = 0.0;
    double total_loss = 0.0;
};

struct RecipeResult {
    netcore::WeightSet weights;
    std::vector<EpochMetrics> history;
};

// Mini-batch SGD with momentum and weight decay under a one-cycle schedule,
// mixing clean and attacked losses with beta.
RecipeResult train_recipe(std::span<const LabeledSample> data, const netcore::NetworkSpec& spec,
                          const netcore::WeightSet& initial, const TrainConfig& cfg);

std::string history_csv(const std::vector<EpochMetrics>& history);

enum class TieRule {
    sign_indicator,     // y f = 0 counts as correct: error is 1{y f < 0}
    alternating_half,    // successive ties alternate correct/incorrect
};

double evaluate_accuracy(const netcore::NetworkSpec& spec, const netcore::WeightSet& weights,
                         std::span<const LabeledSample> eval_set,
                         const std::optional<adversary::AdversaryConfig>& attack = std::nullopt,
                         TieRule ties = TieRule::sign_indicator);

}  // namespace robnas::objective
