#pragma once

#include "robnas/benchstore.hpp"
#include "robnas/cellspace.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace robnas::searchers {

enum class Algorithm { random_search, regularized_evolution, local_search };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

struct SearchConfig {
    Algorithm algorithm = Algorithm::random_search;
    std::size_t budget = 150;
    std::size_t runs = 100;
    std::string objective_metric = "clean";
    benchstore::Dataset dataset = benchstore::Dataset::synthetic;
    std::uint64_t seed = 0;
    std::size_t population_size = 20;
    std::size_t sample_size = 10;

    void validate() const;
};

// Per-run look-up oracle. Only the first evaluation of a canonical class is
// charged against the budget; repeats are served from the memo.
class BudgetedOracle {
public:
    BudgetedOracle(const benchstore::BenchStore& store, benchstore::Dataset dataset, std::string metric,
                   std::size_t budget);

    // False when the class is new and the budget is spent.
    bool evaluate(const cellspace::Genotype& g, double& value);
    [[nodiscard]] bool is_memoized(const cellspace::Genotype& g) const;
    [[nodiscard]] std::size_t queries() const { return queries_; }
    [[nodiscard]] std::size_t budget() const { return budget_; }
    [[nodiscard]] bool exhausted() const { return queries_ >= budget_; }
    // Every class the store holds has been evaluated.
    [[nodiscard]] bool covered() const { return queries_ >= available_; }

private:
    const benchstore::BenchStore* store_;
    benchstore::Dataset dataset_;
    std::string metric_;
    std::size_t budget_;
    std::size_t available_;
    std::size_t queries_ = 0;
    std::vector<double> memo_;
    std::vector<bool> known_;
};

struct SearchResult {
    cellspace::Genotype best;
    double best_value = 0.0;
    std::size_t queries_used = 0;
    std::map<std::string, double> metrics;  // every recorded metric of the best class
    std::vector<double> trajectory;         // best-so-far after each charged query
    std::vector<cellspace::Genotype> completed_climbs;  // local search optima
    bool best_from_completed_climb = false;
    std::vector<std::pair<cellspace::Genotype, cellspace::Genotype>> mutations;  // evolution parent -> child

    bool operator==(const SearchResult&) const = default;
};

SearchResult random_search(const benchstore::BenchStore& store, const SearchConfig& cfg);
SearchResult regularized_evolution(const benchstore::BenchStore& store, const SearchConfig& cfg);
SearchResult local_search(const benchstore::BenchStore& store, const SearchConfig& cfg);
SearchResult run_search(const benchstore::BenchStore& store, const SearchConfig& cfg);

struct ExhaustiveOptimum {
    cellspace::Genotype genotype;
    double value = 0.0;
    std::map<std::string, double> metrics;
};

// Argmax of `metric` over every stored class; ties go to the smaller genotype.
ExhaustiveOptimum exhaustive_argmax(const benchstore::BenchStore& store, benchstore::Dataset dataset,
                                    std::string_view metric);

struct AggregateReport {
    Algorithm algorithm = Algorithm::random_search;
    std::string objective_metric;
    std::size_t runs = 0;
    std::map<std::string, double> mean_metrics;  // mean over runs of the best genotype's metrics
    std::vector<SearchResult> results;
};

// Run r uses seed substream "searchers.run.<r>" of cfg.seed.
AggregateReport run_many(const benchstore::BenchStore& store, const SearchConfig& cfg);

// Columns: algorithm, objective, then the five table metrics.
std::string table_csv_header();
std::string table_csv_row(const std::string& label, const std::string& objective,
                          const std::map<std::string, double>& metrics);

}  // namespace robnas::searchers
