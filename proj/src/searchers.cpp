#include "robnas/searchers.hpp"

#include "robnas/error.hpp"
#include "robnas/log.hpp"
#include "robnas/types.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <numeric>
#include <set>

namespace robnas::searchers {

using benchstore::BenchStore;
using cellspace::Genotype;

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::random_search: return "random_search";
        case Algorithm::regularized_evolution: return "regularized_evolution";
        case Algorithm::local_search: return "local_search";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view text) {
    for (Algorithm a : {Algorithm::random_search, Algorithm::regularized_evolution, Algorithm::local_search})
        if (algorithm_name(a) == text) return a;
    fail(ErrorKind::validation, "unknown search algorithm: " + std::string(text));
}

void SearchConfig::validate() const {
    if (budget < 1) fail(ErrorKind::validation, "search budget must be >= 1");
    if (runs < 1) fail(ErrorKind::validation, "search runs must be >= 1");
    if (algorithm == Algorithm::regularized_evolution) {
        if (population_size < 1 || sample_size < 1)
            fail(ErrorKind::validation, "population_size and sample_size must be >= 1");
        if (population_size > budget) fail(ErrorKind::validation, "population_size must not exceed budget");
        if (sample_size > population_size) fail(ErrorKind::validation, "sample_size must not exceed population_size");
    }
}

BudgetedOracle::BudgetedOracle(const BenchStore& store, benchstore::Dataset dataset, std::string metric,
                               std::size_t budget)
    : store_(&store),
      dataset_(dataset),
      metric_(std::move(metric)),
      budget_(budget),
      available_(store.classes(dataset).size()),
      memo_(cellspace::space_census().forms.size(), 0.0),
      known_(cellspace::space_census().forms.size(), false) {
    if (available_ == 0)
        fail(ErrorKind::not_found, "benchmark store has no records for dataset " + benchstore::dataset_name(dataset));
}

bool BudgetedOracle::is_memoized(const Genotype& g) const { return known_[cellspace::class_id(g)]; }

bool BudgetedOracle::evaluate(const Genotype& g, double& value) {
    const std::uint32_t cls = cellspace::class_id(g);
    if (known_[cls]) {
        value = memo_[cls];
        return true;
    }
    if (exhausted()) return false;
    value = store_->lookup(g, dataset_, metric_).mean;
    memo_[cls] = value;
    known_[cls] = true;
    ++queries_;
    return true;
}

namespace {

std::size_t effective_budget(const SearchConfig& cfg) {
    if (cfg.budget > cellspace::kSpaceSize) {
        log_message(LogLevel::warning, "search budget " + std::to_string(cfg.budget) + " exceeds the space size; using " +
                                           std::to_string(cellspace::kSpaceSize));
        return cellspace::kSpaceSize;
    }
    return cfg.budget;
}

Genotype uniform_genotype(Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, cellspace::kSpaceSize - 1);
    return Genotype::from_index(pick(rng));
}

// Tracks the best charged evaluation and the best-so-far trajectory.
struct Tracker {
    BudgetedOracle& oracle;
    SearchResult result;
    bool any = false;

    bool evaluate(const Genotype& g, double& value) {
        const bool fresh = !oracle.is_memoized(g);
        if (!oracle.evaluate(g, value)) return false;
        if (fresh) {
            if (!any || value > result.best_value || (value == result.best_value && g < result.best)) {
                result.best = g;
                result.best_value = value;
                any = true;
            }
            result.trajectory.push_back(result.best_value);
        }
        return true;
    }
};

SearchResult finish(Tracker& t, const BenchStore& store, const SearchConfig& cfg) {
    SearchResult r = std::move(t.result);
    r.queries_used = t.oracle.queries();
    if (!t.any) return r;
    for (const auto& m : benchstore::kCoreMetrics) {
        try {
            r.metrics[m] = store.lookup(r.best, cfg.dataset, m).mean;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::not_found) throw;
        }
    }
    if (r.metrics.size() == benchstore::kCoreMetrics.size())
        r.metrics[std::string(benchstore::kRobustMean)] = store.lookup(r.best, cfg.dataset, benchstore::kRobustMean).mean;
    r.metrics[cfg.objective_metric] = r.best_value;
    return r;
}

}  // namespace

SearchResult random_search(const BenchStore& store, const SearchConfig& cfg) {
    cfg.validate();
    BudgetedOracle oracle(store, cfg.dataset, cfg.objective_metric, effective_budget(cfg));
    Tracker t{oracle, {}};
    Rng rng = make_rng(cfg.seed, "searchers.random_search");
    // Lazy Fisher-Yates over raw genotype indices: sampling without replacement.
    std::vector<std::uint32_t> pool(cellspace::kSpaceSize);
    std::iota(pool.begin(), pool.end(), 0U);
    for (std::size_t i = 0; i < pool.size() && !oracle.exhausted() && !oracle.covered(); ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
        double v = 0.0;
        t.evaluate(Genotype::from_index(pool[i]), v);
    }
    return finish(t, store, cfg);
}

SearchResult regularized_evolution(const BenchStore& store, const SearchConfig& cfg) {
    cfg.validate();
    const std::size_t budget = effective_budget(cfg);
    BudgetedOracle oracle(store, cfg.dataset, cfg.objective_metric, budget);
    Tracker t{oracle, {}};
    Rng rng = make_rng(cfg.seed, "searchers.regularized_evolution");
    std::deque<std::pair<Genotype, double>> population;
    const std::size_t draw_cap = 1000 * cellspace::kSpaceSize;
    for (std::size_t draws = 0; population.size() < cfg.population_size && draws < draw_cap; ++draws) {
        const Genotype g = uniform_genotype(rng);
        if (oracle.is_memoized(g) && !oracle.covered()) continue;
        double v = 0.0;
        if (!t.evaluate(g, v)) break;
        population.emplace_back(g, v);
    }
    // Memo hits are free, so a converged population can cycle without spending
    // budget; the cycle cap bounds that case.
    const std::size_t cycle_cap = 100 * budget;
    std::vector<std::size_t> slots(population.size());
    for (std::size_t cycle = 0; cycle < cycle_cap && !population.empty() && !oracle.exhausted() && !oracle.covered(); ++cycle) {
        std::iota(slots.begin(), slots.end(), std::size_t{0});
        const std::size_t k = std::min(cfg.sample_size, slots.size());
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, slots.size() - 1);
            std::swap(slots[i], slots[pick(rng)]);
        }
        std::size_t parent = slots[0];
        for (std::size_t i = 1; i < k; ++i) {
            const auto& cand = population[slots[i]];
            const auto& cur = population[parent];
            if (cand.second > cur.second || (cand.second == cur.second && cand.first < cur.first)) parent = slots[i];
        }
        const Genotype child = cellspace::mutate(population[parent].first, rng);
        t.result.mutations.emplace_back(population[parent].first, child);
        double v = 0.0;
        if (!t.evaluate(child, v)) break;
        population.emplace_back(child, v);
        population.pop_front();
    }
    return finish(t, store, cfg);
}

SearchResult local_search(const BenchStore& store, const SearchConfig& cfg) {
    cfg.validate();
    const std::size_t budget = effective_budget(cfg);
    BudgetedOracle oracle(store, cfg.dataset, cfg.objective_metric, budget);
    Tracker t{oracle, {}};
    Rng rng = make_rng(cfg.seed, "searchers.local_search");
    const std::size_t restart_cap = 100 * budget + 100000;
    for (std::size_t restart = 0; restart < restart_cap && !oracle.exhausted() && !oracle.covered(); ++restart) {
        Genotype cur = uniform_genotype(rng);
        double cur_v = 0.0;
        if (!t.evaluate(cur, cur_v)) break;
        bool stopped = false;
        while (true) {
            Genotype best_n;
            double best_v = 0.0;
            bool have = false;
            for (const Genotype& n : cellspace::neighbors(cur)) {
                double v = 0.0;
                if (!t.evaluate(n, v)) {
                    stopped = true;
                    break;
                }
                if (!have || v > best_v || (v == best_v && n < best_n)) {
                    best_n = n;
                    best_v = v;
                    have = true;
                }
            }
            if (stopped) break;
            if (best_v > cur_v) {
                cur = best_n;
                cur_v = best_v;
                continue;
            }
            t.result.completed_climbs.push_back(cur);
            break;
        }
        if (stopped) break;
    }
    // Report a completed climb's endpoint in place of an isomorphic first-seen member.
    if (t.any) {
        const std::uint32_t best_cls = cellspace::class_id(t.result.best);
        for (const Genotype& g : t.result.completed_climbs) {
            if (cellspace::class_id(g) == best_cls) {
                t.result.best = g;
                t.result.best_from_completed_climb = true;
                break;
            }
        }
    }
    return finish(t, store, cfg);
}

SearchResult run_search(const BenchStore& store, const SearchConfig& cfg) {
    switch (cfg.algorithm) {
        case Algorithm::random_search: return random_search(store, cfg);
        case Algorithm::regularized_evolution: return regularized_evolution(store, cfg);
        case Algorithm::local_search: return local_search(store, cfg);
    }
    fail(ErrorKind::usage, "unknown search algorithm");
}

ExhaustiveOptimum exhaustive_argmax(const BenchStore& store, benchstore::Dataset dataset, std::string_view metric) {
    ExhaustiveOptimum best;
    bool any = false;
    for (std::uint32_t cls : store.classes(dataset)) {
        const Genotype g = store.stored_genotype(cls, dataset);
        const double v = store.lookup(g, dataset, metric).mean;
        if (!any || v > best.value || (v == best.value && g < best.genotype)) {
            best.genotype = g;
            best.value = v;
            any = true;
        }
    }
    if (!any) fail(ErrorKind::not_found, "no records for dataset " + benchstore::dataset_name(dataset));
    for (const auto& m : benchstore::kCoreMetrics) {
        try {
            best.metrics[m] = store.lookup(best.genotype, dataset, m).mean;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::not_found) throw;
        }
    }
    best.metrics[std::string(metric)] = best.value;
    return best;
}

AggregateReport run_many(const BenchStore& store, const SearchConfig& cfg) {
    cfg.validate();
    AggregateReport rep;
    rep.algorithm = cfg.algorithm;
    rep.objective_metric = cfg.objective_metric;
    rep.runs = cfg.runs;
    std::map<std::string, std::size_t> counts;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        SearchConfig run_cfg = cfg;
        run_cfg.seed = substream_seed(cfg.seed, "searchers.run." + std::to_string(r));
        rep.results.push_back(run_search(store, run_cfg));
        for (const auto& [k, v] : rep.results.back().metrics) {
            rep.mean_metrics[k] += v;
            ++counts[k];
        }
    }
    for (auto& [k, v] : rep.mean_metrics) v /= static_cast<double>(counts[k]);
    return rep;
}

std::string table_csv_header() {
    std::string h = "algorithm,objective";
    for (const auto& m : benchstore::kCoreMetrics) h += "," + m;
    return h + "\n";
}

std::string table_csv_row(const std::string& label, const std::string& objective,
                          const std::map<std::string, double>& metrics) {
    std::string row = label + "," + objective;
    char buf[32];
    for (const auto& m : benchstore::kCoreMetrics) {
        row += ',';
        if (auto it = metrics.find(m); it != metrics.end()) {
            std::snprintf(buf, sizeof buf, "%.4f", it->second);
            row += buf;
        }
    }
    return row + "\n";
}

}  // namespace robnas::searchers
