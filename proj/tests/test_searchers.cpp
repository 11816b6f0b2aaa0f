#include <doctest.h>

#include "robnas/error.hpp"
#include "robnas/searchers.hpp"

#include <chrono>
#include <set>

using namespace robnas;
using namespace robnas::searchers;
using benchstore::BenchStore;
using benchstore::Dataset;
using benchstore::Landscape;
using cellspace::Genotype;

namespace {

const BenchStore& unimodal() {
    static const BenchStore s = benchstore::synthesize_benchmark(1, Landscape::unimodal_conv_count);
    return s;
}

const BenchStore& rugged() {
    static const BenchStore s = benchstore::synthesize_benchmark(2, Landscape::rugged_random);
    return s;
}

double value_of(const BenchStore& s, const Genotype& g, const std::string& metric = "clean") {
    return s.lookup(g, Dataset::synthetic, metric).mean;
}

// Classes with no strictly better neighbor, by scanning the whole space.
std::set<std::uint32_t> brute_force_local_optima(const BenchStore& s) {
    std::set<std::uint32_t> out;
    for (const auto& g : cellspace::enumerate_genotypes()) {
        const double v = value_of(s, g);
        bool improvable = false;
        for (const auto& n : cellspace::neighbors(g)) improvable = improvable || value_of(s, n) > v;
        if (!improvable) out.insert(cellspace::class_id(g));
    }
    return out;
}

SearchConfig config(Algorithm a, std::uint64_t seed, std::size_t budget = 150) {
    SearchConfig c;
    c.algorithm = a;
    c.seed = seed;
    c.budget = budget;
    return c;
}

constexpr Algorithm kAll[] = {Algorithm::random_search, Algorithm::regularized_evolution, Algorithm::local_search};

}  // namespace

TEST_CASE("budgeted oracle charges each class once") {
    BudgetedOracle o(unimodal(), Dataset::synthetic, "clean", 2);
    const auto a = cellspace::parse_genotype("|none~0|+|none~0|none~1|+|skip_connect~0|none~1|none~2|");
    const auto a_iso = cellspace::parse_genotype("|avg_pool_3x3~0|+|none~0|none~1|+|skip_connect~0|none~1|none~2|");
    double v = 0.0;
    CHECK(o.evaluate(a, v));
    CHECK(o.is_memoized(a_iso));
    CHECK(o.evaluate(a_iso, v));
    CHECK(o.queries() == 1);
    CHECK(o.evaluate(Genotype::from_index(0), v));
    CHECK(o.exhausted());
    CHECK_FALSE(o.evaluate(Genotype::from_index(77), v));
    CHECK(o.evaluate(a, v));
    CHECK(o.queries() == 2);
}

TEST_CASE("budget is never exceeded") {
    for (auto alg : kAll)
        for (std::uint64_t seed = 0; seed < 30; ++seed)
            for (const BenchStore* s : {&unimodal(), &rugged()}) {
                const auto r = run_search(*s, config(alg, seed));
                REQUIRE(r.queries_used <= 150);
                CHECK(r.trajectory.size() == r.queries_used);
                for (std::size_t i = 1; i < r.trajectory.size(); ++i) REQUIRE(r.trajectory[i] >= r.trajectory[i - 1]);
                CHECK(r.best_value == r.trajectory.back());
                CHECK(value_of(*s, r.best) == r.best_value);
            }
}

TEST_CASE("random search") {
    SUBCASE("budget 1 returns the sampled genotype") {
        const auto r = random_search(rugged(), config(Algorithm::random_search, 4, 1));
        CHECK(r.queries_used == 1);
        CHECK(r.best_value == value_of(rugged(), r.best));
    }
    SUBCASE("a full budget returns the global optimum") {
        const auto opt = exhaustive_argmax(rugged(), Dataset::synthetic, "clean");
        for (auto alg : kAll) {
            const auto r = run_search(rugged(), config(alg, 5, cellspace::kSpaceSize));
            CHECK(r.best_value == opt.value);
            CHECK(cellspace::class_id(r.best) == cellspace::class_id(opt.genotype));
        }
    }
    SUBCASE("an oversized budget is clamped") {
        const auto r = random_search(rugged(), config(Algorithm::random_search, 6, cellspace::kSpaceSize + 10));
        CHECK(r.queries_used == 6466);
    }
}

TEST_CASE("regularized evolution") {
    SUBCASE("budget equal to the population returns the best initial member") {
        auto cfg = config(Algorithm::regularized_evolution, 7, 20);
        const auto r = regularized_evolution(rugged(), cfg);
        CHECK(r.queries_used == 20);
        CHECK(r.mutations.empty());
    }
    SUBCASE("children are neighbors of their parents") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto r = regularized_evolution(rugged(), config(Algorithm::regularized_evolution, seed));
            CHECK(!r.mutations.empty());
            for (const auto& [parent, child] : r.mutations) {
                const auto ns = cellspace::neighbors(parent);
                REQUIRE(std::find(ns.begin(), ns.end(), child) != ns.end());
            }
        }
    }
    SUBCASE("beats random search on the unimodal landscape") {
        int wins = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto re = regularized_evolution(unimodal(), config(Algorithm::regularized_evolution, seed));
            const auto rs = random_search(unimodal(), config(Algorithm::random_search, seed));
            wins += re.best_value >= rs.best_value;
        }
        CHECK(wins >= 80);
    }
    SUBCASE("invalid population") {
        auto cfg = config(Algorithm::regularized_evolution, 1, 10);
        CHECK_THROWS_AS(regularized_evolution(rugged(), cfg), Error);
        cfg.budget = 150;
        cfg.sample_size = 30;
        CHECK_THROWS_AS(regularized_evolution(rugged(), cfg), Error);
    }
}

TEST_CASE("local search") {
    const auto optima = brute_force_local_optima(unimodal());
    const auto top = cellspace::class_id(Genotype::from_index(0));
    CHECK(optima.count(top) == 1);

    std::size_t climbs = 0, at_top = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto r = local_search(unimodal(), config(Algorithm::local_search, seed));
        for (const auto& g : r.completed_climbs) {
            ++climbs;
            at_top += cellspace::class_id(g) == top;
            REQUIRE(optima.count(cellspace::class_id(g)) == 1);
            const double v = value_of(unimodal(), g);
            for (const auto& n : cellspace::neighbors(g)) REQUIRE(value_of(unimodal(), n) <= v);
        }
        if (r.best_from_completed_climb)
            for (const auto& n : cellspace::neighbors(r.best)) REQUIRE(value_of(unimodal(), n) <= r.best_value);
    }
    CHECK(climbs > 0);
    CHECK(at_top * 2 > climbs);

    // On a rugged landscape every completed climb is still a local optimum.
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto r = local_search(rugged(), config(Algorithm::local_search, seed, 1000));
        for (const auto& g : r.completed_climbs) {
            const double v = value_of(rugged(), g);
            for (const auto& n : cellspace::neighbors(g)) REQUIRE(value_of(rugged(), n) <= v);
        }
    }
}

TEST_CASE("determinism and aggregation") {
    for (auto alg : kAll) {
        auto cfg = config(alg, 11);
        CHECK(run_search(rugged(), cfg) == run_search(rugged(), cfg));
        cfg.runs = 1;
        const auto one = run_many(rugged(), cfg);
        REQUIRE(one.results.size() == 1);
        for (const auto& [k, v] : one.mean_metrics) CHECK(v == one.results[0].metrics.at(k));
    }

    auto cfg = config(Algorithm::regularized_evolution, 3);
    cfg.runs = 100;
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_many(unimodal(), cfg);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 10.0);
    REQUIRE(rep.results.size() == 100);
    double mean_clean = 0.0;
    for (const auto& r : rep.results) mean_clean += r.metrics.at("clean") / 100.0;
    CHECK(rep.mean_metrics.at("clean") == doctest::Approx(mean_clean).epsilon(1e-14));
    CHECK(rep.results[0] == run_search(unimodal(), [&] {
              auto c = cfg;
              c.seed = substream_seed(cfg.seed, "searchers.run.0");
              return c;
          }()));

    CHECK(table_csv_header().rfind("algorithm,objective,clean", 0) == 0);
    const auto row = table_csv_row("local_search", "clean", rep.mean_metrics);
    CHECK(row.rfind("local_search,clean,", 0) == 0);
}

TEST_CASE("exhaustive argmax") {
    const auto opt = exhaustive_argmax(unimodal(), Dataset::synthetic, "clean");
    CHECK(opt.genotype == Genotype::from_index(0));
    const auto planted = benchstore::synthesize_benchmark(3, Landscape::planted_optimum);
    const auto p = exhaustive_argmax(planted, Dataset::synthetic, std::string(benchstore::kRobustMean));
    CHECK(cellspace::class_id(p.genotype) == cellspace::class_id(*planted.planted));
    CHECK_THROWS_AS(exhaustive_argmax(unimodal(), Dataset::cifar10, "clean"), Error);
}
