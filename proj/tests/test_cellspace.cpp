#include <doctest.h>

#include "robnas/cellspace.hpp"
#include "robnas/error.hpp"
#include "robnas/types.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <set>

using namespace robnas;
using namespace robnas::cellspace;

namespace {

Genotype make(std::array<Operator, kNumEdges> ops) { return Genotype(ops); }

constexpr auto C3 = Operator::conv3x3;
constexpr auto C1 = Operator::conv1x1;
constexpr auto Z = Operator::zeroize;
constexpr auto S = Operator::skip_connect;
constexpr auto P = Operator::avg_pool;

// Nodes reachable from the input and reaching the output over non-zeroize edges.
std::set<std::size_t> live_nodes(const Genotype& g) {
    std::array<bool, kNumNodes> from_in{true, false, false, false};
    for (std::size_t e = 0; e < kNumEdges; ++e)
        if (g.op(e) != Operator::zeroize && from_in[kEdges[e].from]) from_in[kEdges[e].to] = true;
    std::array<bool, kNumNodes> to_out{false, false, false, true};
    for (std::size_t e = kNumEdges; e-- > 0;)
        if (g.op(e) != Operator::zeroize && to_out[kEdges[e].to]) to_out[kEdges[e].from] = true;
    std::set<std::size_t> out;
    for (std::size_t n = 0; n < kNumNodes; ++n)
        if (from_in[n] && to_out[n]) out.insert(n);
    return out;
}

}  // namespace

TEST_CASE("enumeration covers the space in index order") {
    const auto all = enumerate_genotypes();
    REQUIRE(all.size() == 15625);
    CHECK(all.front() == make({C3, C3, C3, C3, C3, C3}));
    std::set<Genotype> unique(all.begin(), all.end());
    CHECK(unique.size() == 15625);
    for (std::size_t i = 0; i < all.size(); i += 97) CHECK(all[i].index() == i);
}

TEST_CASE("genotypes with a zeroize edge") {
    std::size_t with_zero = 0;
    for (const auto& g : enumerate_genotypes()) with_zero += g.count(Operator::zeroize) > 0;
    std::size_t four_pow_six = 1;
    for (int i = 0; i < 6; ++i) four_pow_six *= 4;
    CHECK(with_zero == 15625 - four_pow_six);
    CHECK(with_zero == 11529);
}

TEST_CASE("parse and format") {
    const auto g = parse_genotype("|skip_connect~0|+|none~0|none~1|+|none~0|none~1|none~2|");
    CHECK(g == make({S, Z, Z, Z, Z, Z}));

    SUBCASE("round trip over the whole space") {
        for (const auto& h : enumerate_genotypes()) {
            const auto s = format_genotype(h);
            REQUIRE(parse_genotype(s) == h);
            REQUIRE(format_genotype(parse_genotype(s)) == s);
        }
    }
    SUBCASE("unknown operator names the token") {
        try {
            (void)parse_genotype("|bad_op~0|+|none~0|none~1|+|none~0|none~1|none~2|");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::validation);
            CHECK(std::string(e.what()).find("bad_op") != std::string::npos);
        }
    }
    SUBCASE("structural errors") {
        CHECK_THROWS_AS((void)parse_genotype(""), Error);
        CHECK_THROWS_AS((void)parse_genotype("|none~0|"), Error);
        CHECK_THROWS_AS((void)parse_genotype("|none~1|+|none~0|none~1|+|none~0|none~1|none~2|"), Error);
        CHECK_THROWS_AS((void)parse_genotype("|none~0|+|none~0|none~1|+|none~0|none~1|none~2|x"), Error);
    }
}

TEST_CASE("canonical forms") {
    SUBCASE("all zeroize is the empty cell") {
        const auto c = canonicalize(make({Z, Z, Z, Z, Z, Z}));
        CHECK(c.canonical_form.find('@') == std::string::npos);
        CHECK(c.canonical_form.find('0') == std::string::npos);
    }
    SUBCASE("a dead intermediate node does not change the class") {
        // edge order: 0->1, 0->2, 1->2, 0->3, 1->3, 2->3
        const auto a = make({Z, Z, Z, C3, Z, Z});
        const auto b = make({S, Z, Z, C3, Z, Z});
        CHECK(live_nodes(a) == std::set<std::size_t>{0, 3});
        CHECK(live_nodes(b) == std::set<std::size_t>{0, 3});
        CHECK(canonicalize(a).canonical_form == canonicalize(b).canonical_form);
        CHECK(class_id(a) == class_id(b));
    }
    SUBCASE("different operators on a live edge differ") {
        CHECK(canonicalize(make({Z, Z, Z, C3, Z, Z})).canonical_form !=
              canonicalize(make({Z, Z, Z, C1, Z, Z})).canonical_form);
        CHECK(canonicalize(make({Z, Z, Z, P, Z, Z})).canonical_form !=
              canonicalize(make({Z, Z, Z, S, Z, Z})).canonical_form);
    }
    SUBCASE("hex encoding") {
        const auto c = canonicalize(make({Z, Z, Z, S, Z, Z}));
        CHECK(c.hex() == to_hex(c.canonical_form));
        CHECK(to_hex("0#") == "3023");
    }
}

TEST_CASE("census: 6466 classes") {
    const auto t0 = std::chrono::steady_clock::now();
    std::set<std::string> forms;
    for (const auto& g : enumerate_genotypes()) forms.insert(canonicalize(g).canonical_form);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(forms.size() == 6466);
    CHECK(secs < 10.0);

    const auto& census = space_census();
    CHECK(census.forms.size() == 6466);
    CHECK(census.class_of.size() == 15625);
    std::size_t members = 0;
    for (std::size_t s : census.class_sizes) members += s;
    CHECK(members == 15625);
    for (std::size_t c = 0; c < census.forms.size(); ++c) {
        const auto rep = Genotype::from_index(census.representative[c]);
        REQUIRE(class_id(rep) == c);
        REQUIRE(canonicalize(rep).class_size == census.class_sizes[c]);
    }
}

TEST_CASE("canonicalization is independent of rule and edge order") {
    std::array<EdgeRule, 3> order{EdgeRule::zeroize_to_zero, EdgeRule::dead_source_to_zero,
                                  EdgeRule::skip_passthrough};
    std::sort(order.begin(), order.end());
    std::vector<std::array<EdgeRule, 3>> orders;
    do orders.push_back(order);
    while (std::next_permutation(order.begin(), order.end()));
    REQUIRE(orders.size() == 6);
    for (const auto& g : enumerate_genotypes()) {
        const std::string ref = canonicalize(g).canonical_form;
        for (const auto& o : orders)
            for (bool rev : {false, true}) REQUIRE(canonicalize_with_order(g, o, rev).canonical_form == ref);
    }
}

TEST_CASE("neighbors") {
    Rng rng = make_rng(7, "test.neighbors");
    std::uniform_int_distribution<std::size_t> pick(0, kSpaceSize - 1);
    for (int t = 0; t < 200; ++t) {
        const auto g = Genotype::from_index(pick(rng));
        const auto ns = neighbors(g);
        REQUIRE(ns.size() == 24);
        CHECK(std::set<Genotype>(ns.begin(), ns.end()).size() == 24);
        CHECK(std::find(ns.begin(), ns.end(), g) == ns.end());
        for (const auto& h : ns) {
            std::size_t diff = 0;
            for (std::size_t e = 0; e < kNumEdges; ++e) diff += g.op(e) != h.op(e);
            REQUIRE(diff == 1);
            const auto back = neighbors(h);
            REQUIRE(std::find(back.begin(), back.end(), g) != back.end());
        }
    }
}

TEST_CASE("mutation is uniform over neighbors") {
    const auto g = make({C3, Z, S, P, C1, C3});
    const auto ns = neighbors(g);
    Rng rng = make_rng(11, "test.mutate");
    std::vector<std::size_t> counts(ns.size(), 0);
    constexpr int kDraws = 100000;
    for (int i = 0; i < kDraws; ++i) {
        const auto h = mutate(g, rng);
        auto it = std::find(ns.begin(), ns.end(), h);
        REQUIRE(it != ns.end());
        ++counts[static_cast<std::size_t>(it - ns.begin())];
    }
    const double expected = static_cast<double>(kDraws) / 24.0;
    double chi2 = 0.0;
    for (auto c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // Upper 1% point of chi-square with 23 degrees of freedom.
    CHECK(chi2 < 41.638);

    Rng a = make_rng(5, "x"), b = make_rng(5, "x");
    for (int i = 0; i < 100; ++i) CHECK(mutate(g, a) == mutate(g, b));
}
