#include <doctest.h>

#include "robnas/adversary.hpp"
#include "robnas/error.hpp"
#include "support.hpp"

using namespace robnas;
using namespace robnas::adversary;
using robnas::testing::gaussian_vec;
using robnas::testing::random_vec;

namespace {

netcore::NetworkSpec linear_spec(int d) {
    netcore::NetworkSpec s;
    s.family = netcore::Family::linear;
    s.input_dim = d;
    return s;
}

netcore::WeightSet linear_weights(std::initializer_list<double> w) {
    netcore::WeightSet ws;
    Mat m(1, static_cast<Eigen::Index>(w.size()));
    Eigen::Index i = 0;
    for (double v : w) m(0, i++) = v;
    ws.layers = {m};
    return ws;
}

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("normalize_input") {
    const Vec u = normalize_input(vec2(3, 4));
    CHECK(u(0) == doctest::Approx(0.6));
    CHECK(u(1) == doctest::Approx(0.8));
    CHECK(normalize_input(u) == u);
    Rng rng = make_rng(1, "norm");
    for (int i = 0; i < 1000; ++i) CHECK(normalize_input(gaussian_vec(7, rng)).norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(normalize_input(Vec::Zero(3)), Error);
}

TEST_CASE("projection") {
    Vec c = Vec::Constant(1, 0.5);
    CHECK(project(Vec::Constant(1, 0.9), c, 0.1, Norm::l_inf, std::nullopt)(0) == doctest::Approx(0.6));
    CHECK(project(Vec::Constant(1, 0.55), c, 0.1, Norm::l_inf, DataRange{}) == Vec::Constant(1, 0.55));

    Rng rng = make_rng(2, "proj");
    for (int t = 0; t < 2000; ++t) {
        const Vec center = random_vec(5, rng, 0.0, 1.0);
        const Vec p = random_vec(5, rng, -1.0, 2.0);
        const double r = 0.3 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const Vec q = project(p, center, r, Norm::l_inf, DataRange{});
        CHECK((q - center).cwiseAbs().maxCoeff() <= r + 1e-12);
        CHECK(q.minCoeff() >= 0.0);
        CHECK(q.maxCoeff() <= 1.0);

        const Vec cs = normalize_input(gaussian_vec(5, rng));
        const Vec qs = project(p, cs, r, Norm::l2_sphere, std::nullopt);
        CHECK((qs - cs).norm() <= r + 1e-12);
        CHECK(qs.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("unit point inside the cap is unchanged") {
        const Vec center = normalize_input(vec2(1, 0.1));
        const Vec p = normalize_input(vec2(1, 0.12));
        CHECK((project(p, center, 0.1, Norm::l2_sphere, std::nullopt) - p).norm() < 1e-15);
    }
}

TEST_CASE("presets") {
    const auto train = AdversaryConfig::training_preset();
    CHECK(train.kind == AttackKind::pgd);
    CHECK(train.steps == 7);
    CHECK(train.step_size == 2.0 / 255.0);
    CHECK(train.radius == 8.0 / 255.0);
    CHECK(train.norm == Norm::l_inf);
    for (double r : {3.0 / 255.0, 8.0 / 255.0}) {
        const auto ev = AdversaryConfig::evaluation_pgd(r);
        CHECK(ev.steps == 20);
        CHECK(ev.step_size == 2.5 * r / 20.0);
        CHECK(ev.radius == r);
    }
    AdversaryConfig bad = AdversaryConfig::pgd(0.1, 0, 0.01);
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("attacks on a linear-logistic model") {
    const auto spec = linear_spec(2);
    const auto w = linear_weights({1.0, -2.0});
    const Vec x = vec2(0.5, 0.5);

    SUBCASE("FGSM closed form") {
        const Vec xh = fgsm(x, 1, spec, w, 0.1, std::nullopt);
        CHECK(xh(0) == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(xh(1) == doctest::Approx(0.6).epsilon(1e-15));
    }
    SUBCASE("zero radius returns the input") {
        CHECK(pgd(x, 1, spec, w, AdversaryConfig::evaluation_pgd(0.0)) == x);
        CHECK(twice_perturb(x, 1, spec, w, AdversaryConfig::evaluation_pgd(0.0)) == x);
    }
    SUBCASE("twice perturbation equals one attack at twice the radius") {
        const auto once = AdversaryConfig::fgsm(0.05, std::nullopt);
        const auto wide = AdversaryConfig::fgsm(0.1, std::nullopt);
        const Vec a = twice_perturb(x, 1, spec, w, once);
        const Vec b = pgd(x, 1, spec, w, wide);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("FGSM is one-step PGD") {
    Rng rng = make_rng(3, "fgsm");
    for (int t = 0; t < 20; ++t) {
        const auto spec = robnas::testing::random_spec(t, rng);
        const auto w = netcore::init_weights(spec, static_cast<std::uint64_t>(t));
        const Vec x = random_vec(static_cast<Eigen::Index>(spec.input_size()), rng, 0.0, 1.0);
        const int label = netcore::is_binary(spec) ? 1 : 0;
        const Vec a = fgsm(x, label, spec, w, 8.0 / 255.0, DataRange{});
        const Vec b = pgd(x, label, spec, w, AdversaryConfig::pgd(8.0 / 255.0, 1, 8.0 / 255.0));
        CHECK(a == b);
    }
}

TEST_CASE("attack output bounds and loss increase") {
    Rng rng = make_rng(4, "bounds");
    int increased = 0;
    int trials = 0;
    for (int t = 0; t < 60; ++t) {
        const auto spec = robnas::testing::random_spec(t, rng);
        const auto w = netcore::init_weights(spec, static_cast<std::uint64_t>(t));
        const double r = (1 + t % 8) / 255.0;
        const auto cfg = AdversaryConfig::evaluation_pgd(r);
        for (int i = 0; i < 5; ++i) {
            const Vec x = random_vec(static_cast<Eigen::Index>(spec.input_size()), rng, 0.0, 1.0);
            const int label = netcore::is_binary(spec) ? (i % 2 ? 1 : -1) : i % spec.num_classes;
            const Vec xh = pgd(x, label, spec, w, cfg);
            CHECK((xh - x).cwiseAbs().maxCoeff() <= r + 1e-12);
            CHECK(xh.minCoeff() >= 0.0);
            CHECK(xh.maxCoeff() <= 1.0);
            const Vec xhh = twice_perturb(x, label, spec, w, cfg);
            CHECK((xhh - x).cwiseAbs().maxCoeff() <= 2 * r + 1e-12);
            increased += netcore::sample_loss(spec, w, xh, label) >= netcore::sample_loss(spec, w, x, label) - 1e-9;
            ++trials;
        }
    }
    CHECK(increased >= 0.95 * trials);
}

TEST_CASE("sphere-mode attack stays on the sphere") {
    netcore::NetworkSpec spec;
    spec.family = netcore::Family::residual_fcnn;
    spec.depth = 2;
    spec.width = 32;
    spec.input_dim = 6;
    const auto w = netcore::init_weights(spec, 1);
    Rng rng = make_rng(5, "sphere");
    const auto cfg = AdversaryConfig::pgd(0.2, 10, 0.05, Norm::l2_sphere, std::nullopt);
    for (int t = 0; t < 200; ++t) {
        const Vec x = normalize_input(gaussian_vec(6, rng));
        const Vec xh = pgd(x, t % 2 ? 1 : -1, spec, w, cfg);
        CHECK((xh - x).norm() <= 0.2 + 1e-12);
        CHECK(xh.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}
