#include <doctest.h>

#include "robnas/error.hpp"
#include "robnas/loss.hpp"
#include "robnas/netcore.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>

using namespace robnas;
using namespace robnas::netcore;
using robnas::testing::central_difference;
using robnas::testing::random_spec;
using robnas::testing::random_vec;
using robnas::testing::relative_error;

namespace {

NetworkSpec fcnn(int depth, int width, int d) {
    NetworkSpec s;
    s.family = Family::residual_fcnn;
    s.depth = depth;
    s.width = width;
    s.input_dim = d;
    return s;
}

NetworkSpec cell_spec(const cellspace::Genotype& g, int cells = 1) {
    NetworkSpec s;
    s.family = Family::cell_network;
    s.genotype = g;
    s.cell_count = cells;
    s.stem_channels = 8;
    s.in_channels = 3;
    s.image_size = 8;
    s.num_classes = 10;
    return s;
}

cellspace::Genotype uniform_genotype(cellspace::Operator op) {
    std::array<cellspace::Operator, cellspace::kNumEdges> ops{};
    ops.fill(op);
    return cellspace::Genotype(ops);
}

double largest_singular_value(const Mat& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

}  // namespace

TEST_CASE("initialization") {
    const auto spec = fcnn(3, 64, 8);
    CHECK(init_weights(spec, 3) == init_weights(spec, 3));
    CHECK_FALSE(init_weights(spec, 3) == init_weights(spec, 4));

    SUBCASE("hidden-layer variance is 1/m") {
        const auto w = init_weights(fcnn(3, 1024, 4), 1);
        const Mat& w2 = w.layers[1];
        const double mean = w2.mean();
        const double var = (w2.array() - mean).square().sum() / static_cast<double>(w2.size() - 1);
        CHECK(var == doctest::Approx(1.0 / 1024).epsilon(0.05));
    }
    SUBCASE("hidden-layer spectral norm stays below 3") {
        int pass = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed)
            pass += largest_singular_value(init_weights(fcnn(3, 64, 4), seed).layers[1]) <= 3.0;
        CHECK(pass >= 99);
    }
    SUBCASE("shape errors name the layer") {
        auto w = init_weights(spec, 0);
        w.layers[1] = Mat::Zero(3, 3);
        try {
            check_weights(spec, w);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
        }
    }
    SUBCASE("flatten round trip") {
        const auto w = init_weights(spec, 5);
        CHECK(w.with_flat(w.flatten()) == w);
    }
}

TEST_CASE("fully connected forward") {
    SUBCASE("zero network") {
        const auto spec = fcnn(3, 16, 4);
        auto w = init_weights(spec, 0);
        for (auto& l : w.layers) l.setZero();
        Rng rng = make_rng(0, "t");
        CHECK(forward_fcnn(spec, w, random_vec(4, rng)).output == 0.0);
    }
    SUBCASE("skip pass-through with a zero branch") {
        auto spec = fcnn(3, 16, 4);
        spec.skip_flags = {1};
        auto w = init_weights(spec, 0);
        w.layers[1].setZero();
        Rng rng = make_rng(1, "t");
        const auto tr = forward_fcnn(spec, w, random_vec(4, rng));
        CHECK(tr.features[1] == tr.features[0]);
    }
    SUBCASE("hand-computed two hidden layers") {
        auto spec = fcnn(3, 2, 2);
        spec.skip_flags = {1};
        WeightSet w;
        Mat w1(2, 2), w2(2, 2), w3(1, 2);
        w1 << 1, -1, 0.5, 2;
        w2 << 1, 0, -1, 1;
        w3 << 2, -3;
        w.layers = {w1, w2, w3};
        Vec x(2);
        x << 1.0, 0.5;
        // f1 = relu([0.5, 1.5]); f2 = (1/3) relu([0.5, 1.0]) + f1; f = 2 f2_0 - 3 f2_1
        const double f2a = 0.5 / 3.0 + 0.5;
        const double f2b = 1.0 / 3.0 + 1.5;
        CHECK(forward_fcnn(spec, w, x).output == doctest::Approx(2 * f2a - 3 * f2b).epsilon(1e-14));
    }
    SUBCASE("penultimate features stay order one at width 2048") {
        const auto spec = fcnn(3, 2048, 10);
        Rng rng = make_rng(2, "t");
        Vec x = robnas::testing::gaussian_vec(10, rng);
        x.normalize();
        int within = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const double n = forward_fcnn(spec, init_weights(spec, seed), x).features.back().norm();
            within += n >= 0.1 && n <= 10.0;
        }
        CHECK(within == 100);
    }
}

TEST_CASE("patch extraction") {
    Rng rng = make_rng(3, "patches");
    SUBCASE("identity patching") {
        const Mat x = Mat::Random(3, 5);
        CHECK(extract_patches(x, 1) == x);
    }
    SUBCASE("zero padded columns") {
        Mat x(1, 3);
        x << 1, 2, 3;
        Mat expected(3, 3);
        expected << 0, 1, 2,  //
            1, 2, 3,          //
            2, 3, 0;
        CHECK(extract_patches(x, 3) == expected);
    }
    SUBCASE("norm bound and adjoint") {
        for (int t = 0; t < 50; ++t) {
            const Mat x = Mat::Random(3, 7);
            for (int k : {1, 3, 5}) {
                const Mat p = extract_patches(x, k);
                CHECK(p.norm() <= std::sqrt(static_cast<double>(k)) * x.norm() + 1e-12);
                const Mat q = Mat::Random(p.rows(), p.cols());
                const double lhs = p.cwiseProduct(q).sum();
                const double rhs = x.cwiseProduct(accumulate_patches(q, k, 3)).sum();
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("convolutional forward") {
    Rng rng = make_rng(4, "cnn");
    SUBCASE("direct convolution agrees with the patch route") {
        for (int t = 0; t < 30; ++t) {
            NetworkSpec s;
            s.family = Family::residual_cnn;
            s.depth = 2 + t % 3;
            s.width = 3;
            s.input_dim = 2;
            s.pixels = 6;
            s.filter_size = t % 2 ? 3 : 5;
            s.skip_flags.assign(static_cast<std::size_t>(s.depth - 2), t % 2);
            const auto w = init_weights(s, static_cast<std::uint64_t>(t));
            const Vec x = random_vec(12, rng);
            const double a = forward_cnn(s, w, x).output;
            const double b = forward_cnn_direct(s, w, x);
            CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
        }
    }
    SUBCASE("filter 1 and one pixel reduces to the fully connected network") {
        NetworkSpec c;
        c.family = Family::residual_cnn;
        c.depth = 4;
        c.width = 5;
        c.input_dim = 3;
        c.pixels = 1;
        c.filter_size = 1;
        c.skip_flags = {1, 0};
        NetworkSpec f = fcnn(4, 5, 3);
        f.skip_flags = {1, 0};
        const auto wc = init_weights(c, 9);
        WeightSet wf = wc;
        wf.layers.back() = wc.layers.back().transpose();
        const Vec x = random_vec(3, rng);
        CHECK(forward_cnn(c, wc, x).output == doctest::Approx(forward_fcnn(f, wf, x).output).epsilon(1e-14));
    }
    SUBCASE("zero weights") {
        NetworkSpec s;
        s.family = Family::residual_cnn;
        s.depth = 3;
        s.width = 2;
        s.input_dim = 2;
        s.pixels = 4;
        s.filter_size = 3;
        auto w = init_weights(s, 0);
        for (auto& l : w.layers) l.setZero();
        CHECK(forward_cnn(s, w, random_vec(8, rng)).output == 0.0);
    }
}

TEST_CASE("cell network") {
    Rng rng = make_rng(5, "cell");
    const Vec x = random_vec(3 * 64, rng, 0.0, 1.0);
    SUBCASE("all-zeroize cells give zero logits at init") {
        const auto spec = cell_spec(uniform_genotype(cellspace::Operator::zeroize), 2);
        CHECK(outputs(spec, init_weights(spec, 0), x).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("all-skip cells are linear and scale features by four") {
        // Node sums: n1 = x, n2 = x + n1, n3 = x + n1 + n2 = 4x.
        const auto one = cell_spec(uniform_genotype(cellspace::Operator::skip_connect), 1);
        const auto two = cell_spec(uniform_genotype(cellspace::Operator::skip_connect), 2);
        auto w = init_weights(one, 0);
        w.layers.back() = Mat::Random(w.layers.back().rows(), 1);
        const Vec bias = Eigen::Map<const Vec>(w.layers.back().data(), w.layers.back().size());
        const Vec a = outputs(one, w, x) - bias;
        const Vec b = outputs(two, w, x) - bias;
        CHECK((b - 4.0 * a).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()));
        const Vec c = outputs(one, w, Vec(2.0 * x)) - bias;
        CHECK((c - 2.0 * a).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()));
    }
    SUBCASE("one cell, width 8, 8x8x3 forward and backward under 50 ms") {
        const auto spec = cell_spec(uniform_genotype(cellspace::Operator::conv3x3), 1);
        const auto w = init_weights(spec, 0);
        (void)backprop(spec, w, x, Vec::Ones(10));
        const auto t0 = std::chrono::steady_clock::now();
        constexpr int kReps = 5;
        for (int i = 0; i < kReps; ++i) (void)backprop(spec, w, x, Vec::Ones(10));
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        CHECK(ms / kReps < 50.0);
    }
}

TEST_CASE("weight gradients") {
    SUBCASE("linear model gradient is the input") {
        NetworkSpec s;
        s.family = Family::linear;
        s.input_dim = 5;
        Rng rng = make_rng(6, "lin");
        const Vec x = random_vec(5, rng);
        CHECK(gradient_wrt_weights(s, init_weights(s, 0), x) == x);
    }
    SUBCASE("zero readout gives the penultimate features") {
        auto s = fcnn(4, 6, 3);
        auto w = init_weights(s, 1);
        w.layers.back().setZero();
        Rng rng = make_rng(7, "zr");
        const Vec x = random_vec(3, rng);
        const Vec g = gradient_wrt_weights(s, w, x);
        const Vec f = forward_fcnn(s, w, x).features.back();
        CHECK(g.tail(6) == f);
    }
    SUBCASE("finite differences on random specs") {
        Rng rng = make_rng(8, "fd");
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            const auto spec = random_spec(t, rng);
            const auto w = init_weights(spec, static_cast<std::uint64_t>(t));
            const Vec x = random_vec(static_cast<Eigen::Index>(spec.input_size()), rng, 0.0, 1.0);
            const Vec g = gradient_wrt_weights(spec, w, x);
            auto f = [&](const Vec& flat) { return scalar_output(spec, w.with_flat(flat), x); };
            const Vec flat = w.flatten();
            std::uniform_int_distribution<Eigen::Index> coord(0, flat.size() - 1);
            for (int c = 0; c < 50; ++c) {
                const Eigen::Index i = coord(rng);
                worst = std::max(worst, relative_error(g(i), central_difference(f, flat, i)));
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("input gradients of the loss") {
    SUBCASE("linear-logistic closed form") {
        NetworkSpec s;
        s.family = Family::linear;
        s.input_dim = 3;
        const auto w = init_weights(s, 2);
        Rng rng = make_rng(9, "ll");
        const Vec x = random_vec(3, rng);
        const double f = w.layers[0].row(0).dot(x);
        for (int y : {1, -1}) {
            const auto lg = loss_gradient_wrt_input(s, w, x, y);
            const Vec expected = -(1.0 / (1.0 + std::exp(y * f))) * y * w.layers[0].row(0).transpose();
            CHECK((lg.gradient - expected).cwiseAbs().maxCoeff() < 1e-15);
            CHECK(lg.loss == doctest::Approx(std::log1p(std::exp(-y * f))));
        }
    }
    SUBCASE("label flip antisymmetry at f = 0") {
        NetworkSpec s;
        s.family = Family::linear;
        s.input_dim = 2;
        WeightSet w;
        w.layers = {Mat(1, 2)};
        w.layers[0] << 1.0, 1.0;
        Vec x(2);
        x << 0.25, -0.25;
        const auto a = loss_gradient_wrt_input(s, w, x, 1);
        const auto b = loss_gradient_wrt_input(s, w, x, -1);
        CHECK((a.gradient + b.gradient).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("finite differences on random specs") {
        Rng rng = make_rng(10, "fdx");
        double worst = 0.0;
        for (int t = 0; t < 12; ++t) {
            const auto spec = random_spec(t, rng);
            const auto w = init_weights(spec, static_cast<std::uint64_t>(t) + 100);
            const Vec x = random_vec(static_cast<Eigen::Index>(spec.input_size()), rng, 0.0, 1.0);
            const int label = is_binary(spec) ? (t % 2 ? 1 : -1) : t % spec.num_classes;
            const Vec g = loss_gradient_wrt_input(spec, w, x, label).gradient;
            auto f = [&](const Vec& v) { return sample_loss(spec, w, v, label); };
            for (Eigen::Index i = 0; i < x.size(); ++i)
                worst = std::max(worst, relative_error(g(i), central_difference(f, x, i)));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("logistic loss") {
    CHECK(logistic_loss(0.0) == doctest::Approx(std::log(2.0)));
    CHECK(logistic_loss(1000.0) < 1e-15);
    CHECK(std::isfinite(logistic_loss(-1000.0)));
    for (double z = -10.0; z <= 10.0; z += 0.01) CHECK((z <= 0 ? 1.0 : 0.0) <= 4.0 * logistic_loss(z));
}

TEST_CASE("spec validation") {
    auto s = fcnn(3, 8, 2);
    s.activations = {Activation{}};
    CHECK_THROWS_AS(s.validate(), Error);
    s = fcnn(1, 8, 2);
    CHECK_THROWS_AS(s.validate(), Error);
    s.family = Family::residual_cnn;
    s.depth = 3;
    s.filter_size = 2;
    CHECK_THROWS_AS(s.validate(), Error);
}
