#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "tse/common.hpp"
#include "tse/data_model.hpp"
#include "tse/objective.hpp"

using namespace tse;
using namespace tse::gbdt;

namespace {

// central finite differences of the summed row losses w.r.t. raw scores
std::vector<double> fd_gradient(const Objective& obj, std::vector<double> raw,
                                const std::vector<double>& targets, double h = 1e-6) {
    const int k = obj.outputs();
    std::vector<double> g(raw.size());
    for (size_t j = 0; j < raw.size(); ++j) {
        double keep = raw[j];
        size_t row = j / k;
        raw[j] = keep + h;
        double up = row_loss(obj, &raw[row * k], targets[row]);
        raw[j] = keep - h;
        double down = row_loss(obj, &raw[row * k], targets[row]);
        raw[j] = keep;
        g[j] = (up - down) / (2 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("squared error gradient vanishes at the optimum") {
    Objective obj = Objective::squared_error();
    std::vector<double> raw = {1.5, -2.0, 0.0};
    std::vector<double> g, h;
    gradients(obj, raw, raw, g, h);
    for (double v : g) CHECK(v == 0.0);
    for (double v : h) CHECK(v == 1.0);
}

TEST_CASE("softmax gradient hand case") {
    // uniform probabilities, true class 0 with weight 2
    Objective obj = Objective::masked_weighted_softmax(3, {2.0, 1.0, 1.0});
    std::vector<double> raw = {0.0, 0.0, 0.0};
    std::vector<double> g, h;
    gradients(obj, raw, {0.0}, g, h);
    CHECK(g[0] == doctest::Approx(-4.0 / 3.0).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(g[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    for (int c = 0; c < 3; ++c)
        CHECK(h[c] == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("ignored softmax rows carry zero gradient and hessian") {
    Objective obj = Objective::masked_weighted_softmax(3, {1.0, 1.0, 1.0});
    std::vector<double> raw = {0.3, -1.0, 2.0, 0.1, 0.1, 0.1};
    std::vector<double> g, h;
    gradients(obj, raw, {static_cast<double>(kIgnore), 1.0}, g, h);
    for (int c = 0; c < 3; ++c) {
        CHECK(g[c] == 0.0);
        CHECK(h[c] == 0.0);
    }
    CHECK(g[3] != 0.0);
}

TEST_CASE("appending ignored rows leaves original gradients unchanged") {
    Objective obj = Objective::masked_weighted_softmax(3, {1.0, 2.0, 0.5});
    Rng rng(11);
    std::vector<double> raw, targets;
    for (int i = 0; i < 20; ++i) {
        for (int c = 0; c < 3; ++c) raw.push_back(rng.uniform(-2, 2));
        targets.push_back(rng.uniform_int(0, 2));
    }
    std::vector<double> g1, h1;
    gradients(obj, raw, targets, g1, h1);

    std::vector<double> raw2 = raw, targets2 = targets;
    for (int i = 0; i < 7; ++i) {
        for (int c = 0; c < 3; ++c) raw2.push_back(rng.uniform(-2, 2));
        targets2.push_back(kIgnore);
    }
    std::vector<double> g2, h2;
    gradients(obj, raw2, targets2, g2, h2);
    for (size_t i = 0; i < g1.size(); ++i) {
        CHECK(g1[i] == g2[i]);
        CHECK(h1[i] == h2[i]);
    }
}

TEST_CASE("analytic gradients match finite differences") {
    Rng rng(42);

    SUBCASE("squared error") {
        Objective obj = Objective::squared_error();
        for (int i = 0; i < 100; ++i) {
            double target = rng.uniform(-3, 3);
            double pred = target + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.01, 3);
            std::vector<double> g, h;
            gradients(obj, {pred}, {target}, g, h);
            auto fd = fd_gradient(obj, {pred}, {target});
            CHECK(std::fabs(fd[0] - g[0]) <= 1e-5 * std::max(1.0, std::fabs(g[0])));
        }
    }

    SUBCASE("absolute error") {
        Objective obj = Objective::absolute_error();
        for (int i = 0; i < 100; ++i) {
            double target = rng.uniform(-3, 3);
            double pred = target + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.01, 3);
            std::vector<double> g, h;
            gradients(obj, {pred}, {target}, g, h);
            auto fd = fd_gradient(obj, {pred}, {target});
            CHECK(std::fabs(fd[0] - g[0]) <= 1e-5 * std::fabs(g[0]));
        }
    }

    SUBCASE("masked weighted softmax") {
        Objective obj = Objective::masked_weighted_softmax(3, {2.0, 1.0, 0.5}, 1e-12);
        for (int i = 0; i < 100; ++i) {
            std::vector<double> raw = {rng.uniform(-2, 2), rng.uniform(-2, 2),
                                       rng.uniform(-2, 2)};
            std::vector<double> target = {static_cast<double>(rng.uniform_int(0, 2))};
            std::vector<double> g, h;
            gradients(obj, raw, target, g, h);
            auto fd = fd_gradient(obj, raw, target);
            for (int c = 0; c < 3; ++c)
                CHECK(std::fabs(fd[c] - g[c]) <=
                      1e-5 * std::max(std::fabs(g[c]), 1e-3));
        }
    }
}

TEST_CASE("class weights") {
    SUBCASE("balanced counts give unit weights") {
        std::vector<double> y = {0, 0, 1, 1, 2, 2};
        CHECK(class_weights(y, 3) == std::vector<double>{1.0, 1.0, 1.0});
    }
    SUBCASE("counts 1,2,3") {
        std::vector<double> y = {0, 1, 1, 2, 2, 2};
        auto w = class_weights(y, 3);
        CHECK(w[0] == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(w[1] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(w[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("ignored labels are not counted") {
        std::vector<double> with = {0, 1, 1, 2, 2, 2,
                                    static_cast<double>(kIgnore),
                                    static_cast<double>(kIgnore)};
        std::vector<double> without = {0, 1, 1, 2, 2, 2};
        CHECK(class_weights(with, 3) == class_weights(without, 3));
    }
    SUBCASE("absent class errors naming it") {
        std::vector<double> y = {1, 1, 2};
        try {
            class_weights(y, 3);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("red") != std::string::npos);
        }
    }
}

TEST_CASE("masked loss") {
    std::vector<double> w1 = {1.0, 1.0, 1.0};

    SUBCASE("perfect prediction is ~zero") {
        double loss = masked_loss({1.0, 0.0, 0.0}, {0.0}, w1, 1e-9);
        CHECK(std::fabs(loss) < 1e-8);
    }
    SUBCASE("ignored row does not change the loss") {
        double lone = masked_loss({1.0, 0.0, 0.0}, {0.0}, w1, 1e-9);
        double both = masked_loss({0.2, 0.5, 0.3, 1.0, 0.0, 0.0},
                                  {static_cast<double>(kIgnore), 0.0}, w1, 1e-9);
        CHECK(lone == both);
    }
    SUBCASE("hand-computed two-row case") {
        double loss = masked_loss({0.7, 0.2, 0.1, 0.2, 0.2, 0.6}, {0.0, 2.0}, w1, 0.0);
        double expected = -(std::log(0.7) + std::log(0.6)) / 2.0;
        CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("all rows ignored is an error") {
        CHECK_THROWS_AS(masked_loss({0.3, 0.3, 0.4},
                                    {static_cast<double>(kIgnore)}, w1, 1e-9),
                        Error);
    }
    SUBCASE("invariant to predictions on ignored rows") {
        Rng rng(5);
        std::vector<double> probs, targets;
        for (int i = 0; i < 30; ++i) {
            double a = rng.uniform(0.01, 1), b = rng.uniform(0.01, 1),
                   c = rng.uniform(0.01, 1);
            double s = a + b + c;
            probs.insert(probs.end(), {a / s, b / s, c / s});
            targets.push_back(rng.uniform() < 0.4 ? kIgnore : rng.uniform_int(0, 2));
        }
        targets[3] = kIgnore;  // guarantee at least one ignored row
        double before = masked_loss(probs, targets, w1, 1e-9);
        for (size_t i = 0; i < targets.size(); ++i)
            if (targets[i] == kIgnore)
                for (int c = 0; c < 3; ++c) probs[i * 3 + c] = rng.uniform(0, 9);
        CHECK(masked_loss(probs, targets, w1, 1e-9) == before);
    }
}
