#include <doctest.h>

#include <cmath>
#include <vector>

#include "iasdet/ops.hpp"
#include "iasdet/optim.hpp"

using namespace iasdet;

TEST_SUITE("optim") {

TEST_CASE("sgd one-step arithmetic") {
    Tensor w = Tensor::from_data({1}, {1.0}, true);
    const double g = 2.0;
    accumulate_grad(w, std::span<const double>(&g, 1));
    Optimizer opt = make_sgd(0.1);
    apply_optimizer(opt, {w});
    CHECK(w.data()[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(opt.step_count == 1);
    CHECK(!w.grad_populated());
}

TEST_CASE("missing grad is rejected") {
    Tensor w = Tensor::from_data({2}, {1.0, 2.0}, true);
    Optimizer opt = make_sgd(0.1);
    CHECK_THROWS_AS(apply_optimizer(opt, {w}), Error);
    CHECK(opt.step_count == 0);
}

TEST_CASE("adam with zero grads leaves params unchanged") {
    Tensor w = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    Optimizer opt = make_adam(0.1);
    for (int step = 0; step < 5; ++step) {
        w.mutable_grad();  // populated, all zeros
        apply_optimizer(opt, {w});
    }
    CHECK(w.data()[0] == 1.0);
    CHECK(w.data()[1] == -2.0);
    CHECK(w.data()[2] == 0.5);
    CHECK(opt.step_count == 5);
}

TEST_CASE("adam matches a scalar reference run on a quadratic") {
    // f(w) = (w-3)^2 from w=0, lr=0.1; reference values computed externally.
    Tensor w = Tensor::from_data({1}, {0.0}, true);
    Optimizer opt = make_adam(0.1);
    auto step = [&] {
        const double g = 2.0 * (w.data()[0] - 3.0);
        accumulate_grad(w, std::span<const double>(&g, 1));
        apply_optimizer(opt, {w});
    };
    step();
    CHECK(w.data()[0] == doctest::Approx(0.099999999833333353).epsilon(1e-14));
    step();
    CHECK(w.data()[0] == doctest::Approx(0.19989729258521102).epsilon(1e-14));
    for (int t = 2; t < 10; ++t) step();
    CHECK(w.data()[0] == doctest::Approx(0.98581159038304544).epsilon(1e-13));
    for (int t = 10; t < 500; ++t) step();
    CHECK(w.data()[0] == doctest::Approx(2.9999999999932161).epsilon(1e-12));
    CHECK(std::abs(w.data()[0] - 3.0) <= 0.01);
}

TEST_CASE("adam drives a quadratic through the graph ops") {
    Tensor w = Tensor::from_data({1}, {0.0}, true);
    Tensor c = Tensor::from_data({1}, {-3.0});
    Optimizer opt = make_adam(0.1);
    for (int t = 0; t < 500; ++t) {
        Tensor diff = add(w, c);
        backward(mul(diff, diff));
        apply_optimizer(opt, {w});
    }
    CHECK(std::abs(w.data()[0] - 3.0) <= 0.01);
}

TEST_CASE("moments track each parameter independently") {
    Tensor a = Tensor::from_data({1}, {0.0}, true);
    Tensor b = Tensor::from_data({1}, {0.0}, true);
    Optimizer opt = make_adam(0.1);
    const double ga = 1.0, gb = -1.0;
    for (int t = 0; t < 50; ++t) {
        accumulate_grad(a, std::span<const double>(&ga, 1));
        accumulate_grad(b, std::span<const double>(&gb, 1));
        apply_optimizer(opt, {a, b});
    }
    CHECK(a.data()[0] == doctest::Approx(-b.data()[0]).epsilon(1e-12));
    CHECK(opt.moments.size() == 2);
}

}  // TEST_SUITE
