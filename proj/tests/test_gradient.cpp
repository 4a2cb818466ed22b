#include <catch2/catch.hpp>

#include "fixtures.hpp"
#include "hesscraft/gradient.hpp"
#include "hesscraft/graph_model.hpp"

using namespace hesscraft;

TEST_CASE("gradient of the exp polynomial") {
    Tape t = fixtures::exp_poly_tape();
    const double x[] = {1.0, 0.0, 2.0};
    forward_sweep(t, x);
    const GradientResult g = reverse_gradient(t);
    REQUIRE(g.gradient.size() == 3);
    CHECK(g.gradient[0] == Approx(4.0).margin(1e-14));
    CHECK(g.gradient[1] == Approx(10.0).margin(1e-14));
    CHECK(g.gradient[2] == Approx(8.0).margin(1e-14));
}

TEST_CASE("gradient of the product of sum") {
    Tape t = fixtures::product_sum_tape();
    const double x[] = {1.0, 2.0};
    forward_sweep(t, x);
    const GradientResult g = reverse_gradient(t);
    CHECK(g.gradient[0] == 8.0);  // 2*x0*x1 + x1^2
    CHECK(g.gradient[1] == 5.0);  // x0^2 + 2*x0*x1
}

TEST_CASE("linear functions have exact constant gradients") {
    Tape t = fixtures::linear_tape();
    for (double p : {0.0, -3.5, 1e6}) {
        const double x[] = {p, 2 * p + 1};
        forward_sweep(t, x);
        const GradientResult g = reverse_gradient(t);
        CHECK(g.gradient[0] == 3.0);
        CHECK(g.gradient[1] == 1.0);
    }
}

TEST_CASE("gradient requires a swept tape") {
    Tape t = fixtures::linear_tape();
    REQUIRE_THROWS_AS(reverse_gradient(t), std::logic_error);
}

TEST_CASE("one visit and at most two multiply-adds per node") {
    Tape t = fixtures::exp_poly_tape();
    const double x[] = {1.0, 0.5, 2.0};
    forward_sweep(t, x);
    GradientStats stats;
    reverse_gradient(t, &stats);
    CHECK(stats.node_visits == t.ell());
    CHECK(stats.multiply_adds <= 2 * static_cast<std::int64_t>(t.ell()));
    std::int64_t total_arity = 0;
    for (int i = t.n(); i < t.size(); ++i) total_arity += t.node(i).num_preds();
    CHECK(stats.multiply_adds == total_arity);
}

TEST_CASE("adjoints equal sums of path weights") {
    Tape t = fixtures::exp_poly_tape();
    const double x[] = {0.7, 0.3, 1.4};
    forward_sweep(t, x);
    const GradientResult g = reverse_gradient(t);
    for (int i = 0; i < t.size(); ++i) {
        const double by_paths = path_weight_sum(t, i, t.output());
        CHECK(std::abs(by_paths - g.adjoints.vbar[i]) <=
              1e-12 * std::max(1.0, std::abs(g.adjoints.vbar[i])));
    }
    // the output's own adjoint is the empty path
    CHECK(g.adjoints.vbar.back() == 1.0);
}
