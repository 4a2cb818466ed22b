#include <catch2/catch.hpp>

#include <random>

#include "fixtures.hpp"
#include "hesscraft/crosscheck.hpp"
#include "hesscraft/edge_pushing.hpp"
#include "hesscraft/oracles.hpp"

using namespace hesscraft;

TEST_CASE("dense nested recurrence reproduces the golden Hessians") {
    SECTION("exp polynomial") {
        Tape t = fixtures::exp_poly_tape();
        const double x[] = {1.0, 0.0, 2.0};
        forward_sweep(t, x);
        const SparseHessian h = dense_hessian_nested(t);
        CHECK(h.value_at(1, 0) == Approx(3.0).margin(1e-12));
        CHECK(h.value_at(2, 0) == Approx(4.0).margin(1e-12));
        CHECK(h.value_at(1, 1) == Approx(10.0).margin(1e-12));
        CHECK(h.value_at(2, 1) == Approx(4.0).margin(1e-12));
        CHECK(h.value_at(2, 2) == Approx(4.0).margin(1e-12));
        CHECK(h.value_at(0, 0) == 0.0);
    }
    SECTION("single square node") {
        Tape t = record(1, [](std::span<const Var> x) { return sqr(x[0]); });
        double x = 3.0;
        forward_sweep(t, {&x, 1});
        const SparseHessian h = dense_hessian_nested(t);
        REQUIRE(h.nnz() == 1);
        CHECK(h.value_at(0, 0) == 2.0);
    }
}

TEST_CASE("dense oracle agrees with edge pushing on random tapes") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 15; ++trial) {
        RandomProgram rp = random_program(rng, 5, 20);
        forward_sweep(rp.tape, rp.x);
        const SparseHessian dense = dense_hessian_nested(rp.tape);
        const SparseHessian sparse = edge_pushing_hessian(rp.tape).hessian;
        CHECK(scaled_discrepancy(dense, sparse) <= 1e-9);
        // symmetry is exact by construction
        for (const HessianEntry& e : dense.entries())
            CHECK(dense.value_at(e.col, e.row) == e.value);
    }
}

TEST_CASE("dense oracle refuses tapes above the cap") {
    Tape t = fixtures::exp_poly_tape();  // 9 nodes
    const double x[] = {1.0, 0.0, 2.0};
    forward_sweep(t, x);
    REQUIRE_THROWS_AS(dense_hessian_nested(t, 4), std::invalid_argument);
    REQUIRE_NOTHROW(dense_hessian_nested(t, 9));
}

TEST_CASE("finite differences of the gradient") {
    SECTION("bilinear form") {
        Tape t = record(2, [](std::span<const Var> x) { return x[0] * x[1]; });
        const double x[] = {1.0, 1.0};
        const SparseHessian h = fd_hessian(t, x, 1e-5);
        REQUIRE(h.nnz() == 1);
        CHECK(h.value_at(1, 0) == Approx(1.0).margin(1e-6));
    }
    SECTION("exp polynomial within 1e-4 of the closed form") {
        Tape t = fixtures::exp_poly_tape();
        const double x[] = {1.0, 0.0, 2.0};
        const SparseHessian h = fd_hessian(t, x);
        CHECK(h.value_at(1, 0) == Approx(3.0).epsilon(1e-4));
        CHECK(h.value_at(2, 0) == Approx(4.0).epsilon(1e-4));
        CHECK(h.value_at(1, 1) == Approx(10.0).epsilon(1e-4));
        CHECK(h.value_at(2, 1) == Approx(4.0).epsilon(1e-4));
        CHECK(h.value_at(2, 2) == Approx(4.0).epsilon(1e-4));
    }
    SECTION("linear tape thresholds to empty") {
        Tape t = fixtures::linear_tape();
        const double x[] = {4.0, -2.0};
        CHECK(fd_hessian(t, x).nnz() == 0);
    }
}

TEST_CASE("hessian-vector products") {
    Tape t = fixtures::exp_poly_tape();
    const double x[] = {1.0, 0.0, 2.0};
    forward_sweep(t, x);

    SECTION("first unit direction gives the first column") {
        const double d[] = {1.0, 0.0, 0.0};
        const std::vector<double> hd = hessian_vector_product(t, d);
        REQUIRE(hd.size() == 3);
        CHECK(hd[0] == Approx(0.0).margin(1e-12));
        CHECK(hd[1] == Approx(3.0).margin(1e-12));
        CHECK(hd[2] == Approx(4.0).margin(1e-12));
    }
    SECTION("zero direction gives exactly zero") {
        const double d[] = {0.0, 0.0, 0.0};
        for (double v : hessian_vector_product(t, d)) CHECK(v == 0.0);
    }
    SECTION("dimension mismatch is rejected") {
        const double d[] = {1.0, 0.0};
        REQUIRE_THROWS_AS(hessian_vector_product(t, d), std::invalid_argument);
    }
    SECTION("unit columns reassemble the sparse Hessian") {
        const SparseHessian h = edge_pushing_hessian(t).hessian;
        double e[] = {0.0, 0.0, 0.0};
        for (int k = 0; k < 3; ++k) {
            e[k] = 1.0;
            const std::vector<double> col = hessian_vector_product(t, e);
            e[k] = 0.0;
            for (int r = 0; r < 3; ++r)
                CHECK(col[r] == Approx(h.value_at(r, k)).margin(1e-10));
        }
    }
}

TEST_CASE("hessian-vector product matches the product of the sparse result") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        RandomProgram rp = random_program(rng, 6, 25);
        forward_sweep(rp.tape, rp.x);
        const SparseHessian h = edge_pushing_hessian(rp.tape).hessian;
        std::vector<double> d(rp.x.size());
        for (double& v : d) v = dist(rng);
        const std::vector<double> exact = hessian_vector_product(rp.tape, d);
        const std::vector<double> via_sparse = h.multiply(d);
        const double scale = std::max(1.0, h.max_abs());
        for (std::size_t k = 0; k < d.size(); ++k)
            CHECK(std::abs(exact[k] - via_sparse[k]) / scale <= 1e-10);
    }
}
