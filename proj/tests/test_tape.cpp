#include <catch2/catch.hpp>

#include <cstring>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "hesscraft/crosscheck.hpp"
#include "hesscraft/tape.hpp"

using namespace hesscraft;

TEST_CASE("recording keeps creation order topological") {
    Tape t = fixtures::exp_poly_tape();
    REQUIRE(t.n() == 3);
    REQUIRE(t.ell() == 6);
    REQUIRE(t.output() == t.size() - 1);
    for (int i = 0; i < t.size(); ++i)
        for (int k = 0; k < t.node(i).num_preds(); ++k) REQUIRE(t.node(i).pred[k] < i);
}

TEST_CASE("forward sweep fills values") {
    SECTION("product of sum") {
        Tape t = fixtures::product_sum_tape();
        const double x[] = {1.0, 2.0};
        REQUIRE(forward_sweep(t, x) == 6.0);
        const double expected[] = {1.0, 2.0, 2.0, 3.0, 6.0};
        for (int i = 0; i < t.size(); ++i) REQUIRE(t.node(i).value == expected[i]);
    }
    SECTION("exp polynomial") {
        Tape t = fixtures::exp_poly_tape();
        const double x[] = {1.0, 0.0, 2.0};
        REQUIRE(forward_sweep(t, x) == 8.0);
        REQUIRE(t.node(3).value == 1.0);  // e^0
        REQUIRE(t.node(4).value == 2.0);  // x0 + e^x1
        REQUIRE(t.node(7).value == 4.0);  // 3*x1 + x2^2
        REQUIRE(t.value() == 8.0);
    }
}

TEST_CASE("bare input as output gets wrapped") {
    Tape t = record(1, [](std::span<const Var> x) { return x[0]; });
    REQUIRE(t.ell() == 1);
    REQUIRE(t.node(t.output()).op == Op::Scale);
    REQUIRE(t.node(t.output()).payload == 1.0);
    const double x[] = {4.5};
    REQUIRE(forward_sweep(t, x) == 4.5);
}

TEST_CASE("unreachable intermediates are compacted away") {
    TapeBuilder b(2);
    const int used = b.add_node(Op::Mul, 0, 1);
    b.add_node(Op::Sin, 0);           // dead
    b.add_node(Op::Exp, used);        // dead
    const int out = b.add_node(Op::AddConst, used, -1, 1.0);
    b.add_node(Op::Cos, 1);           // dead, created after the output
    Tape t = b.finalize(out);
    REQUIRE(t.n() == 2);
    REQUIRE(t.ell() == 2);
    REQUIRE(t.node(t.output()).op == Op::AddConst);
    const double x[] = {3.0, 2.0};
    REQUIRE(forward_sweep(t, x) == 7.0);
}

TEST_CASE("repeated-predecessor binaries are normalized by the expression layer") {
    REQUIRE_THROWS_AS(
        [] {
            TapeBuilder b(1);
            b.add_node(Op::Add, 0, 0);
        }(),
        RecordError);

    SECTION("x + x becomes a scale") {
        Tape t = record(1, [](std::span<const Var> x) { return x[0] + x[0]; });
        REQUIRE(t.node(t.output()).op == Op::Scale);
        REQUIRE(t.node(t.output()).payload == 2.0);
    }
    SECTION("x * x becomes a square") {
        Tape t = record(1, [](std::span<const Var> x) { return x[0] * x[0]; });
        REQUIRE(t.node(t.output()).op == Op::Square);
    }
    SECTION("x / x keeps its pole") {
        Tape t = record(1, [](std::span<const Var> x) { return x[0] / x[0]; });
        double x = 2.0;
        REQUIRE(forward_sweep(t, {&x, 1}) == 1.0);
        x = 0.0;
        REQUIRE_THROWS_AS(forward_sweep(t, {&x, 1}), EvalError);
    }
}

TEST_CASE("domain violations carry the offending node") {
    Tape t = record(1, [](std::span<const Var> x) { return log(x[0]) + 1.0; });
    double x = -1.0;
    try {
        forward_sweep(t, {&x, 1});
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        REQUIRE(e.node_id == 1);  // the Ln node right after the input
        REQUIRE(std::string(e.what()).find("node 1") != std::string::npos);
    }

    Tape d = record(2, [](std::span<const Var> x) { return x[0] / x[1]; });
    const double xs[] = {1.0, 0.0};
    REQUIRE_THROWS_AS(forward_sweep(d, xs), EvalError);

    Tape s = record(1, [](std::span<const Var> x) { return sqrt(x[0]); });
    x = -4.0;
    REQUIRE_THROWS_AS(forward_sweep(s, {&x, 1}), EvalError);
}

TEST_CASE("linear elementals have zero curvature") {
    Tape t = record(3, [](std::span<const Var> x) { return 2.0 * x[0] + (x[1] - x[2]) + 5.0; });
    const double x[] = {0.3, -1.2, 7.0};
    forward_sweep(t, x);
    for (int i = t.n(); i < t.size(); ++i)
        for (int s = 0; s < 3; ++s) REQUIRE(t.node(i).d2[s] == 0.0);
}

TEST_CASE("replaying the sweep is bit-identical") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        RandomProgram rp = random_program(rng, 6, 25);
        forward_sweep(rp.tape, rp.x);
        std::vector<double> first;
        for (int i = 0; i < rp.tape.size(); ++i) first.push_back(rp.tape.node(i).value);
        forward_sweep(rp.tape, rp.x);
        for (int i = 0; i < rp.tape.size(); ++i) REQUIRE(first[i] == rp.tape.node(i).value);
    }
}

namespace {

// One-node probe tape evaluating a single elemental at given inputs; its
// value path is independent of the stored d1/d2 being checked.
double eval_elemental(const TapeNode& nd, double a, double b) {
    TapeBuilder builder(nd.num_preds() == 2 ? 2 : 1);
    builder.add_node(nd.op, 0, nd.num_preds() == 2 ? 1 : -1, nd.payload);
    Tape probe = builder.finalize(builder.size() - 1);
    std::vector<double> x{a};
    if (nd.num_preds() == 2) x.push_back(b);
    return forward_sweep(probe, x);
}

}  // namespace

TEST_CASE("stored local partials match finite differences of each elemental") {
    std::mt19937_64 rng(11);
    double worst_d1 = 0.0, worst_d2 = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        RandomProgram rp = random_program(rng, 6, 30);
        forward_sweep(rp.tape, rp.x);
        for (int i = rp.tape.n(); i < rp.tape.size(); ++i) {
            const TapeNode& nd = rp.tape.node(i);
            if (nd.num_preds() == 0) continue;
            const double a = rp.tape.node(nd.pred[0]).value;
            const double b = nd.num_preds() == 2 ? rp.tape.node(nd.pred[1]).value : 0.0;

            const double h1a = 1e-6 * std::max(1.0, std::abs(a));
            const double fd_da =
                (eval_elemental(nd, a + h1a, b) - eval_elemental(nd, a - h1a, b)) / (2 * h1a);
            worst_d1 = std::max(worst_d1, std::abs(fd_da - nd.d1[0]) / std::max(1.0, std::abs(nd.d1[0])));

            const double h2a = 1e-4 * std::max(1.0, std::abs(a));
            const double fd_daa = (eval_elemental(nd, a + h2a, b) - 2 * eval_elemental(nd, a, b) +
                                   eval_elemental(nd, a - h2a, b)) /
                                  (h2a * h2a);
            worst_d2 = std::max(worst_d2, std::abs(fd_daa - nd.d2[0]) / std::max(1.0, std::abs(nd.d2[0])));

            if (nd.num_preds() == 2) {
                const double h1b = 1e-6 * std::max(1.0, std::abs(b));
                const double fd_db =
                    (eval_elemental(nd, a, b + h1b) - eval_elemental(nd, a, b - h1b)) / (2 * h1b);
                worst_d1 =
                    std::max(worst_d1, std::abs(fd_db - nd.d1[1]) / std::max(1.0, std::abs(nd.d1[1])));

                const double h2b = 1e-4 * std::max(1.0, std::abs(b));
                const double fd_dbb = (eval_elemental(nd, a, b + h2b) - 2 * eval_elemental(nd, a, b) +
                                       eval_elemental(nd, a, b - h2b)) /
                                      (h2b * h2b);
                const double fd_dab =
                    (eval_elemental(nd, a + h2a, b + h2b) - eval_elemental(nd, a + h2a, b - h2b) -
                     eval_elemental(nd, a - h2a, b + h2b) + eval_elemental(nd, a - h2a, b - h2b)) /
                    (4 * h2a * h2b);
                worst_d2 =
                    std::max(worst_d2, std::abs(fd_dbb - nd.d2[2]) / std::max(1.0, std::abs(nd.d2[2])));
                worst_d2 =
                    std::max(worst_d2, std::abs(fd_dab - nd.d2[1]) / std::max(1.0, std::abs(nd.d2[1])));
            }
        }
    }
    CHECK(worst_d1 <= 1e-6);
    CHECK(worst_d2 <= 1e-4);
}

TEST_CASE("tape serialization round-trips") {
    Tape t = fixtures::exp_poly_tape();
    std::stringstream ss;
    dump_tape(t, ss);
    Tape back = parse_tape(ss);
    REQUIRE(back.n() == t.n());
    REQUIRE(back.size() == t.size());
    for (int i = 0; i < t.size(); ++i) {
        REQUIRE(back.node(i).op == t.node(i).op);
        REQUIRE(back.node(i).pred[0] == t.node(i).pred[0]);
        REQUIRE(back.node(i).pred[1] == t.node(i).pred[1]);
        REQUIRE(back.node(i).payload == t.node(i).payload);
    }
    const double x[] = {1.0, 0.0, 2.0};
    REQUIRE(forward_sweep(back, x) == 8.0);
}

TEST_CASE("tape parser rejects malformed input") {
    std::stringstream bad1("0 input\n2 sin 0\n");
    REQUIRE_THROWS_AS(parse_tape(bad1), RecordError);
    std::stringstream bad2("0 input\n1 frobnicate 0\n");
    REQUIRE_THROWS_AS(parse_tape(bad2), RecordError);
    std::stringstream bad3("0 sin 0\n");
    REQUIRE_THROWS_AS(parse_tape(bad3), RecordError);
    std::stringstream bad4("0 input\n");  // no intermediates
    REQUIRE_THROWS_AS(parse_tape(bad4), RecordError);
}

TEST_CASE("builder rejects degenerate programs") {
    REQUIRE_THROWS_AS(TapeBuilder(0), RecordError);
    TapeBuilder b(1);
    REQUIRE_THROWS_AS(b.add_node(Op::Sin, 3), RecordError);
    REQUIRE_THROWS_AS(b.finalize(-1), RecordError);
}
