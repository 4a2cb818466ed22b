#pragma once

// Small tape programs shared across the suites.

#include "hesscraft/tape.hpp"

namespace fixtures {

// f(x0, x1) = (x0 * x1) * (x0 + x1); Hessian [[2*x1, 2*x0 + 2*x1], [., 2*x0]]
// Statements pin the node creation order; operand order inside one full
// expression is up to the compiler.
inline hesscraft::Tape product_sum_tape() {
    using hesscraft::Var;
    return hesscraft::record(2, [](std::span<const Var> x) {
        Var prod = x[0] * x[1];
        Var sum = x[0] + x[1];
        return prod * sum;
    });
}

// f(x0, x1, x2) = (x0 + e^x1) * (3*x1 + x2^2); at (1,0,2) the Hessian is
// [[0,3,4],[3,10,4],[4,4,4]] with a structural zero at (0,0)
inline hesscraft::Tape exp_poly_tape() {
    using hesscraft::Var;
    return hesscraft::record(3, [](std::span<const Var> x) {
        Var e = exp(x[1]);
        Var left = x[0] + e;
        Var scaled = 3.0 * x[1];
        Var squared = sqr(x[2]);
        Var right = scaled + squared;
        return left * right;
    });
}

// f(x0, x1) = 3*x0 + x1 - 7; constant gradient, identically zero Hessian
inline hesscraft::Tape linear_tape() {
    using hesscraft::Var;
    return hesscraft::record(2, [](std::span<const Var> x) { return 3.0 * x[0] + x[1] - 7.0; });
}

}  // namespace fixtures
