#pragma once

// Reverse gradient sweep: one backward pass distributing adjoints to
// predecessors, yielding dbar f/dbar v_i for every node.

#include <cstdint>
#include <vector>

#include "hesscraft/tape.hpp"

namespace hesscraft {

/// Adjoints vbar over all n+ell nodes. At termination vbar[i] equals the sum
/// over all directed paths i -> output of the product of arc weights.
struct AdjointVector {
    std::vector<double> vbar;
};

struct GradientResult {
    std::vector<double> gradient;  // vbar restricted to the inputs
    AdjointVector adjoints;
};

struct GradientStats {
    std::int64_t node_visits = 0;
    std::int64_t multiply_adds = 0;
};

/// Backward sweep over a swept tape. Adjoints of swept nodes are kept (not
/// zeroed): later iterations never read them, and downstream passes need the
/// intermediate values. Predecessors accumulate in slot order for
/// reproducible floating point.
inline GradientResult reverse_gradient(const Tape& tape, GradientStats* stats = nullptr) {
    tape.require_swept();
    GradientResult out;
    out.adjoints.vbar.assign(static_cast<std::size_t>(tape.size()), 0.0);
    std::vector<double>& vbar = out.adjoints.vbar;
    vbar.back() = 1.0;

    for (int i = tape.size() - 1; i >= tape.n(); --i) {
        const TapeNode& nd = tape.node(i);
        const double vb = vbar[static_cast<std::size_t>(i)];
        for (int k = 0; k < nd.num_preds(); ++k) {
            vbar[static_cast<std::size_t>(nd.pred[k])] += vb * nd.d1[k];
            if (stats) ++stats->multiply_adds;
        }
        if (stats) ++stats->node_visits;
    }

    out.gradient.assign(vbar.begin(), vbar.begin() + tape.n());
    return out;
}

}  // namespace hesscraft
