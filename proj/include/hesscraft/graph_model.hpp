#pragma once

// Gradient-graph view of second derivatives: the folded gradient graph with
// its undirected nonlinear arcs, an exhaustive tri-parted path oracle, the
// unfolded mirror construction for debugging, and DOT rendering.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hesscraft/edge_pushing.hpp"
#include "hesscraft/gradient.hpp"
#include "hesscraft/sparse.hpp"
#include "hesscraft/tape.hpp"

namespace hesscraft {

struct DirectedArc {
    std::int32_t from;
    std::int32_t to;
    double weight;
};

struct NonlinearArc {
    std::int32_t a;  // a <= b; a == b is a loop
    std::int32_t b;
    double weight;
};

/// The gradient computational graph folded back onto the original nodes:
/// the original arcs plus undirected nonlinear arcs carrying curvature.
struct FoldedGradientGraph {
    int n = 0;
    int total = 0;  // n + ell
    std::vector<DirectedArc> arcs;
    std::vector<NonlinearArc> nonlinear;
};

/// Nonlinear arc {j,i} weight: sum over common successors k of
/// vbar_k * d2 phi_k / dv_j dv_i. Arcs that are structurally zero for every
/// point are omitted; incidental zeros are kept.
inline FoldedGradientGraph build_folded_graph(const Tape& tape, const AdjointVector& adjoints) {
    tape.require_swept();
    if (adjoints.vbar.size() != static_cast<std::size_t>(tape.size()))
        throw std::invalid_argument("adjoint vector does not match tape");

    FoldedGradientGraph g;
    g.n = tape.n();
    g.total = tape.size();

    std::map<std::pair<int, int>, double> nl;
    for (int i = tape.n(); i < tape.size(); ++i) {
        const TapeNode& nd = tape.node(i);
        for (int k = 0; k < nd.num_preds(); ++k)
            g.arcs.push_back(DirectedArc{nd.pred[k], static_cast<std::int32_t>(i), nd.d1[k]});

        const double vb = adjoints.vbar[static_cast<std::size_t>(i)];
        const auto touch = [&](int a, int b, double w) {
            if (a > b) std::swap(a, b);
            nl[{a, b}] += w;
        };
        if (nd.num_preds() == 1) {
            if (d2_structural(nd, 0)) touch(nd.pred[0], nd.pred[0], vb * nd.d2[0]);
        } else if (nd.num_preds() == 2) {
            if (d2_structural(nd, 0)) touch(nd.pred[0], nd.pred[0], vb * nd.d2[0]);
            if (d2_structural(nd, 1)) touch(nd.pred[0], nd.pred[1], vb * nd.d2[1]);
            if (d2_structural(nd, 2)) touch(nd.pred[1], nd.pred[1], vb * nd.d2[2]);
        }
    }
    for (const auto& [key, w] : nl)
        g.nonlinear.push_back(NonlinearArc{static_cast<std::int32_t>(key.first),
                                           static_cast<std::int32_t>(key.second), w});
    return g;
}

namespace detail {

struct PathBudget {
    std::int64_t steps = 0;
    std::int64_t limit = 50'000'000;
    void tick() {
        if (++steps > limit) throw std::invalid_argument("path enumeration budget exceeded");
    }
};

inline void enumerate_paths(const std::vector<std::vector<std::pair<int, double>>>& out, int cur,
                            double weight, std::vector<double>& sums, PathBudget& budget) {
    budget.tick();
    sums[static_cast<std::size_t>(cur)] += weight;
    for (const auto& [next, c] : out[static_cast<std::size_t>(cur)])
        enumerate_paths(out, next, weight * c, sums, budget);
}

inline std::vector<std::vector<std::pair<int, double>>> out_adjacency(
    std::span<const DirectedArc> arcs, int total) {
    std::vector<std::vector<std::pair<int, double>>> out(static_cast<std::size_t>(total));
    for (const DirectedArc& a : arcs) out[static_cast<std::size_t>(a.from)].emplace_back(a.to, a.weight);
    return out;
}

}  // namespace detail

/// Exhaustive-DFS sum of directed path weights from `from` to `to` on the
/// original graph; the empty path counts 1 when from == to.
inline double path_weight_sum(const Tape& tape, int from, int to) {
    tape.require_swept();
    std::vector<DirectedArc> arcs;
    for (int i = tape.n(); i < tape.size(); ++i) {
        const TapeNode& nd = tape.node(i);
        for (int k = 0; k < nd.num_preds(); ++k)
            arcs.push_back(DirectedArc{nd.pred[k], static_cast<std::int32_t>(i), nd.d1[k]});
    }
    const auto out = detail::out_adjacency(arcs, tape.size());
    std::vector<double> sums(static_cast<std::size_t>(tape.size()), 0.0);
    detail::PathBudget budget;
    detail::enumerate_paths(out, from, 1.0, sums, budget);
    return sums[static_cast<std::size_t>(to)];
}

/// Hessian by tri-parted paths: a directed path from independent i to r, one
/// nonlinear arc {r,s}, and a reversed directed path from s back to
/// independent j. Both orientations of a non-loop arc contribute; a loop is
/// its own mirror and enters once.
inline SparseHessian path_enumeration_hessian(const FoldedGradientGraph& g, int node_cap = 25) {
    if (g.total > node_cap)
        throw std::invalid_argument("graph too large for exhaustive path enumeration");

    const auto out = detail::out_adjacency(g.arcs, g.total);
    std::vector<std::vector<double>> reach(static_cast<std::size_t>(g.n));
    detail::PathBudget budget;
    for (int i = 0; i < g.n; ++i) {
        reach[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(g.total), 0.0);
        detail::enumerate_paths(out, i, 1.0, reach[static_cast<std::size_t>(i)], budget);
    }

    std::vector<HessianEntry> entries;
    for (int r = 0; r < g.n; ++r)
        for (int c = 0; c <= r; ++c) {
            double sum = 0.0;
            for (const NonlinearArc& arc : g.nonlinear) {
                const double fwd = reach[static_cast<std::size_t>(r)][static_cast<std::size_t>(arc.a)] *
                                   reach[static_cast<std::size_t>(c)][static_cast<std::size_t>(arc.b)];
                if (arc.a == arc.b) {
                    sum += fwd * arc.weight;
                } else {
                    const double rev = reach[static_cast<std::size_t>(r)][static_cast<std::size_t>(arc.b)] *
                                       reach[static_cast<std::size_t>(c)][static_cast<std::size_t>(arc.a)];
                    sum += (fwd + rev) * arc.weight;
                }
            }
            if (sum != 0.0)
                entries.push_back(HessianEntry{static_cast<std::int32_t>(r), static_cast<std::int32_t>(c), sum});
        }
    return SparseHessian(g.n, std::move(entries));
}

/// Unfolded gradient graph G^g (debug construction). Adjoint node of i is
/// base + i. A1 are the original arcs, A2 their reversed mirror images with
/// equal weights, A3 the mixed arcs whose weights are second derivatives.
struct GradientGraph {
    int n = 0;
    int base = 0;  // n + ell; node count is 2 * base
    std::vector<DirectedArc> original;
    std::vector<DirectedArc> mirrored;
    std::vector<DirectedArc> nonlinear;
};

inline GradientGraph build_gradient_graph(const Tape& tape, const AdjointVector& adjoints) {
    const FoldedGradientGraph folded = build_folded_graph(tape, adjoints);
    GradientGraph g;
    g.n = tape.n();
    g.base = tape.size();
    g.original = folded.arcs;
    for (const DirectedArc& a : folded.arcs)
        g.mirrored.push_back(
            DirectedArc{static_cast<std::int32_t>(g.base + a.to), static_cast<std::int32_t>(g.base + a.from), a.weight});
    for (const NonlinearArc& arc : folded.nonlinear) {
        g.nonlinear.push_back(DirectedArc{arc.a, static_cast<std::int32_t>(g.base + arc.b), arc.weight});
        if (arc.a != arc.b)
            g.nonlinear.push_back(DirectedArc{arc.b, static_cast<std::int32_t>(g.base + arc.a), arc.weight});
    }
    return g;
}

// ---------------------------------------------------------------------------
// DOT rendering. Deterministic node order; directed arcs solid with weight
// labels, nonlinear arcs dashed and undirected.

namespace detail {

inline std::string node_label(const Tape& tape, int i) {
    char buf[64];
    if (i < tape.n())
        std::snprintf(buf, sizeof buf, "x%d", i + 1);
    else
        std::snprintf(buf, sizeof buf, "v%d:%s", i - tape.n() + 1, std::string(op_name(tape.node(i).op)).c_str());
    return buf;
}

inline std::string weight_label(double w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", w);
    return buf;
}

}  // namespace detail

inline std::string tape_to_dot(const Tape& tape) {
    std::string dot = "digraph tape {\n  rankdir=BT;\n";
    for (int i = 0; i < tape.size(); ++i)
        dot += "  n" + std::to_string(i) + " [label=\"" + detail::node_label(tape, i) + "\"];\n";
    for (int i = tape.n(); i < tape.size(); ++i) {
        const TapeNode& nd = tape.node(i);
        for (int k = 0; k < nd.num_preds(); ++k) {
            dot += "  n" + std::to_string(nd.pred[k]) + " -> n" + std::to_string(i);
            if (tape.swept()) dot += " [label=\"" + detail::weight_label(nd.d1[k]) + "\"]";
            dot += ";\n";
        }
    }
    dot += "}\n";
    return dot;
}

inline std::string folded_graph_to_dot(const Tape& tape, const FoldedGradientGraph& g) {
    std::string dot = "digraph folded_gradient {\n  rankdir=BT;\n";
    for (int i = 0; i < g.total; ++i)
        dot += "  n" + std::to_string(i) + " [label=\"" + detail::node_label(tape, i) + "\"];\n";
    for (const DirectedArc& a : g.arcs)
        dot += "  n" + std::to_string(a.from) + " -> n" + std::to_string(a.to) + " [label=\"" +
               detail::weight_label(a.weight) + "\"];\n";
    for (const NonlinearArc& arc : g.nonlinear)
        dot += "  n" + std::to_string(arc.a) + " -> n" + std::to_string(arc.b) +
               " [dir=none, style=dashed, label=\"" + detail::weight_label(arc.weight) + "\"];\n";
    dot += "}\n";
    return dot;
}

/// Accumulator state after the backward sweep has processed nodes down to and
/// including `stop_node`: live nonlinear arcs dashed, consumed arcs optionally
/// kept in gray. Adjoint values annotate the nodes reached so far.
inline std::string sweep_state_to_dot(const Tape& tape, int stop_node, bool keep_pushed) {
    tape.require_swept();
    if (stop_node < tape.n() || stop_node >= tape.size())
        throw std::invalid_argument("sweep snapshot node out of range");

    struct Snapshot {
        std::vector<NonlinearArc> live;
        std::vector<double> vbar;
        bool taken = false;
    } snap;

    EdgePushingOptions opts;
    opts.record_retired = keep_pushed;
    const SweepObserver observer = [&](int node, const SparseSymAccumulator& acc,
                                       std::span<const double> vbar) {
        if (node != stop_node) return;
        for (int i = 0; i < acc.num_nodes(); ++i)
            acc.visit(i, [&](int nbr, double w) {
                if (nbr <= i)
                    snap.live.push_back(
                        NonlinearArc{static_cast<std::int32_t>(nbr), static_cast<std::int32_t>(i), w});
            });
        snap.vbar.assign(vbar.begin(), vbar.end());
        snap.taken = true;
    };
    const EdgePushingResult result = edge_pushing_hessian(tape, opts, observer);

    std::string dot = "digraph sweep_state {\n  rankdir=BT;\n";
    for (int i = 0; i < tape.size(); ++i) {
        std::string label = detail::node_label(tape, i);
        // adjoints are final for nodes the sweep has passed; independents and
        // not-yet-swept nodes carry partial sums and stay unannotated
        if (snap.taken && i >= stop_node && snap.vbar[static_cast<std::size_t>(i)] != 0.0)
            label += " vbar=" + detail::weight_label(snap.vbar[static_cast<std::size_t>(i)]);
        dot += "  n" + std::to_string(i) + " [label=\"" + label + "\"];\n";
    }
    for (int i = tape.n(); i < tape.size(); ++i) {
        const TapeNode& nd = tape.node(i);
        for (int k = 0; k < nd.num_preds(); ++k)
            dot += "  n" + std::to_string(nd.pred[k]) + " -> n" + std::to_string(i) + " [label=\"" +
                   detail::weight_label(nd.d1[k]) + "\"];\n";
    }
    std::sort(snap.live.begin(), snap.live.end(), [](const NonlinearArc& a, const NonlinearArc& b) {
        return a.a != b.a ? a.a < b.a : a.b < b.b;
    });
    for (const NonlinearArc& arc : snap.live)
        dot += "  n" + std::to_string(arc.a) + " -> n" + std::to_string(arc.b) +
               " [dir=none, style=dashed, label=\"" + detail::weight_label(arc.weight) + "\"];\n";
    if (keep_pushed)
        for (const RetiredArc& arc : result.retired) {
            if (arc.node < stop_node) continue;  // consumed only up to the snapshot
            const int a = std::min<int>(arc.node, arc.nbr), b = std::max<int>(arc.node, arc.nbr);
            dot += "  n" + std::to_string(a) + " -> n" + std::to_string(b) +
                   " [dir=none, style=dashed, color=gray, fontcolor=gray, label=\"" +
                   detail::weight_label(arc.weight) + "\"];\n";
        }
    dot += "}\n";
    return dot;
}

}  // namespace hesscraft
