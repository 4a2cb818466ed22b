#pragma once

// One-sweep reverse Hessian accumulation on an undirected weighted adjacency
// structure. Each backward iteration pushes the accumulator edges incident to
// the swept node down to its predecessors, creates the node's own curvature
// contributions there, and distributes its adjoint.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "hesscraft/gradient.hpp"
#include "hesscraft/sparse.hpp"
#include "hesscraft/tape.hpp"

namespace hesscraft {

/// Symmetric weighted edge set of the accumulator W, kept as mirrored
/// per-node adjacency lists; a loop is stored once, at its node. Lookup is a
/// linear scan, so insert/find of edge {i,j} costs O(d_i + d_j). Lists live
/// in one cell pool with an intrusive free list, so consuming an edge
/// releases its memory in constant time and sweeps reuse the same cells.
template <class W>
class SymAdjacencyT {
public:
    struct Entry {
        std::int32_t nbr;
        W weight;
    };

    explicit SymAdjacencyT(int num_nodes) : head_(static_cast<std::size_t>(num_nodes), -1) {}

    int num_nodes() const { return static_cast<int>(head_.size()); }

    /// Applies fn(neighbor, weight) to every edge at node i. Insertions at
    /// other nodes during the walk are safe; the list of i itself must not
    /// be modified.
    template <class F>
    void visit(int i, F&& fn) const {
        for (std::int32_t c = head_[static_cast<std::size_t>(i)]; c >= 0; c = cells_[static_cast<std::size_t>(c)].next)
            fn(static_cast<int>(cells_[static_cast<std::size_t>(c)].nbr), cells_[static_cast<std::size_t>(c)].weight);
    }

    /// Materialized copy of node i's list (snapshots and tests).
    std::vector<Entry> entries(int i) const {
        std::vector<Entry> out;
        visit(i, [&](int nbr, W w) { out.push_back(Entry{static_cast<std::int32_t>(nbr), w}); });
        return out;
    }

    /// Adds w onto edge {a,b} (boolean weights accumulate by OR).
    void accumulate(int a, int b, W w) {
        add_half(a, b, w);
        if (a != b) add_half(b, a, w);
    }

    void clear_node(int i) {
        std::int32_t c = head_[static_cast<std::size_t>(i)];
        while (c >= 0) {
            const std::int32_t next = cells_[static_cast<std::size_t>(c)].next;
            const std::int32_t nbr = cells_[static_cast<std::size_t>(c)].nbr;
            if (nbr != i) unlink_half(nbr, static_cast<std::int32_t>(i));
            release_cell(c);
            --live_;
            c = next;
        }
        head_[static_cast<std::size_t>(i)] = -1;
    }

    std::int64_t live_edges() const { return live_; }
    std::int64_t peak_live_edges() const { return peak_; }
    std::int64_t edges_allocated() const { return allocated_; }

    int max_live_endpoint() const {
        for (int i = num_nodes() - 1; i >= 0; --i)
            if (head_[static_cast<std::size_t>(i)] >= 0) return i;
        return -1;
    }

    /// Every non-loop entry has a mirror with an identical weight.
    bool mirror_consistent() const {
        for (int i = 0; i < num_nodes(); ++i) {
            bool ok = true;
            visit(i, [&](int nbr, W w) {
                if (nbr == i) return;
                const std::int32_t mirror = find_cell(nbr, static_cast<std::int32_t>(i));
                if (mirror < 0 || cells_[static_cast<std::size_t>(mirror)].weight != w) ok = false;
            });
            if (!ok) return false;
        }
        return true;
    }

    /// Test hook: permutes list storage order without changing the edge set.
    void shuffle_lists(std::mt19937_64& rng) {
        std::vector<std::int32_t> cells;
        for (std::size_t i = 0; i < head_.size(); ++i) {
            cells.clear();
            for (std::int32_t c = head_[i]; c >= 0; c = cells_[static_cast<std::size_t>(c)].next)
                cells.push_back(c);
            if (cells.size() < 2) continue;
            std::shuffle(cells.begin(), cells.end(), rng);
            head_[i] = cells.front();
            for (std::size_t k = 0; k + 1 < cells.size(); ++k)
                cells_[static_cast<std::size_t>(cells[k])].next = cells[k + 1];
            cells_[static_cast<std::size_t>(cells.back())].next = -1;
        }
    }

private:
    struct Cell {
        std::int32_t nbr;
        std::int32_t next;
        W weight;
    };

    std::int32_t find_cell(int at_node, std::int32_t nbr) const {
        for (std::int32_t c = head_[static_cast<std::size_t>(at_node)]; c >= 0;
             c = cells_[static_cast<std::size_t>(c)].next)
            if (cells_[static_cast<std::size_t>(c)].nbr == nbr) return c;
        return -1;
    }

    void add_half(int at_node, int nbr, W w) {
        const std::int32_t found = find_cell(at_node, static_cast<std::int32_t>(nbr));
        if (found >= 0) {
            if constexpr (std::is_same_v<W, double>)
                cells_[static_cast<std::size_t>(found)].weight += w;
            else
                cells_[static_cast<std::size_t>(found)].weight =
                    cells_[static_cast<std::size_t>(found)].weight || w;
            return;
        }
        std::int32_t c;
        if (free_ >= 0) {
            c = free_;
            free_ = cells_[static_cast<std::size_t>(c)].next;
        } else {
            c = static_cast<std::int32_t>(cells_.size());
            cells_.push_back(Cell{});
        }
        Cell& cell = cells_[static_cast<std::size_t>(c)];
        cell.nbr = static_cast<std::int32_t>(nbr);
        cell.weight = w;
        cell.next = head_[static_cast<std::size_t>(at_node)];
        head_[static_cast<std::size_t>(at_node)] = c;
        if (at_node >= nbr) {  // count each undirected edge once
            ++live_;
            ++allocated_;
            peak_ = std::max(peak_, live_);
        }
    }

    void unlink_half(int at_node, std::int32_t nbr) {
        std::int32_t prev = -1;
        for (std::int32_t c = head_[static_cast<std::size_t>(at_node)]; c >= 0;
             c = cells_[static_cast<std::size_t>(c)].next) {
            if (cells_[static_cast<std::size_t>(c)].nbr == nbr) {
                if (prev < 0)
                    head_[static_cast<std::size_t>(at_node)] = cells_[static_cast<std::size_t>(c)].next;
                else
                    cells_[static_cast<std::size_t>(prev)].next = cells_[static_cast<std::size_t>(c)].next;
                release_cell(c);
                return;
            }
            prev = c;
        }
    }

    void release_cell(std::int32_t c) {
        cells_[static_cast<std::size_t>(c)].next = free_;
        free_ = c;
    }

    std::vector<std::int32_t> head_;
    std::vector<Cell> cells_;
    std::int32_t free_ = -1;
    std::int64_t live_ = 0;
    std::int64_t peak_ = 0;
    std::int64_t allocated_ = 0;
};

using SparseSymAccumulator = SymAdjacencyT<double>;

struct EdgePushingStats {
    std::int64_t edges_allocated = 0;
    std::int64_t peak_live_edges = 0;
};

/// An accumulator edge consumed while sweeping `node` (kept only on request,
/// for visualizing intermediate sweep states).
struct RetiredArc {
    std::int32_t node;
    std::int32_t nbr;
    double weight;
};

struct EdgePushingOptions {
    double drop_tol = 0.0;  // post-pass: drop |w| strictly below; 0 keeps all
    bool record_retired = false;
    std::optional<std::uint64_t> shuffle_seed;  // test hook: reorder lists between sweeps
};

/// Called after each node sweep with the live accumulator and adjoints.
using SweepObserver =
    std::function<void(int node, const SparseSymAccumulator&, std::span<const double> vbar)>;

struct EdgePushingResult {
    SparseHessian hessian;
    AdjointVector adjoints;
    EdgePushingStats stats;
    std::vector<RetiredArc> retired;
};

namespace detail {

struct NumericPolicy {
    using weight = double;
    static constexpr double zero = 0.0;
    static constexpr double one = 1.0;
    static double d1(const TapeNode& nd, int k) { return nd.d1[k]; }
    static double d2(const TapeNode& nd, int slot) { return nd.d2[slot]; }
    static double mul(double a, double b) { return a * b; }
};

struct StructuralPolicy {
    using weight = unsigned char;
    static constexpr unsigned char zero = 0;
    static constexpr unsigned char one = 1;
    static unsigned char d1(const TapeNode& nd, int k) { return d1_structural(nd, k) ? 1 : 0; }
    static unsigned char d2(const TapeNode& nd, int slot) { return d2_structural(nd, slot) ? 1 : 0; }
    static unsigned char mul(unsigned char a, unsigned char b) { return a && b; }
};

template <class P, bool numeric, class W>
inline void push_entry(SymAdjacencyT<W>& acc, int a, int b, W w, int at_node) {
    if constexpr (numeric) {
        if (!std::isfinite(w)) throw EvalError("non-finite accumulator weight", at_node);
    }
    acc.accumulate(a, b, w);
}

// The sweep body shared by the numeric Hessian and the structural pattern.
// Insertion is gated on structural activity so incidental numeric zeros stay
// as explicit entries.
template <class P>
void edge_pushing_sweep(const Tape& tape, SymAdjacencyT<typename P::weight>& acc,
                        std::vector<typename P::weight>& vbar,
                        const EdgePushingOptions* opts = nullptr,
                        const SweepObserver* observer = nullptr,
                        std::vector<RetiredArc>* retired = nullptr) {
    using W = typename P::weight;
    constexpr bool numeric = std::is_same_v<P, NumericPolicy>;

    vbar.assign(static_cast<std::size_t>(tape.size()), P::zero);
    vbar.back() = P::one;

    std::optional<std::mt19937_64> shuffle_rng;
    if constexpr (numeric) {
        if (opts && opts->shuffle_seed) shuffle_rng.emplace(*opts->shuffle_seed);
    }

    for (int i = tape.size() - 1; i >= tape.n(); --i) {
        const TapeNode& nd = tape.node(i);
        const int np = nd.num_preds();
        const W c0 = np >= 1 ? P::d1(nd, 0) : P::zero;
        const W c1 = np == 2 ? P::d1(nd, 1) : P::zero;
        const bool a0 = np >= 1 && d1_structural(nd, 0);
        const bool a1 = np == 2 && d1_structural(nd, 1);
        const int j0 = np >= 1 ? nd.pred[0] : -1;
        const int j1 = np == 2 ? nd.pred[1] : -1;

        // pushing: each edge {i,p} turns into shortcuts at i's predecessors
        acc.visit(i, [&](int p, W w) {
            if (p == i) {
                // loop at i: split over predecessor pairs, squares on the diagonal
                if (a0) push_entry<P, numeric>(acc, j0, j0, P::mul(P::mul(c0, c0), w), i);
                if (a0 && a1) push_entry<P, numeric>(acc, j0, j1, P::mul(P::mul(c0, c1), w), i);
                if (a1) push_entry<P, numeric>(acc, j1, j1, P::mul(P::mul(c1, c1), w), i);
                return;
            }
            for (int k = 0; k < np; ++k) {
                if (!(k == 0 ? a0 : a1)) continue;
                const int j = nd.pred[k];
                const W c = k == 0 ? c0 : c1;
                if (j == p) {
                    // the pushed endpoint lands on a predecessor: loop with factor 2
                    W contrib = P::mul(c, w);
                    if constexpr (numeric) contrib *= 2.0;
                    push_entry<P, numeric>(acc, p, p, contrib, i);
                } else {
                    push_entry<P, numeric>(acc, j, p, P::mul(c, w), i);
                }
            }
        });
        if constexpr (numeric) {
            if (retired)
                acc.visit(i, [&](int nbr, W w) {
                    retired->push_back(RetiredArc{static_cast<std::int32_t>(i),
                                                  static_cast<std::int32_t>(nbr), w});
                });
        }
        acc.clear_node(i);

        // creating: the node's own second partials, scaled by its adjoint
        const W vb = vbar[static_cast<std::size_t>(i)];
        if constexpr (!numeric) {
            if (vb) {
                if (np == 1 && d2_structural(nd, 0)) acc.accumulate(j0, j0, P::one);
                if (np == 2) {
                    if (d2_structural(nd, 0)) acc.accumulate(j0, j0, P::one);
                    if (d2_structural(nd, 1)) acc.accumulate(j0, j1, P::one);
                    if (d2_structural(nd, 2)) acc.accumulate(j1, j1, P::one);
                }
            }
        } else {
            if (np == 1 && d2_structural(nd, 0))
                push_entry<P, numeric>(acc, j0, j0, vb * nd.d2[0], i);
            if (np == 2) {
                if (d2_structural(nd, 0)) push_entry<P, numeric>(acc, j0, j0, vb * nd.d2[0], i);
                if (d2_structural(nd, 1)) push_entry<P, numeric>(acc, j0, j1, vb * nd.d2[1], i);
                if (d2_structural(nd, 2)) push_entry<P, numeric>(acc, j1, j1, vb * nd.d2[2], i);
            }
        }

        // adjoint: same arithmetic and order as reverse_gradient
        for (int k = 0; k < np; ++k) {
            if constexpr (numeric)
                vbar[static_cast<std::size_t>(nd.pred[k])] += vb * nd.d1[k];
            else
                vbar[static_cast<std::size_t>(nd.pred[k])] =
                    vbar[static_cast<std::size_t>(nd.pred[k])] || P::mul(vb, P::d1(nd, k));
        }

        if constexpr (numeric) {
            if (observer && *observer) (*observer)(i, acc, vbar);
            if (shuffle_rng) acc.shuffle_lists(*shuffle_rng);
        }
    }
}

template <class W>
SparseHessian extract_independent_block(const SymAdjacencyT<W>& acc, int n, double drop_tol) {
    std::vector<HessianEntry> entries;
    for (int i = 0; i < n; ++i) {
        acc.visit(i, [&](int nbr, W w) {
            if (nbr > i) return;  // non-loop edges appear in both lists
            double v;
            if constexpr (std::is_same_v<W, double>)
                v = w;
            else
                v = w ? 1.0 : 0.0;
            if (std::abs(v) < drop_tol) return;
            entries.push_back(
                HessianEntry{static_cast<std::int32_t>(i), static_cast<std::int32_t>(nbr), v});
        });
    }
    return SparseHessian(n, std::move(entries));
}

}  // namespace detail

/// Sparse symmetric Hessian of a swept tape in a single backward sweep.
inline EdgePushingResult edge_pushing_hessian(const Tape& tape, const EdgePushingOptions& opts = {},
                                              const SweepObserver& observer = {}) {
    tape.require_swept();
    EdgePushingResult out;
    SparseSymAccumulator acc(tape.size());
    std::vector<double> vbar;
    detail::edge_pushing_sweep<detail::NumericPolicy>(tape, acc, vbar, &opts, &observer,
                                                      opts.record_retired ? &out.retired : nullptr);
    out.hessian = detail::extract_independent_block(acc, tape.n(), opts.drop_tol);
    out.adjoints.vbar = std::move(vbar);
    out.stats.edges_allocated = acc.edges_allocated();
    out.stats.peak_live_edges = acc.peak_live_edges();
    return out;
}

/// Point-free sparsity pattern: the same sweep over presence flags. An entry
/// appears iff some pushing/creating chain reaches it with structurally
/// nonzero elemental derivatives. Values are all 1.
inline SparseHessian structural_pattern(const Tape& tape) {
    SymAdjacencyT<unsigned char> acc(tape.size());
    std::vector<unsigned char> vbar;
    detail::edge_pushing_sweep<detail::StructuralPolicy>(tape, acc, vbar);
    return detail::extract_independent_block(acc, tape.n(), 0.0);
}

}  // namespace hesscraft
