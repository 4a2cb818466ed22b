#pragma once

// Random tape generation over safe elemental domains and the oracle
// cross-validation loop: edge pushing against the dense nested recurrence,
// path enumeration, finite differences, Hessian-vector products, and the
// per-sweep structural invariants.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

#include "hesscraft/edge_pushing.hpp"
#include "hesscraft/gradient.hpp"
#include "hesscraft/graph_model.hpp"
#include "hesscraft/oracles.hpp"
#include "hesscraft/sparse.hpp"
#include "hesscraft/tape.hpp"

namespace hesscraft {

struct RandomProgram {
    Tape tape;
    std::vector<double> x;
};

namespace detail {

// Largest local partial of a candidate elemental, via a one-node probe tape.
// Keeps the generator honest about what counts as a well-conditioned node
// without duplicating the derivative formulas.
inline double max_local_partial(Op op, double payload, double a, double b) {
    TapeBuilder pb(arity(op) == 2 ? 2 : 1);
    pb.add_node(op, 0, arity(op) == 2 ? 1 : -1, payload);
    Tape probe = pb.finalize(pb.size() - 1);
    std::vector<double> px{a};
    if (arity(op) == 2) px.push_back(b);
    forward_sweep(probe, px);
    const TapeNode& nd = probe.node(probe.output());
    double m = 0.0;
    for (int k = 0; k < nd.num_preds(); ++k) m = std::max(m, std::abs(nd.d1[k]));
    const int slots = nd.num_preds() == 2 ? 3 : 1;
    for (int s = 0; s < slots; ++s) m = std::max(m, std::abs(nd.d2[s]));
    return m;
}

}  // namespace detail

/// Random tape with 1..max_n inputs and up to max_ell intermediates, built so
/// that every node stays finite, bounded, and clear of domain edges at x
/// (margins wide enough for finite-difference probing).
inline RandomProgram random_program(std::mt19937_64& rng, int max_n, int max_ell) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_n));
    const int ell_target = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_ell));

    RandomProgram out;
    out.x.resize(static_cast<std::size_t>(n));
    for (double& xi : out.x) xi = 0.6 + 0.8 * unit(rng);

    TapeBuilder b(n);
    std::vector<double> val(out.x);
    constexpr double kValueBound = 8.0;
    constexpr double kDomainMargin = 0.25;

    static constexpr Op kMenu[] = {Op::Add, Op::Sub,    Op::Mul,  Op::Div,      Op::Neg,
                                   Op::Scale, Op::AddConst, Op::Sin,  Op::Cos,      Op::Exp,
                                   Op::Ln,    Op::Sqrt,     Op::Square, Op::PowConst, Op::Tanh};

    // Nodes not consumed yet. Drawing predecessors mostly from here keeps the
    // final node's ancestor cone large, so little survives dead-code removal.
    std::vector<int> sinks;
    const auto draw_pred = [&](int live) {
        if (!sinks.empty() && rng() % 8 != 0)
            return sinks[rng() % sinks.size()];
        return static_cast<int>(rng() % static_cast<std::uint64_t>(live));
    };
    const auto consume = [&](int id) {
        for (std::size_t k = 0; k < sinks.size(); ++k)
            if (sinks[k] == id) {
                sinks[k] = sinks.back();
                sinks.pop_back();
                return;
            }
    };

    for (int created = 0; created < ell_target; ++created) {
        const int live = b.size();
        bool placed = false;
        Op placed_op = Op::Scale;
        int placed_a = -1, placed_b = -1;
        for (int attempt = 0; attempt < 32 && !placed; ++attempt) {
            const Op op = kMenu[rng() % std::size(kMenu)];
            int ia = draw_pred(live);
            int ib = draw_pred(live);
            if (arity(op) == 2 && ia == ib) continue;
            const double a = val[static_cast<std::size_t>(ia)];
            const double bb = val[static_cast<std::size_t>(ib)];

            double payload = 0.0;
            double v = 0.0;
            switch (op) {
                case Op::Add: v = a + bb; break;
                case Op::Sub: v = a - bb; break;
                case Op::Mul: v = a * bb; break;
                case Op::Div:
                    if (std::abs(bb) < kDomainMargin) continue;
                    v = a / bb;
                    break;
                case Op::Neg: v = -a; break;
                case Op::Scale:
                    payload = (0.25 + 1.75 * unit(rng)) * (rng() % 2 ? 1.0 : -1.0);
                    v = payload * a;
                    break;
                case Op::AddConst:
                    payload = -2.0 + 4.0 * unit(rng);
                    v = a + payload;
                    break;
                case Op::Sin: v = std::sin(a); break;
                case Op::Cos: v = std::cos(a); break;
                case Op::Exp:
                    if (a > 2.0) continue;
                    v = std::exp(a);
                    break;
                case Op::Ln:
                    if (a < kDomainMargin) continue;
                    v = std::log(a);
                    break;
                case Op::Sqrt:
                    if (a < kDomainMargin) continue;
                    v = std::sqrt(a);
                    break;
                case Op::Square: v = a * a; break;
                case Op::PowConst: {
                    static constexpr double kExps[] = {-1.0, 0.5, 1.5, 2.0, 3.0};
                    payload = kExps[rng() % std::size(kExps)];
                    if (a < kDomainMargin) continue;  // keep away from poles and branch points
                    v = std::pow(a, payload);
                    break;
                }
                case Op::Tanh: v = std::tanh(a); break;
                default: continue;
            }
            if (!std::isfinite(v) || std::abs(v) > kValueBound) continue;
            // steep local partials compound into third derivatives that
            // drown the finite-difference oracle; keep nodes well conditioned
            if (detail::max_local_partial(op, payload, a, bb) > 12.0) continue;
            b.add_node(op, ia, arity(op) == 2 ? ib : -1, payload);
            val.push_back(v);
            placed = true;
            placed_op = op;
            placed_a = ia;
            placed_b = ib;
        }
        if (!placed) {  // always-valid shrinking fallback
            placed_a = draw_pred(live);
            b.add_node(Op::Scale, placed_a, -1, 0.5);
            val.push_back(0.5 * val[static_cast<std::size_t>(placed_a)]);
            placed_op = Op::Scale;
        }
        consume(placed_a);
        if (arity(placed_op) == 2) consume(placed_b);
        sinks.push_back(b.size() - 1);
    }
    out.tape = b.finalize(b.size() - 1);
    return out;
}

struct CrosscheckConfig {
    int trials = 1000;
    int max_n = 8;
    int max_ell = 40;
    std::uint64_t seed = 0x0715A55EDULL;
    int hvp_trials = 200;
    int shuffle_trials = 100;
    int path_node_cap = 25;
};

struct CrosscheckReport {
    int trials = 0;
    int path_checked = 0;
    int adjoint_checked = 0;
    int hvp_checked = 0;
    int shuffle_checked = 0;
    double max_dense = 0.0;
    double max_path = 0.0;
    double max_fd_hess = 0.0;
    double max_fd_grad = 0.0;
    double max_adjoint = 0.0;
    double max_hvp = 0.0;
    double max_shuffle = 0.0;
    std::int64_t symmetry_violations = 0;
    std::int64_t support_violations = 0;
    std::int64_t adjoint_mismatches = 0;  // edge pushing vs reverse gradient, bitwise

    double worst_oracle_discrepancy() const { return std::max(max_dense, max_path); }
};

struct CrosscheckTolerances {
    double dense = 1e-9;
    double path = 1e-9;
    double fd_hess = 1e-4;
    double fd_grad = 1e-5;
    double adjoint = 1e-12;
    double hvp = 1e-10;
    double shuffle = 1e-12;
};

inline bool crosscheck_passed(const CrosscheckReport& r, const CrosscheckTolerances& tol = {}) {
    return r.max_dense <= tol.dense && r.max_path <= tol.path && r.max_fd_hess <= tol.fd_hess &&
           r.max_fd_grad <= tol.fd_grad && r.max_adjoint <= tol.adjoint && r.max_hvp <= tol.hvp &&
           r.max_shuffle <= tol.shuffle && r.symmetry_violations == 0 && r.support_violations == 0 &&
           r.adjoint_mismatches == 0;
}

inline CrosscheckReport run_crosscheck(const CrosscheckConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    CrosscheckReport rep;

    for (int trial = 0; trial < cfg.trials; ++trial) {
        RandomProgram rp = random_program(rng, cfg.max_n, cfg.max_ell);
        Tape& tape = rp.tape;
        forward_sweep(tape, rp.x);
        const int n = tape.n();

        const GradientResult grad = reverse_gradient(tape);

        // gradient against central differences of the function value
        {
            Tape scratch = tape;
            std::vector<double> xp = rp.x;
            double scale = 1.0;
            for (double g : grad.gradient) scale = std::max(scale, std::abs(g));
            for (int k = 0; k < n; ++k) {
                const double h = 1e-6 * std::max(1.0, std::abs(rp.x[static_cast<std::size_t>(k)]));
                xp[static_cast<std::size_t>(k)] = rp.x[static_cast<std::size_t>(k)] + h;
                const double fp = forward_sweep(scratch, xp);
                xp[static_cast<std::size_t>(k)] = rp.x[static_cast<std::size_t>(k)] - h;
                const double fm = forward_sweep(scratch, xp);
                xp[static_cast<std::size_t>(k)] = rp.x[static_cast<std::size_t>(k)];
                const double fd = (fp - fm) / (2.0 * h);
                rep.max_fd_grad = std::max(
                    rep.max_fd_grad, std::abs(fd - grad.gradient[static_cast<std::size_t>(k)]) / scale);
            }
        }

        // edge pushing with per-sweep invariant checks
        const SweepObserver observer = [&](int node, const SparseSymAccumulator& acc,
                                           std::span<const double>) {
            if (!acc.mirror_consistent()) ++rep.symmetry_violations;
            if (acc.max_live_endpoint() >= node) ++rep.support_violations;
        };
        const EdgePushingResult ep = edge_pushing_hessian(tape, {}, observer);

        if (ep.adjoints.vbar.size() != grad.adjoints.vbar.size() ||
            std::memcmp(ep.adjoints.vbar.data(), grad.adjoints.vbar.data(),
                        ep.adjoints.vbar.size() * sizeof(double)) != 0)
            ++rep.adjoint_mismatches;

        rep.max_dense = std::max(rep.max_dense, scaled_discrepancy(ep.hessian, dense_hessian_nested(tape)));
        // fuzz tapes have bounded values and gradients, so the difference
        // step can sit well below the general-purpose default before
        // round-off costs anything; truncation is what limits accuracy here
        rep.max_fd_hess =
            std::max(rep.max_fd_hess, scaled_discrepancy(ep.hessian, fd_hessian(tape, rp.x, 2e-6)));

        if (tape.size() <= cfg.path_node_cap) {
            const FoldedGradientGraph folded = build_folded_graph(tape, grad.adjoints);
            rep.max_path = std::max(
                rep.max_path,
                scaled_discrepancy(ep.hessian, path_enumeration_hessian(folded, cfg.path_node_cap)));
            ++rep.path_checked;

            for (int i = 0; i < tape.size(); ++i) {
                const double sum = path_weight_sum(tape, i, tape.output());
                const double vb = grad.adjoints.vbar[static_cast<std::size_t>(i)];
                rep.max_adjoint =
                    std::max(rep.max_adjoint, std::abs(sum - vb) / std::max(1.0, std::abs(vb)));
            }
            ++rep.adjoint_checked;
        }

        if (rep.hvp_checked < cfg.hvp_trials) {
            std::vector<double> e(static_cast<std::size_t>(n), 0.0);
            const double scale = std::max(1.0, ep.hessian.max_abs());
            for (int k = 0; k < n; ++k) {
                e[static_cast<std::size_t>(k)] = 1.0;
                const std::vector<double> col = hessian_vector_product(tape, e);
                e[static_cast<std::size_t>(k)] = 0.0;
                for (int r = 0; r < n; ++r)
                    rep.max_hvp = std::max(rep.max_hvp,
                                           std::abs(col[static_cast<std::size_t>(r)] -
                                                    ep.hessian.value_at(r, k)) /
                                               scale);
            }
            ++rep.hvp_checked;
        }

        if (rep.shuffle_checked < cfg.shuffle_trials) {
            EdgePushingOptions opts;
            opts.shuffle_seed = rng();
            const EdgePushingResult shuffled = edge_pushing_hessian(tape, opts);
            rep.max_shuffle = std::max(rep.max_shuffle, scaled_discrepancy(ep.hessian, shuffled.hessian));
            ++rep.shuffle_checked;
        }

        ++rep.trials;
    }
    return rep;
}

}  // namespace hesscraft
