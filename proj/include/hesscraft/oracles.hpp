#pragma once

// Independent ground-truth Hessian computations used to verify the
// edge-pushing sweep: a dense nested state-transformation recurrence, central
// finite differences of the reverse gradient, and an exact Hessian-vector
// product by second-order adjoints.

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "hesscraft/gradient.hpp"
#include "hesscraft/sparse.hpp"
#include "hesscraft/tape.hpp"

namespace hesscraft {

/// Size cap for the dense oracle; overridable via HESSCRAFT_DENSE_CAP.
inline int dense_oracle_cap() {
    static const int cap = [] {
        if (const char* env = std::getenv("HESSCRAFT_DENSE_CAP")) {
            const int v = std::atoi(env);
            if (v > 0) return v;
        }
        return 200;
    }();
    return cap;
}

/// Square dense matrix over all n+ell node indices. Desk scale only.
struct DenseMatrix {
    int dim = 0;
    std::vector<double> data;  // row-major

    explicit DenseMatrix(int d) : dim(d), data(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0) {}
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * dim + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * dim + c]; }
};

namespace detail {

inline DenseMatrix state_jacobian(const Tape& tape, int i) {
    // Identity with row i replaced by the padded local gradient of node i;
    // the (i,i) entry is zero, so column i is zero throughout.
    DenseMatrix phi(tape.size());
    for (int r = 0; r < phi.dim; ++r) phi.at(r, r) = r == i ? 0.0 : 1.0;
    const TapeNode& nd = tape.node(i);
    for (int k = 0; k < nd.num_preds(); ++k) phi.at(i, nd.pred[k]) = nd.d1[k];
    return phi;
}

inline DenseMatrix dense_multiply(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.dim);
    for (int r = 0; r < a.dim; ++r)
        for (int t = 0; t < a.dim; ++t) {
            const double art = a.at(r, t);
            if (art == 0.0) continue;
            for (int c = 0; c < a.dim; ++c) out.at(r, c) += art * b.at(t, c);
        }
    return out;
}

inline DenseMatrix dense_multiply_transposed_left(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.dim);
    for (int t = 0; t < a.dim; ++t)
        for (int r = 0; r < a.dim; ++r) {
            const double atr = a.at(t, r);
            if (atr == 0.0) continue;
            for (int c = 0; c < a.dim; ++c) out.at(r, c) += atr * b.at(t, c);
        }
    return out;
}

}  // namespace detail

/// Dense Hessian by the backward nested recurrence
///   W <- Phi_i'^T W Phi_i' + vbar_i * Phi_i'',
/// with the state Jacobians materialized as full matrices and the adjoint row
/// carried along by full vector-matrix products. Deliberately ignores the
/// known block structure of the products, so its agreement with the sparse
/// sweep is an independent check. Returns the independent block P W P^T as
/// triplets, dropping exact zeros.
inline SparseHessian dense_hessian_nested(const Tape& tape, int cap = -1) {
    tape.require_swept();
    const int dim = tape.size();
    if (cap < 0) cap = dense_oracle_cap();
    if (dim > cap)
        throw std::invalid_argument("dense oracle cap exceeded: " + std::to_string(dim) + " > " +
                                    std::to_string(cap));

    DenseMatrix w(dim);
    std::vector<double> vbar(static_cast<std::size_t>(dim), 0.0);
    vbar.back() = 1.0;

    for (int i = dim - 1; i >= tape.n(); --i) {
        const TapeNode& nd = tape.node(i);
        const DenseMatrix phi = detail::state_jacobian(tape, i);
        w = detail::dense_multiply_transposed_left(phi, detail::dense_multiply(w, phi));

        // vbar_i * Phi_i'': the padded local Hessian of the swept elemental
        const double vb = vbar[static_cast<std::size_t>(i)];
        if (nd.num_preds() == 1) {
            w.at(nd.pred[0], nd.pred[0]) += vb * nd.d2[0];
        } else if (nd.num_preds() == 2) {
            const int a = nd.pred[0], b = nd.pred[1];
            w.at(a, a) += vb * nd.d2[0];
            w.at(a, b) += vb * nd.d2[1];
            w.at(b, a) += vb * nd.d2[1];
            w.at(b, b) += vb * nd.d2[2];
        }

        // the recurrence preserves symmetry; keep the lower triangle
        // authoritative so it holds exactly in floating point too
        for (int r = 0; r < dim; ++r)
            for (int c = r + 1; c < dim; ++c) w.at(r, c) = w.at(c, r);

        // adjoint row update by the full Jacobian product
        std::vector<double> next(static_cast<std::size_t>(dim), 0.0);
        for (int c = 0; c < dim; ++c) {
            double acc = 0.0;
            for (int r = 0; r < dim; ++r) acc += vbar[static_cast<std::size_t>(r)] * phi.at(r, c);
            next[static_cast<std::size_t>(c)] = acc;
        }
        vbar = std::move(next);

        // the swept block of W must be exactly zero from here on
        for (int r = i; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                if (w.at(r, c) != 0.0 || w.at(c, r) != 0.0)
                    throw std::logic_error("dense oracle: swept block of W is not zero");
    }

    std::vector<HessianEntry> entries;
    for (int r = 0; r < tape.n(); ++r)
        for (int c = 0; c <= r; ++c)
            if (w.at(r, c) != 0.0)
                entries.push_back(HessianEntry{static_cast<std::int32_t>(r), static_cast<std::int32_t>(c), w.at(r, c)});
    return SparseHessian(tape.n(), std::move(entries));
}

/// Central differences of the reverse gradient, column by column, then
/// symmetrized and thresholded at 1e-7 * max(1, ||H||_max). `step` is the
/// base factor; the per-coordinate step is step * max(1, |x_k|).
inline SparseHessian fd_hessian(const Tape& tape, std::span<const double> x, double step = 1e-5) {
    if (static_cast<int>(x.size()) != tape.n()) throw std::invalid_argument("dimension mismatch");
    const int n = tape.n();
    Tape scratch = tape;
    std::vector<double> xp(x.begin(), x.end());

    std::vector<std::vector<double>> cols(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double h = step * std::max(1.0, std::abs(x[static_cast<std::size_t>(k)]));
        xp[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] + h;
        forward_sweep(scratch, xp);
        std::vector<double> gp = reverse_gradient(scratch).gradient;
        xp[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] - h;
        forward_sweep(scratch, xp);
        std::vector<double> gm = reverse_gradient(scratch).gradient;
        xp[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)];

        cols[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(n));
        for (int r = 0; r < n; ++r)
            cols[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)] =
                (gp[static_cast<std::size_t>(r)] - gm[static_cast<std::size_t>(r)]) / (2.0 * h);
    }

    double max_entry = 0.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c <= r; ++c) {
            const double v = 0.5 * (cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] +
                                    cols[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
            max_entry = std::max(max_entry, std::abs(v));
        }
    const double threshold = 1e-7 * std::max(1.0, max_entry);

    std::vector<HessianEntry> entries;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c <= r; ++c) {
            const double v = 0.5 * (cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] +
                                    cols[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
            if (std::abs(v) <= threshold) continue;
            entries.push_back(HessianEntry{static_cast<std::int32_t>(r), static_cast<std::int32_t>(c), v});
        }
    return SparseHessian(n, std::move(entries));
}

/// Exact f''(x) * d by tangent propagation through the forward values
/// followed by a reverse sweep carrying dotted adjoints. No differencing.
inline std::vector<double> hessian_vector_product(const Tape& tape, std::span<const double> d) {
    tape.require_swept();
    if (static_cast<int>(d.size()) != tape.n()) throw std::invalid_argument("dimension mismatch");
    const int total = tape.size();

    std::vector<double> vdot(static_cast<std::size_t>(total), 0.0);
    for (int i = 0; i < tape.n(); ++i) vdot[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)];
    for (int i = tape.n(); i < total; ++i) {
        const TapeNode& nd = tape.node(i);
        double t = 0.0;
        for (int k = 0; k < nd.num_preds(); ++k) t += nd.d1[k] * vdot[static_cast<std::size_t>(nd.pred[k])];
        vdot[static_cast<std::size_t>(i)] = t;
    }

    std::vector<double> vbar(static_cast<std::size_t>(total), 0.0);
    std::vector<double> vbar_dot(static_cast<std::size_t>(total), 0.0);
    vbar.back() = 1.0;
    for (int i = total - 1; i >= tape.n(); --i) {
        const TapeNode& nd = tape.node(i);
        const double vb = vbar[static_cast<std::size_t>(i)];
        const double vbd = vbar_dot[static_cast<std::size_t>(i)];
        if (nd.num_preds() == 1) {
            const int j = nd.pred[0];
            const double cdot = nd.d2[0] * vdot[static_cast<std::size_t>(j)];
            vbar[static_cast<std::size_t>(j)] += vb * nd.d1[0];
            vbar_dot[static_cast<std::size_t>(j)] += vbd * nd.d1[0] + vb * cdot;
        } else if (nd.num_preds() == 2) {
            const int j = nd.pred[0], k = nd.pred[1];
            const double c0dot =
                nd.d2[0] * vdot[static_cast<std::size_t>(j)] + nd.d2[1] * vdot[static_cast<std::size_t>(k)];
            const double c1dot =
                nd.d2[1] * vdot[static_cast<std::size_t>(j)] + nd.d2[2] * vdot[static_cast<std::size_t>(k)];
            vbar[static_cast<std::size_t>(j)] += vb * nd.d1[0];
            vbar[static_cast<std::size_t>(k)] += vb * nd.d1[1];
            vbar_dot[static_cast<std::size_t>(j)] += vbd * nd.d1[0] + vb * c0dot;
            vbar_dot[static_cast<std::size_t>(k)] += vbd * nd.d1[1] + vb * c1dot;
        }
    }
    vbar_dot.resize(static_cast<std::size_t>(tape.n()));
    return vbar_dot;
}

}  // namespace hesscraft
