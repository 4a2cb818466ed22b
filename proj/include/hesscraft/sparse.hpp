#pragma once

// Sparse symmetric Hessian result type and Matrix Market export.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace hesscraft {

struct HessianEntry {
    std::int32_t row;  // row >= col: lower triangle including diagonal
    std::int32_t col;
    double value;
};

inline bool operator==(const HessianEntry& a, const HessianEntry& b) {
    return a.row == b.row && a.col == b.col && a.value == b.value;
}

/// Symmetric n-by-n matrix stored as lexicographically sorted lower-triangle
/// coordinate triplets.
class SparseHessian {
public:
    SparseHessian() = default;
    SparseHessian(int n, std::vector<HessianEntry> entries) : n_(n), entries_(std::move(entries)) {
        std::sort(entries_.begin(), entries_.end(), [](const HessianEntry& a, const HessianEntry& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const HessianEntry& e = entries_[i];
            if (e.col > e.row || e.row >= n_ || e.col < 0)
                throw std::invalid_argument("hessian entry outside the lower triangle");
            if (i > 0 && entries_[i - 1].row == e.row && entries_[i - 1].col == e.col)
                throw std::invalid_argument("duplicate hessian entry");
            if (!std::isfinite(e.value)) throw std::invalid_argument("non-finite hessian entry");
        }
    }

    int dim() const { return n_; }
    std::int64_t nnz() const { return static_cast<std::int64_t>(entries_.size()); }
    std::span<const HessianEntry> entries() const { return entries_; }

    double value_at(int r, int c) const {
        if (r < c) std::swap(r, c);
        auto it = std::lower_bound(entries_.begin(), entries_.end(), std::pair{r, c},
                                   [](const HessianEntry& e, const std::pair<int, int>& key) {
                                       return e.row != key.first ? e.row < key.first : e.col < key.second;
                                   });
        if (it != entries_.end() && it->row == r && it->col == c) return it->value;
        return 0.0;
    }

    /// Dense row-major mirror, symmetric. Test/desk scale only.
    std::vector<double> dense() const {
        std::vector<double> m(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), 0.0);
        for (const HessianEntry& e : entries_) {
            m[static_cast<std::size_t>(e.row) * n_ + e.col] = e.value;
            m[static_cast<std::size_t>(e.col) * n_ + e.row] = e.value;
        }
        return m;
    }

    std::vector<double> multiply(std::span<const double> d) const {
        if (static_cast<int>(d.size()) != n_) throw std::invalid_argument("dimension mismatch");
        std::vector<double> y(static_cast<std::size_t>(n_), 0.0);
        for (const HessianEntry& e : entries_) {
            y[static_cast<std::size_t>(e.row)] += e.value * d[static_cast<std::size_t>(e.col)];
            if (e.row != e.col) y[static_cast<std::size_t>(e.col)] += e.value * d[static_cast<std::size_t>(e.row)];
        }
        return y;
    }

    double max_abs() const {
        double m = 0.0;
        for (const HessianEntry& e : entries_) m = std::max(m, std::abs(e.value));
        return m;
    }

private:
    int n_ = 0;
    std::vector<HessianEntry> entries_;
};

/// Coordinate symmetric real format, 1-based, lower triangle.
inline void write_matrix_market(const SparseHessian& h, std::ostream& os) {
    os << "%%MatrixMarket matrix coordinate real symmetric\n";
    os << h.dim() << ' ' << h.dim() << ' ' << h.nnz() << '\n';
    char buf[64];
    for (const HessianEntry& e : h.entries()) {
        std::snprintf(buf, sizeof buf, "%d %d %.17g\n", e.row + 1, e.col + 1, e.value);
        os << buf;
    }
}

/// Largest |a-b| over the union of supports, scaled by max(1, entry scale).
/// Entries missing on one side compare against zero.
inline double scaled_discrepancy(const SparseHessian& a, const SparseHessian& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
    const double scale = std::max({1.0, a.max_abs(), b.max_abs()});
    double worst = 0.0;
    for (const HessianEntry& e : a.entries()) worst = std::max(worst, std::abs(e.value - b.value_at(e.row, e.col)));
    for (const HessianEntry& e : b.entries()) worst = std::max(worst, std::abs(e.value - a.value_at(e.row, e.col)));
    return worst / scale;
}

}  // namespace hesscraft
