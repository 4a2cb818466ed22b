#pragma once

// Scalable test-function families with provable Hessian sparsity patterns
// (banded, arrow, frame, block diagonal, pseudo-random irregular, linear
// control), plus a median-of-repeats timing harness with CSV output.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hesscraft/edge_pushing.hpp"
#include "hesscraft/tape.hpp"

namespace hesscraft::bench {

// 64-bit LCG behind the irregular family; the seed is part of the function
// definition, so identical (n, seed) always yields the identical tape.
inline constexpr std::uint64_t kLcgMultiplier = 6364136223846793005ULL;
inline constexpr std::uint64_t kLcgIncrement = 1442695040888963407ULL;
inline constexpr std::uint64_t kDefaultSeed = 0x9E3779B97F4A7C15ULL;

struct FamilySpec {
    std::string_view name;
    std::string_view pattern;
    int min_n;
};

inline std::span<const FamilySpec> families() {
    static const FamilySpec table[] = {
        {"band1", "band(1)", 2},
        {"band5", "band(5)", 6},
        {"arrow", "arrow", 2},
        {"frame_diag", "frame + diagonal", 3},
        {"block_diag5", "block_diag(5)", 5},
        {"irregular", "irregular(seed)", 2},
        {"linear", "empty", 1},
    };
    return table;
}

inline const FamilySpec* find_family(std::string_view name) {
    for (const FamilySpec& f : families())
        if (f.name == name) return &f;
    return nullptr;
}

inline std::vector<std::pair<int, int>> irregular_pairs(int n, std::uint64_t seed) {
    std::uint64_t state = seed;
    const auto draw = [&] {
        state = state * kLcgMultiplier + kLcgIncrement;
        return static_cast<int>((state >> 33) % static_cast<std::uint64_t>(n));
    };
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(2) * static_cast<std::size_t>(n));
    for (int t = 0; t < 2 * n; ++t) {
        int a = draw();
        int b = draw();
        if (a == b) b = (a + 1) % n;
        pairs.emplace_back(a, b);
    }
    return pairs;
}

/// Builds the named family at dimension n.
///
///   band1       sum_i cos(x_i * x_{i+1})
///   band5       sum_i (x_i * ... * x_{i+5})^2 + sin(x_i), sliding window of 6
///   arrow       sum_{i<n-1} (x_i^2 + x_{n-1} * x_i) + exp(x_{n-1})
///   frame_diag  sum sin(x_0 * x_i) + sum x_i^2 * x_{n-1} + sum x_i^4 + x_0 * x_{n-1}
///   block_diag5 sum over consecutive 5-blocks of (prod block)^2
///   irregular   sum over 2n LCG-drawn pairs of x_i * x_j * sin(x_i + x_j)
///   linear      sum_i 3 * x_i (control family, zero Hessian)
inline Tape make_family(std::string_view name, int n, std::uint64_t seed = kDefaultSeed) {
    const FamilySpec* spec = find_family(name);
    if (!spec) throw std::invalid_argument("unknown family '" + std::string(name) + "'");
    if (n < spec->min_n)
        throw std::invalid_argument("family '" + std::string(name) + "' needs n >= " +
                                    std::to_string(spec->min_n));

    return record(n, [&](std::span<const Var> x) {
        Var acc;
        const auto add_term = [&](Var t) { acc = acc.builder() ? acc + t : t; };

        if (name == "band1") {
            for (int i = 0; i + 1 < n; ++i) add_term(cos(x[i] * x[i + 1]));
        } else if (name == "band5") {
            for (int i = 0; i + 5 < n; ++i) {
                Var prod = x[i];
                for (int k = 1; k <= 5; ++k) prod = prod * x[i + k];
                add_term(sqr(prod) + sin(x[i]));
            }
        } else if (name == "arrow") {
            for (int i = 0; i + 1 < n; ++i) add_term(sqr(x[i]) + x[n - 1] * x[i]);
            add_term(exp(x[n - 1]));
        } else if (name == "frame_diag") {
            for (int i = 1; i + 1 < n; ++i) add_term(sin(x[0] * x[i]));
            for (int i = 1; i + 1 < n; ++i) add_term(sqr(x[i]) * x[n - 1]);
            for (int i = 0; i < n; ++i) add_term(pow(x[i], 4.0));
            add_term(x[0] * x[n - 1]);
        } else if (name == "block_diag5") {
            for (int start = 0; start < n; start += 5) {
                const int stop = std::min(start + 5, n);
                Var prod = x[start];
                for (int k = start + 1; k < stop; ++k) prod = prod * x[k];
                add_term(sqr(prod));
            }
        } else if (name == "irregular") {
            for (const auto& [a, b] : irregular_pairs(n, seed))
                add_term(x[a] * x[b] * sin(x[a] + x[b]));
        } else {  // linear
            for (int i = 0; i < n; ++i) add_term(3.0 * x[i]);
        }
        return acc;
    });
}

/// The provable lower-triangle pattern of each family, as sorted (row, col)
/// pairs with row >= col.
inline std::vector<std::pair<int, int>> expected_pattern(std::string_view name, int n,
                                                         std::uint64_t seed = kDefaultSeed) {
    std::vector<std::pair<int, int>> out;
    if (name == "band1") {
        for (int i = 0; i < n; ++i) out.emplace_back(i, i);
        for (int i = 1; i < n; ++i) out.emplace_back(i, i - 1);
    } else if (name == "band5") {
        for (int r = 0; r < n; ++r)
            for (int c = std::max(0, r - 5); c <= r; ++c) out.emplace_back(r, c);
    } else if (name == "arrow") {
        for (int i = 0; i < n; ++i) out.emplace_back(i, i);
        for (int c = 0; c + 1 < n; ++c) out.emplace_back(n - 1, c);
    } else if (name == "frame_diag") {
        for (int i = 0; i < n; ++i) out.emplace_back(i, i);
        for (int i = 1; i + 1 < n; ++i) out.emplace_back(i, 0);
        out.emplace_back(n - 1, 0);
        for (int c = 1; c + 1 < n; ++c) out.emplace_back(n - 1, c);
    } else if (name == "block_diag5") {
        for (int start = 0; start < n; start += 5) {
            const int stop = std::min(start + 5, n);
            for (int r = start; r < stop; ++r)
                for (int c = start; c <= r; ++c) out.emplace_back(r, c);
        }
    } else if (name == "irregular") {
        for (auto [a, b] : irregular_pairs(n, seed)) {
            if (a < b) std::swap(a, b);
            out.emplace_back(a, b);
            out.emplace_back(a, a);
            out.emplace_back(b, b);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    } else if (name == "linear") {
        return out;
    } else {
        throw std::invalid_argument("unknown family '" + std::string(name) + "'");
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Closed-form entry counts (n at or above each family's pattern-stable size).
inline std::int64_t pattern_nnz(std::string_view name, int n, std::uint64_t seed = kDefaultSeed) {
    const std::int64_t m = n;
    if (name == "band1") return 2 * m - 1;
    if (name == "band5") return 6 * m - 15;
    if (name == "arrow") return 2 * m - 1;
    if (name == "frame_diag") return 3 * m - 3;
    if (name == "block_diag5") {
        std::int64_t count = 0;
        for (int start = 0; start < n; start += 5) {
            const std::int64_t s = std::min(5, n - start);
            count += s * (s + 1) / 2;
        }
        return count;
    }
    if (name == "irregular") return static_cast<std::int64_t>(expected_pattern(name, n, seed).size());
    if (name == "linear") return 0;
    throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Timing harness

enum class Phase { HessianOnly, Total };

inline std::string_view phase_name(Phase p) { return p == Phase::HessianOnly ? "hessian-only" : "total"; }

struct BenchRecord {
    std::string family;
    int n = 0;
    std::int64_t ell = 0;
    Phase phase = Phase::HessianOnly;
    std::int64_t median_ns = 0;
    std::int64_t nnz = 0;
    std::int64_t peak_live_edges = 0;
};

/// Median wall time of fn() over `repeats` runs after one warm-up.
template <class F>
std::int64_t median_time_ns(int repeats, F&& fn) {
    fn();
    std::vector<std::int64_t> times;
    times.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

/// Times the Hessian driver over an existing swept tape (HessianOnly) or the
/// whole build + sweep + Hessian pipeline (Total).
inline BenchRecord run_bench(std::string_view family, int n, int repeats, Phase phase,
                             std::span<const double> x, std::uint64_t seed = kDefaultSeed) {
    if (repeats < 1) throw std::invalid_argument("repeats must be positive");
    Tape tape = make_family(family, n, seed);
    forward_sweep(tape, x);

    BenchRecord rec;
    rec.family = std::string(family);
    rec.n = n;
    rec.ell = tape.ell();
    rec.phase = phase;

    EdgePushingResult result = edge_pushing_hessian(tape);
    rec.nnz = result.hessian.nnz();
    rec.peak_live_edges = result.stats.peak_live_edges;

    if (phase == Phase::HessianOnly) {
        rec.median_ns = median_time_ns(repeats, [&] { edge_pushing_hessian(tape); });
    } else {
        rec.median_ns = median_time_ns(repeats, [&] {
            Tape t = make_family(family, n, seed);
            forward_sweep(t, x);
            edge_pushing_hessian(t);
        });
    }
    return rec;
}

inline void write_csv_header(std::ostream& os) {
    os << "family,n,ell,phase,median_ns,nnz,peak_live_edges\n";
}

inline void write_csv_row(std::ostream& os, const BenchRecord& rec) {
    os << rec.family << ',' << rec.n << ',' << rec.ell << ',' << phase_name(rec.phase) << ','
       << rec.median_ns << ',' << rec.nnz << ',' << rec.peak_live_edges << '\n';
}

}  // namespace hesscraft::bench
