#pragma once

// Independent test oracles.  Everything here is deliberately brute-force and
// shares no code with the library: a Taylor-series normal CDF, closed-form
// lognormal cell means, and an exhaustive basic-solution enumerator for tiny
// linear programs built on its own Gaussian elimination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

// Standard normal CDF via the Taylor series
//   Phi(x) = 1/2 + phi(x) * sum_{k>=0} x^(2k+1) / (1*3*...*(2k+1)),
// accurate to ~1e-16 for |x| <= 8 with long-double accumulation.
inline double normal_cdf(double x) {
    if (x < -12.0) return 0.0;
    if (x > 12.0) return 1.0;
    const long double xl = x;
    long double term = xl, sum = xl;
    for (int k = 1; k < 400; ++k) {
        term *= xl * xl / (2.0L * k + 1.0L);
        sum += term;
        if (std::abs(static_cast<double>(term)) < 1e-22) break;
    }
    const long double phi = std::exp(-0.5L * xl * xl) / std::sqrt(2.0L * 3.14159265358979323846264338327950288L);
    return static_cast<double>(0.5L + phi * sum);
}

// Inverse of the series CDF by bisection; ~1e-14 absolute accuracy.
inline double normal_quantile(double p) {
    double lo = -13.0, hi = 13.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Conditional mean of cell k (1-based) of the m-cell equal-probability
// quantization of the lognormal law s0 * exp(nu*Z - nu^2/2):
//   x_k = m * s0 * (Phi(z_k - nu) - Phi(z_{k-1} - nu)),  z_j = Phi^{-1}(j/m).
inline double lognormal_cell_mean(double s0, double nu, int m, int k) {
    const double za = (k == 1) ? -std::numeric_limits<double>::infinity()
                               : normal_quantile(static_cast<double>(k - 1) / m);
    const double zb = (k == m) ? std::numeric_limits<double>::infinity()
                               : normal_quantile(static_cast<double>(k) / m);
    const double ca = (k == 1) ? 0.0 : normal_cdf(za - nu);
    const double cb = (k == m) ? 1.0 : normal_cdf(zb - nu);
    return m * s0 * (cb - ca);
}

// ---------------------------------------------------------------------------
// Brute-force vertex enumeration for tiny LPs.
//
// Problem form: optimize c'x subject to A x (sense) b, x >= 0, where sense is
// -1 (<=), 0 (=), +1 (>=) per row.  Inequalities receive slack columns and
// every basic solution of the resulting equality system is enumerated.
// ---------------------------------------------------------------------------

struct TinyLp {
    int cols = 0;                        // structural variables
    std::vector<std::vector<double>> A;  // rows x cols
    std::vector<double> b;
    std::vector<int> sense;              // -1 / 0 / +1 per row
    std::vector<double> c;               // objective over structural vars
};

namespace detail {

// Solves M y = r by Gaussian elimination with partial pivoting.
inline std::optional<std::vector<double>> solve_square(std::vector<std::vector<double>> M,
                                                       std::vector<double> r) {
    const std::size_t n = M.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t row = col + 1; row < n; ++row)
            if (std::abs(M[row][col]) > std::abs(M[piv][col])) piv = row;
        if (std::abs(M[piv][col]) < 1e-11) return std::nullopt;
        std::swap(M[piv], M[col]);
        std::swap(r[piv], r[col]);
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col) continue;
            const double f = M[row][col] / M[col][col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) M[row][k] -= f * M[col][k];
            r[row] -= f * r[col];
        }
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = r[i] / M[i][i];
    return y;
}

// Row echelon pass returning the pivot-row indices; detects inconsistency of
// [A|b] when check_consistency is set.
inline std::optional<std::vector<std::size_t>> independent_rows(
    std::vector<std::vector<double>> M, std::vector<double> r, bool* consistent) {
    const std::size_t rows = M.size();
    const std::size_t cols = rows == 0 ? 0 : M[0].size();
    std::vector<std::size_t> order(rows);
    for (std::size_t i = 0; i < rows; ++i) order[i] = i;
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < cols && row < rows; ++col) {
        std::size_t piv = row;
        for (std::size_t rr = row + 1; rr < rows; ++rr)
            if (std::abs(M[rr][col]) > std::abs(M[piv][col])) piv = rr;
        if (std::abs(M[piv][col]) < 1e-9) continue;
        std::swap(M[piv], M[row]);
        std::swap(r[piv], r[row]);
        std::swap(order[piv], order[row]);
        for (std::size_t rr = 0; rr < rows; ++rr) {
            if (rr == row) continue;
            const double f = M[rr][col] / M[row][col];
            if (f == 0.0) continue;
            for (std::size_t k = col; k < cols; ++k) M[rr][k] -= f * M[row][k];
            r[rr] -= f * r[row];
        }
        pivots.push_back(order[row]);
        ++row;
    }
    if (consistent) {
        *consistent = true;
        for (std::size_t rr = row; rr < rows; ++rr)
            if (std::abs(r[rr]) > 1e-7) *consistent = false;
    }
    return pivots;
}

}  // namespace detail

struct VertexEnumeration {
    bool consistent = true;                   // equality system [A|b] solvable
    std::vector<std::vector<double>> vertices;  // structural coordinates only
};

// Enumerates every basic feasible solution of the slack-augmented equality
// system.  Exponential in the size; intended for <= ~20 total columns.
inline VertexEnumeration enumerate_vertices(const TinyLp& lp) {
    const std::size_t rows = lp.A.size();
    std::size_t slacks = 0;
    for (int s : lp.sense)
        if (s != 0) ++slacks;
    const std::size_t total = static_cast<std::size_t>(lp.cols) + slacks;

    std::vector<std::vector<double>> Aeq(rows, std::vector<double>(total, 0.0));
    std::size_t snext = static_cast<std::size_t>(lp.cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (int cidx = 0; cidx < lp.cols; ++cidx) Aeq[r][static_cast<std::size_t>(cidx)] = lp.A[r][static_cast<std::size_t>(cidx)];
        if (lp.sense[r] < 0) Aeq[r][snext++] = 1.0;   // <=  : slack
        else if (lp.sense[r] > 0) Aeq[r][snext++] = -1.0;  // >= : surplus
    }

    VertexEnumeration out;
    const auto pivots = detail::independent_rows(Aeq, lp.b, &out.consistent);
    if (!out.consistent || !pivots) return out;
    const std::vector<std::size_t> keep = *pivots;
    const std::size_t rank = keep.size();
    if (rank > total) return out;

    // Enumerate all rank-sized column subsets.
    std::vector<std::size_t> comb(rank);
    for (std::size_t i = 0; i < rank; ++i) comb[i] = i;
    auto advance = [&]() -> bool {
        if (rank == 0) return false;
        std::size_t i = rank;
        while (i-- > 0) {
            if (comb[i] != i + total - rank) {
                ++comb[i];
                for (std::size_t j = i + 1; j < rank; ++j) comb[j] = comb[j - 1] + 1;
                return true;
            }
        }
        return false;
    };

    auto emit = [&](const std::vector<double>& xfull) {
        // Verify against every original row, not just the independent ones.
        for (std::size_t r = 0; r < rows; ++r) {
            double lhs = 0.0;
            for (std::size_t c = 0; c < total; ++c) lhs += Aeq[r][c] * xfull[c];
            if (std::abs(lhs - lp.b[r]) > 1e-7 * (1.0 + std::abs(lp.b[r]))) return;
        }
        std::vector<double> x(xfull.begin(), xfull.begin() + lp.cols);
        for (const auto& v : out.vertices) {
            double d = 0.0;
            for (int c = 0; c < lp.cols; ++c) d = std::max(d, std::abs(v[static_cast<std::size_t>(c)] - x[static_cast<std::size_t>(c)]));
            if (d <= 1e-7) return;  // duplicate
        }
        out.vertices.push_back(std::move(x));
    };

    bool more = rank > 0;
    if (rank == 0) {
        std::vector<double> xfull(total, 0.0);
        emit(xfull);
    }
    while (more) {
        std::vector<std::vector<double>> B(rank, std::vector<double>(rank));
        std::vector<double> rb(rank);
        for (std::size_t i = 0; i < rank; ++i) {
            rb[i] = lp.b[keep[i]];
            for (std::size_t j = 0; j < rank; ++j) B[i][j] = Aeq[keep[i]][comb[j]];
        }
        if (auto sol = detail::solve_square(std::move(B), std::move(rb))) {
            bool nonneg = true;
            for (double v : *sol)
                if (v < -1e-9) { nonneg = false; break; }
            if (nonneg) {
                std::vector<double> xfull(total, 0.0);
                for (std::size_t j = 0; j < rank; ++j) xfull[comb[j]] = std::max(0.0, (*sol)[j]);
                emit(xfull);
            }
        }
        more = advance();
    }
    return out;
}

// Maximum of c'x over the enumerated vertices; nullopt when none exist.
inline std::optional<double> best_value(const TinyLp& lp, const VertexEnumeration& ve) {
    if (ve.vertices.empty()) return std::nullopt;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : ve.vertices) {
        double val = 0.0;
        for (int c = 0; c < lp.cols; ++c) val += lp.c[static_cast<std::size_t>(c)] * v[static_cast<std::size_t>(c)];
        best = std::max(best, val);
    }
    return best;
}

// Vertices attaining the maximum within an absolute tolerance: the vertex set
// of the optimal face.
inline std::vector<std::vector<double>> optimal_face(const TinyLp& lp, const VertexEnumeration& ve,
                                                     double tol = 1e-7) {
    std::vector<std::vector<double>> face;
    const auto best = best_value(lp, ve);
    if (!best) return face;
    for (const auto& v : ve.vertices) {
        double val = 0.0;
        for (int c = 0; c < lp.cols; ++c) val += lp.c[static_cast<std::size_t>(c)] * v[static_cast<std::size_t>(c)];
        if (val >= *best - tol) face.push_back(v);
    }
    return face;
}

// Central finite-difference gradient of a scalar function, used to validate
// reverse-mode gradients.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double step = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + step;
        const double up = f(x);
        x[i] = xi - step;
        const double dn = f(x);
        x[i] = xi;
        g[i] = (up - dn) / (2.0 * step);
    }
    return g;
}

}  // namespace oracle
