#pragma once

// Discrete one-period marginal distributions and the marginal system that
// fixes the risk-neutral law of the asset at each trading date.
//
// A marginal is a finite measure sum_k w_k * delta(x_k) with strictly
// increasing nonnegative support points and weights summing to one.  The
// system validates that all marginals share the initial price as mean and
// are increasing in convex order, which is exactly the condition for a
// calibrated martingale model on the grid to exist.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dynmot/common.hpp"

namespace dynmot {

struct DiscreteMarginal {
    std::vector<double> points;   // strictly increasing, all >= 0
    std::vector<double> weights;  // all >= 0, sum to 1 within 1e-9

    DiscreteMarginal() = default;
    DiscreteMarginal(std::vector<double> pts, std::vector<double> wts)
        : points(std::move(pts)), weights(std::move(wts)) {
        validate();
    }

    std::size_t size() const noexcept { return points.size(); }

    void validate() const {
        if (points.empty()) throw ConfigError("marginal: empty support");
        if (points.size() != weights.size())
            throw ConfigError("marginal: points/weights size mismatch");
        double sum = 0.0;
        for (std::size_t k = 0; k < points.size(); ++k) {
            if (!std::isfinite(points[k]) || !std::isfinite(weights[k]))
                throw ConfigError("marginal: non-finite entry");
            if (points[k] < 0.0) throw ConfigError("marginal: negative support point");
            if (k > 0 && !(points[k] > points[k - 1]))
                throw ConfigError("marginal: support points not strictly increasing");
            if (weights[k] < 0.0) throw ConfigError("marginal: negative weight");
            sum += weights[k];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("marginal: weights sum to " + std::to_string(sum) + ", expected 1");
    }
};

inline double mean(const DiscreteMarginal& m) noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < m.points.size(); ++k) acc += m.weights[k] * m.points[k];
    return acc;
}

// E[(X - strike)^+] under the marginal; piecewise linear and convex in the
// strike with kinks exactly at the support points.
inline double call_function(const DiscreteMarginal& m, double strike) noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < m.points.size(); ++k)
        if (m.points[k] > strike) acc += m.weights[k] * (m.points[k] - strike);
    return acc;
}

struct ConvexOrderResult {
    bool ok = false;
    bool means_match = false;
    // First strike (scanning the sorted union of supports) where the call
    // function of `a` exceeds that of `b`; NaN when none exists.
    double witness_strike = std::numeric_limits<double>::quiet_NaN();
};

// Checks a <=_cx b on finite supports: equal means and dominance of call
// functions at every strike in the union of the supports.  Dominance at the
// kinks extends to all strikes because the difference is piecewise linear.
inline ConvexOrderResult check_convex_order(const DiscreteMarginal& a, const DiscreteMarginal& b,
                                            double tol = 1e-9) {
    ConvexOrderResult res;
    const double ma = mean(a), mb = mean(b);
    res.means_match = std::abs(ma - mb) <= tol * (1.0 + std::max(std::abs(ma), std::abs(mb)));
    if (!res.means_match) return res;

    std::vector<double> strikes;
    strikes.reserve(a.points.size() + b.points.size());
    strikes.insert(strikes.end(), a.points.begin(), a.points.end());
    strikes.insert(strikes.end(), b.points.begin(), b.points.end());
    std::sort(strikes.begin(), strikes.end());
    for (double k : strikes) {
        const double ca = call_function(a, k), cb = call_function(b, k);
        if (ca > cb + tol * (1.0 + std::max(ca, cb))) {
            res.witness_strike = k;
            return res;
        }
    }
    res.ok = true;
    return res;
}

namespace detail {

// Adaptive tanh-sinh (double-exponential) quadrature on [a,b].  The change of
// variables u = c + r*tanh(pi/2 * sinh t) clusters nodes doubly-exponentially
// at the endpoints, which integrates quantiles with endpoint singularities
// (lognormal tails) to full accuracy.  The level is doubled until two
// successive estimates agree within the absolute tolerance.
inline double tanh_sinh(const std::function<double(double)>& f, double a, double b, double tol) {
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    if (r <= 0.0) return 0.0;
    constexpr double kPiHalf = 1.5707963267948966;
    constexpr double kTmax = 6.115;  // tanh(pi/2*sinh(6.115)) == 1 in doubles
    auto node = [&](double t, double& u, double& w) {
        const double s = kPiHalf * std::sinh(t);
        if (s > 350.0) { u = b; w = 0.0; return; }
        if (s < -350.0) { u = a; w = 0.0; return; }
        const double ch = std::cosh(s);
        u = c + r * std::tanh(s);
        w = r * kPiHalf * std::cosh(t) / (ch * ch);
    };
    double h = 1.0;
    double u0 = 0.0, w0 = 0.0;
    node(0.0, u0, w0);
    double sum = w0 * f(u0);       // trapezoid at level 0 (h = 1)
    double prev = sum * h;
    for (int k = 1; static_cast<double>(k) * h <= kTmax; ++k) {
        double up, wp, un, wn;
        node(k * h, up, wp);
        node(-k * h, un, wn);
        if (wp > 0.0) sum += wp * f(up);
        if (wn > 0.0) sum += wn * f(un);
    }
    prev = sum * h;
    for (int level = 1; level <= 12; ++level) {
        h *= 0.5;
        // Add the new midpoints of the halved grid (odd multiples of h).
        for (int k = 1; static_cast<double>(k) * h <= kTmax; k += 2) {
            double up, wp, un, wn;
            node(k * h, up, wp);
            node(-k * h, un, wn);
            if (wp > 0.0) sum += wp * f(up);
            if (wn > 0.0) sum += wn * f(un);
        }
        const double cur = sum * h;
        if (level >= 3 && std::abs(cur - prev) <= tol) return cur;
        prev = cur;
    }
    throw NumericalError("discretize: quantile quadrature did not converge");
}

}  // namespace detail

// Conditional-mean quantization: split [0,1] into m equal probability cells
// and place each cell's conditional mean x_k = m * integral of the quantile
// over the cell, with weight 1/m.  Preserves the mean exactly and the convex
// order across marginals quantized with the same m.  Duplicate points (flat
// quantile stretches) are merged with their weights aggregated.
inline DiscreteMarginal discretize(const std::function<double(double)>& quantile, int m) {
    if (m < 1) throw ConfigError("discretize: cell count must be >= 1");
    // Clamp away from {0,1}: the quantile may be unbounded at the endpoints.
    // The clipped probability mass of 1e-13 per tail is far below the mean
    // tolerance used downstream.
    constexpr double kEdge = 1e-13;
    std::vector<double> pts(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        const double a = std::max(static_cast<double>(k) / m, kEdge);
        const double b = std::min(static_cast<double>(k + 1) / m, 1.0 - kEdge);
        if (!(quantile(a) <= quantile(b) + 1e-12 * (1.0 + std::abs(quantile(b)))))
            throw ConfigError("discretize: quantile is not nondecreasing");
        // Two passes: a coarse composite estimate to fix the absolute scale,
        // then the adaptive pass at tolerance 1e-10 * (1 + |x_k|).
        double rough = 0.0;
        const int pieces = 8;
        for (int p = 0; p < pieces; ++p) {
            const double pa = a + (b - a) * p / pieces, pb = a + (b - a) * (p + 1) / pieces;
            rough += (pb - pa) / 6.0 *
                     (quantile(pa) + 4.0 * quantile(0.5 * (pa + pb)) + quantile(pb));
        }
        const double cell_tol = 1e-10 * (1.0 + std::abs(rough * m)) / m;
        const double integral = detail::tanh_sinh(quantile, a, b, cell_tol);
        if (!std::isfinite(integral))
            throw NumericalError("discretize: non-finite cell integral");
        pts[static_cast<std::size_t>(k)] = integral * m;
    }
    // Merge numerically equal neighbours (point masses in the quantile).
    std::vector<double> xs, ws;
    const double w = 1.0 / m;
    for (double x : pts) {
        if (!xs.empty() && x - xs.back() <= 1e-12 * (1.0 + std::abs(x))) {
            // Weighted average guards against a slow upward drift across a
            // long run of merged cells.
            xs.back() = (xs.back() * ws.back() + x * w) / (ws.back() + w);
            ws.back() += w;
        } else {
            xs.push_back(x);
            ws.push_back(w);
        }
    }
    if (xs.front() < 0.0 && xs.front() > -1e-12) xs.front() = 0.0;
    return DiscreteMarginal(std::move(xs), std::move(ws));
}

// Marginals mu_1, ..., mu_n of the asset at the trading dates, all with mean
// s0 and increasing in convex order.  Time indices are 1-based throughout.
class MarginalSystem {
  public:
    MarginalSystem(double s0, std::vector<DiscreteMarginal> marginals)
        : s0_(s0), marginals_(std::move(marginals)) {
        if (!(s0_ > 0.0) || !std::isfinite(s0_))
            throw ConfigError("marginal system: initial price must be positive and finite");
        if (marginals_.empty()) throw ConfigError("marginal system: no marginals");
        for (std::size_t i = 0; i < marginals_.size(); ++i) {
            marginals_[i].validate();
            const double mi = mean(marginals_[i]);
            if (std::abs(mi - s0_) > 1e-9 * (1.0 + s0_))
                throw ConfigError("marginal system: marginal " + std::to_string(i + 1) +
                                  " has mean " + std::to_string(mi) + ", expected " +
                                  std::to_string(s0_));
        }
        for (std::size_t i = 0; i + 1 < marginals_.size(); ++i) {
            const auto res = check_convex_order(marginals_[i], marginals_[i + 1]);
            if (!res.ok) {
                std::string msg = "marginal system: marginals " + std::to_string(i + 1) + " and " +
                                  std::to_string(i + 2) + " violate convex order";
                if (res.means_match)
                    msg += " (witness strike " + std::to_string(res.witness_strike) + ")";
                else
                    msg += " (means differ)";
                throw ConfigError(msg);
            }
        }
    }

    double s0() const noexcept { return s0_; }
    int periods() const noexcept { return static_cast<int>(marginals_.size()); }
    // Marginal of S_{t_i}, i in 1..periods().
    const DiscreteMarginal& marginal(int i) const { return marginals_.at(static_cast<std::size_t>(i - 1)); }
    const std::vector<DiscreteMarginal>& all() const noexcept { return marginals_; }

  private:
    double s0_;
    std::vector<DiscreteMarginal> marginals_;
};

// --- plain-text serialization -----------------------------------------------
//
// One block per marginal:
//   # marginal i=<index>
//   <price>\t<weight>
// Prices use max-precision decimal so that write/read round-trips exactly.

inline void write_marginals(std::ostream& os, const std::vector<DiscreteMarginal>& ms) {
    char buf[64];
    for (std::size_t i = 0; i < ms.size(); ++i) {
        os << "# marginal i=" << (i + 1) << "\n";
        for (std::size_t k = 0; k < ms[i].points.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", ms[i].points[k]);
            os << buf << "\t";
            std::snprintf(buf, sizeof(buf), "%.17g", ms[i].weights[k]);
            os << buf << "\n";
        }
    }
}

inline std::vector<DiscreteMarginal> read_marginals(std::istream& is) {
    std::vector<DiscreteMarginal> out;
    std::vector<double> pts, wts;
    auto flush = [&]() {
        if (!pts.empty()) {
            out.emplace_back(std::move(pts), std::move(wts));
            pts.clear();
            wts.clear();
        }
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string tag = "# marginal i=";
            if (line.rfind(tag, 0) != 0)
                throw ConfigError("marginals line " + std::to_string(lineno) +
                                  ": unrecognized header '" + line + "'");
            flush();
            const std::size_t idx = std::stoul(line.substr(tag.size()));
            if (idx != out.size() + 1)
                throw ConfigError("marginals line " + std::to_string(lineno) +
                                  ": block index " + std::to_string(idx) + ", expected " +
                                  std::to_string(out.size() + 1));
            continue;
        }
        std::istringstream ls(line);
        double p = 0.0, w = 0.0;
        if (!(ls >> p >> w))
            throw ConfigError("marginals line " + std::to_string(lineno) +
                              ": expected 'price<TAB>weight'");
        pts.push_back(p);
        wts.push_back(w);
    }
    flush();
    if (out.empty()) throw ConfigError("marginals: no blocks found");
    return out;
}

}  // namespace dynmot
