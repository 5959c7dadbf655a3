#pragma once

// Payoff functionals on price paths, dynamically tradable European options,
// and pricing rules: the bands that constrain at which prices those options
// may trade at intermediate dates.
//
// A pricing rule assigns to each triple (i, j, k) -- price date t_i, option k
// maturing at t_j, i < j -- and each path prefix (s_1..s_i) an interval
// [lower, upper] of admissible quoted prices.  `unrestricted` instead pins
// the quote to the realized payoff, which collapses the model to the plain
// martingale-transport bound.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynmot/common.hpp"

namespace dynmot {

// --- payoffs on full paths ---------------------------------------------------

struct PayoffFunction {
    std::string name;
    int periods = 0;  // expected path length n
    std::function<double(std::span<const double>)> eval;

    double operator()(std::span<const double> path) const { return eval(path); }
};

inline PayoffFunction asian_call(int n, double strike) {
    if (n < 1) throw ConfigError("asian_call: need at least one period");
    return {"asian_call", n, [n, strike](std::span<const double> s) {
                double avg = 0.0;
                for (double x : s) avg += x;
                avg /= static_cast<double>(n);
                return std::max(avg - strike, 0.0);
            }};
}

inline PayoffFunction terminal_call(int n, double strike) {
    if (n < 1) throw ConfigError("terminal_call: need at least one period");
    return {"terminal_call", n,
            [strike](std::span<const double> s) { return std::max(s.back() - strike, 0.0); }};
}

inline PayoffFunction lookback_max(int n) {
    if (n < 1) throw ConfigError("lookback_max: need at least one period");
    return {"lookback_max", n, [](std::span<const double> s) {
                double m = 0.0;
                for (double x : s) m = std::max(m, x);
                return m;
            }};
}

// --- tradable European options ----------------------------------------------

struct TradableOption {
    int maturity = 0;                      // j in 1..n
    std::function<double(double)> payoff;  // v(s_j)
    double growth_bound = 1.0;             // c with payoff(x) <= c*(1+x)
    bool is_call = false;
    double strike = 0.0;
    std::string label;

    // Linear-growth check on a sample grid over [0, s_max]; rules and grids
    // rely on it to keep band envelopes finite.
    void validate_growth(double s_max) const {
        const int samples = 257;
        for (int q = 0; q < samples; ++q) {
            const double x = s_max * q / (samples - 1);
            const double v = payoff(x);
            if (!std::isfinite(v) || v > growth_bound * (1.0 + x) + 1e-9)
                throw ConfigError("option '" + label + "': payoff exceeds growth bound " +
                                  std::to_string(growth_bound) + " at s=" + std::to_string(x));
        }
    }
};

inline TradableOption call_option(int maturity, double strike) {
    if (maturity < 1) throw ConfigError("call_option: maturity must be >= 1");
    if (strike < 0.0) throw ConfigError("call_option: negative strike");
    TradableOption o;
    o.maturity = maturity;
    o.strike = strike;
    o.is_call = true;
    o.payoff = [strike](double s) { return std::max(s - strike, 0.0); };
    o.growth_bound = 1.0;
    o.label = "call(j=" + std::to_string(maturity) + ",K=" + std::to_string(strike) + ")";
    return o;
}

inline TradableOption generic_option(int maturity, std::function<double(double)> payoff,
                                     double growth_bound, std::string label) {
    if (maturity < 1) throw ConfigError("generic_option: maturity must be >= 1");
    if (!(growth_bound > 0.0)) throw ConfigError("generic_option: growth bound must be positive");
    TradableOption o;
    o.maturity = maturity;
    o.payoff = std::move(payoff);
    o.growth_bound = growth_bound;
    o.label = std::move(label);
    return o;
}

// Active triple: option k (maturing at t_j) quoted at the earlier date t_i.
struct Triple {
    int i = 0, j = 0, k = 0;  // 1-based dates, 0-based option index
};

inline std::vector<Triple> active_triples(const std::vector<TradableOption>& options, int n) {
    std::vector<Triple> ts;
    for (int k = 0; k < static_cast<int>(options.size()); ++k) {
        const int j = options[static_cast<std::size_t>(k)].maturity;
        if (j < 1 || j > n)
            throw ConfigError("option '" + options[static_cast<std::size_t>(k)].label +
                              "': maturity out of range 1.." + std::to_string(n));
        for (int i = 1; i < j; ++i) ts.push_back({i, j, k});
    }
    return ts;
}

// --- normal distribution and Black-Scholes -----------------------------------

// Via erfc; absolute error well below the 1e-7 contract.
inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

// Undiscounted Black-Scholes call price with boundary cases handled exactly:
// zero spot is worthless, zero strike is the asset itself.
inline double bs_price(double spot, double strike, double sigma, double tau) {
    if (!(sigma > 0.0) || !(tau > 0.0))
        throw ConfigError("bs_price: sigma and tau must be positive");
    if (spot <= 0.0) return 0.0;
    if (strike <= 0.0) return spot - strike;
    const double v = sigma * std::sqrt(tau);
    const double d1 = (std::log(spot / strike) + 0.5 * v * v) / v;
    const double d2 = d1 - v;
    return spot * normal_cdf(d1) - strike * normal_cdf(d2);
}

// --- pricing rules ------------------------------------------------------------

class PricingRule {
  public:
    enum class Kind { unrestricted, interval };

    static PricingRule unrestricted() {
        PricingRule r;
        r.kind_ = Kind::unrestricted;
        return r;
    }

    using BandFn = std::function<double(const Triple&, std::span<const double>)>;

    static PricingRule interval(BandFn lower, BandFn upper, std::string name) {
        PricingRule r;
        r.kind_ = Kind::interval;
        r.lower_ = std::move(lower);
        r.upper_ = std::move(upper);
        r.name_ = std::move(name);
        return r;
    }

    Kind kind() const noexcept { return kind_; }
    bool restricted() const noexcept { return kind_ == Kind::interval; }
    const std::string& name() const noexcept { return name_; }
    double lift() const noexcept { return lift_; }
    double cut() const noexcept { return cut_; }

    // Band endpoints at a prefix (s_1..s_i), after any accumulated tightening.
    double lower(const Triple& t, std::span<const double> prefix) const {
        return lower_(t, prefix) + lift_;
    }
    double upper(const Triple& t, std::span<const double> prefix) const {
        return upper_(t, prefix) - cut_;
    }

  private:
    Kind kind_ = Kind::unrestricted;
    BandFn lower_, upper_;
    double lift_ = 0.0, cut_ = 0.0;
    std::string name_ = "unrestricted";

    friend PricingRule tighten(const PricingRule&, double, double);
};

// Raises every lower band by eps1 and cuts every upper band by eps2.
// Tightenings compose additively; emptied bands surface when a grid is built
// over the rule, with the offending prefix reported.
inline PricingRule tighten(const PricingRule& rule, double eps1, double eps2) {
    if (eps1 < 0.0 || eps2 < 0.0) throw ConfigError("tighten: epsilons must be nonnegative");
    if (!rule.restricted()) {
        if (eps1 > 0.0 || eps2 > 0.0)
            throw ConfigError("tighten: the unrestricted rule has no bands to tighten");
        return rule;
    }
    PricingRule r = rule;
    r.lift_ += eps1;
    r.cut_ += eps2;
    return r;
}

namespace detail {

// Piecewise-linear function through hull vertices, linear continuation past
// the last vertex.
struct PiecewiseLinear {
    std::vector<double> xs, ys;

    double operator()(double x) const {
        if (xs.size() == 1) return ys[0];
        std::size_t hi = static_cast<std::size_t>(
            std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
        if (hi == 0) hi = 1;
        if (hi >= xs.size()) hi = xs.size() - 1;
        const double t = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
        return ys[hi - 1] + t * (ys[hi] - ys[hi - 1]);
    }
};

// Lower convex envelope of the sampled payoff via a monotone-chain scan.
inline PiecewiseLinear convex_envelope(const std::function<double(double)>& f, double s_max,
                                       int samples) {
    std::vector<double> xs(static_cast<std::size_t>(samples)), ys(xs.size());
    for (int q = 0; q < samples; ++q) {
        xs[static_cast<std::size_t>(q)] = s_max * q / (samples - 1);
        ys[static_cast<std::size_t>(q)] = f(xs[static_cast<std::size_t>(q)]);
    }
    std::vector<std::size_t> hull;
    for (std::size_t q = 0; q < xs.size(); ++q) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2], b = hull.back();
            // Keep b only if it lies strictly below segment a..q.
            const double cross = (xs[b] - xs[a]) * (ys[q] - ys[a]) - (ys[b] - ys[a]) * (xs[q] - xs[a]);
            if (cross > 0.0) break;
            hull.pop_back();
        }
        hull.push_back(q);
    }
    PiecewiseLinear pl;
    for (std::size_t h : hull) {
        pl.xs.push_back(xs[h]);
        pl.ys.push_back(ys[h]);
    }
    return pl;
}

}  // namespace detail

// Model-free no-arbitrage bands.  For a vanilla call these are closed-form:
// lower (s_i - K)^+ (convexity), upper s_i (concavity and positivity).  For a
// generic payoff the bands are the convex/concave envelopes of the payoff on
// [0, s_max], sampled and hulled once at construction.
inline PricingRule no_arbitrage_rule(const std::vector<TradableOption>& options, int n,
                                     double s_max = 0.0) {
    active_triples(options, n);  // validates maturities
    struct Bands {
        bool is_call = false;
        double strike = 0.0;
        detail::PiecewiseLinear lo, hi;
    };
    auto bands = std::make_shared<std::vector<Bands>>();
    for (const auto& o : options) {
        Bands b;
        b.is_call = o.is_call;
        b.strike = o.strike;
        if (!o.is_call) {
            if (!(s_max > 0.0))
                throw ConfigError("no_arbitrage_rule: s_max required for non-call payoffs");
            o.validate_growth(s_max);
            const int samples = 2049;
            b.lo = detail::convex_envelope(o.payoff, s_max, samples);
            auto neg = [&o](double x) { return -o.payoff(x); };
            b.hi = detail::convex_envelope(neg, s_max, samples);
            for (double& y : b.hi.ys) y = -y;
        }
        bands->push_back(std::move(b));
    }
    auto lower = [bands](const Triple& t, std::span<const double> prefix) {
        const double s = prefix.back();
        const auto& b = (*bands)[static_cast<std::size_t>(t.k)];
        return b.is_call ? std::max(s - b.strike, 0.0) : b.lo(s);
    };
    auto upper = [bands](const Triple& t, std::span<const double> prefix) {
        const double s = prefix.back();
        const auto& b = (*bands)[static_cast<std::size_t>(t.k)];
        return b.is_call ? s : b.hi(s);
    };
    return PricingRule::interval(std::move(lower), std::move(upper), "no_arbitrage");
}

// Black-Scholes volatility band: quotes must lie between the model prices at
// sigma_hat -+ eps_vol over the remaining time t_j - t_i.  `times` holds the
// trading dates t_1 < ... < t_n.  Calls only.
inline PricingRule black_scholes_rule(const std::vector<TradableOption>& options, int n,
                                      std::vector<double> times, double sigma_hat,
                                      double eps_vol) {
    active_triples(options, n);
    if (static_cast<int>(times.size()) != n)
        throw ConfigError("black_scholes_rule: need one time per period");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw ConfigError("black_scholes_rule: times must be strictly increasing");
    if (!(eps_vol >= 0.0) || !(sigma_hat - eps_vol > 0.0))
        throw ConfigError("black_scholes_rule: need 0 < sigma_hat - eps_vol");
    std::vector<double> strikes;
    for (const auto& o : options) {
        if (!o.is_call)
            throw ConfigError("black_scholes_rule: option '" + o.label + "' is not a call");
        strikes.push_back(o.strike);
    }
    auto shared_ts = std::make_shared<std::vector<double>>(std::move(times));
    auto shared_ks = std::make_shared<std::vector<double>>(std::move(strikes));
    auto band = [shared_ts, shared_ks](double sigma) {
        return [shared_ts, shared_ks, sigma](const Triple& t, std::span<const double> prefix) {
            const double tau = (*shared_ts)[static_cast<std::size_t>(t.j - 1)] -
                               (*shared_ts)[static_cast<std::size_t>(t.i - 1)];
            return bs_price(prefix.back(), (*shared_ks)[static_cast<std::size_t>(t.k)], sigma, tau);
        };
    };
    return PricingRule::interval(band(sigma_hat - eps_vol), band(sigma_hat + eps_vol),
                                 "black_scholes");
}

// Bands affine in the current spot: endpoint = intercept + slope * s_i,
// one set of coefficients per option.
struct AffineBand {
    double lower_intercept = 0.0, lower_slope = 0.0;
    double upper_intercept = 0.0, upper_slope = 0.0;
};

inline PricingRule explicit_bands_rule(const std::vector<TradableOption>& options, int n,
                                       std::vector<AffineBand> coeffs) {
    active_triples(options, n);
    if (coeffs.size() != options.size())
        throw ConfigError("explicit_bands_rule: need one band per option");
    auto shared = std::make_shared<std::vector<AffineBand>>(std::move(coeffs));
    auto lower = [shared](const Triple& t, std::span<const double> prefix) {
        const auto& c = (*shared)[static_cast<std::size_t>(t.k)];
        return c.lower_intercept + c.lower_slope * prefix.back();
    };
    auto upper = [shared](const Triple& t, std::span<const double> prefix) {
        const auto& c = (*shared)[static_cast<std::size_t>(t.k)];
        return c.upper_intercept + c.upper_slope * prefix.back();
    };
    return PricingRule::interval(std::move(lower), std::move(upper), "explicit_bands");
}

}  // namespace dynmot
