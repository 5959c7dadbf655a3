#pragma once

// Finite scenario grid and the two linear programs posed on it.
//
// A scenario is a path through the marginal supports together with one band
// endpoint (lower or upper) per active triple.  Quotes enter every constraint
// affinely, so requiring the super-replication inequality at both endpoints
// of each band is equivalent to requiring it on the whole interval, and
// mixing endpoint scenarios inside a path prefix lets a measure realize any
// quote in the band.  The grid therefore carries
//     (prod_i m_i) * 2^(#triples)
// scenarios for interval rules, and just the paths for the unrestricted rule,
// where the quote is pinned to the realized payoff and the quote terms cancel.
//
// Primal (measure) program, variables = scenario weights, maximize payoff:
//   total mass 1; marginal rows per (date, support point); martingale rows
//   per path prefix; quote-consistency rows per (triple, prefix).
// Dual (hedge) program, variables = static positions u_i per support point,
// forward positions per prefix, option positions per (triple, prefix), all
// free; one >=-constraint per scenario; minimize the static cost.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynmot/common.hpp"
#include "dynmot/instruments.hpp"
#include "dynmot/lp.hpp"
#include "dynmot/marginals.hpp"

namespace dynmot {

class ScenarioGrid {
  public:
    // Builds the grid geometry and band tables; throws InfeasibleRuleError
    // when a band is empty at some prefix.
    ScenarioGrid(std::vector<std::vector<double>> supports, double s0,
                 std::vector<TradableOption> options, PricingRule rule)
        : supports_(std::move(supports)), s0_(s0), options_(std::move(options)),
          rule_(std::move(rule)) {
        const int n = periods();
        if (n < 1) throw ConfigError("grid: need at least one period");
        for (const auto& sup : supports_)
            if (sup.empty()) throw ConfigError("grid: empty support");
        // Linear-growth sanity for every option over the largest support.
        double smax = 0.0;
        for (const auto& sup : supports_) smax = std::max(smax, sup.back());
        for (const auto& o : options_) o.validate_growth(smax);

        prefix_count_.assign(static_cast<std::size_t>(n) + 1, 1);
        for (int i = 1; i <= n; ++i)
            prefix_count_[static_cast<std::size_t>(i)] =
                prefix_count_[static_cast<std::size_t>(i - 1)] *
                static_cast<long>(supports_[static_cast<std::size_t>(i - 1)].size());
        suffix_size_.assign(static_cast<std::size_t>(n) + 1, 1);
        for (int i = n - 1; i >= 0; --i)
            suffix_size_[static_cast<std::size_t>(i)] =
                suffix_size_[static_cast<std::size_t>(i + 1)] *
                static_cast<long>(supports_[static_cast<std::size_t>(i)].size());

        if (rule_.restricted()) triples_ = active_triples(options_, n);
        const int T = num_triples();
        if (T >= 40 || num_paths() > (2000000L >> T))
            throw ConfigError("grid: scenario count exceeds the supported scale");

        // Band tables per (triple, prefix), checking nonemptiness pointwise.
        band_lo_.resize(static_cast<std::size_t>(T));
        band_hi_.resize(static_cast<std::size_t>(T));
        std::vector<double> prefix;
        for (int tt = 0; tt < T; ++tt) {
            const Triple& t = triples_[static_cast<std::size_t>(tt)];
            const long np = prefix_count_[static_cast<std::size_t>(t.i)];
            band_lo_[static_cast<std::size_t>(tt)].resize(static_cast<std::size_t>(np));
            band_hi_[static_cast<std::size_t>(tt)].resize(static_cast<std::size_t>(np));
            for (long q = 0; q < np; ++q) {
                decode_prefix(q, t.i, prefix);
                const double lo = rule_.lower(t, prefix);
                const double hi = rule_.upper(t, prefix);
                if (!std::isfinite(lo) || !std::isfinite(hi))
                    throw NumericalError("grid: non-finite band");
                if (lo > hi + 1e-12 * (1.0 + std::abs(hi))) {
                    std::string what = "grid: empty price band for option " +
                                       options_[static_cast<std::size_t>(t.k)].label +
                                       " quoted at date " + std::to_string(t.i) + ", prefix (";
                    for (std::size_t c = 0; c < prefix.size(); ++c)
                        what += (c ? ", " : "") + std::to_string(prefix[c]);
                    what += "): lower " + std::to_string(lo) + " > upper " + std::to_string(hi);
                    throw InfeasibleRuleError(what, prefix);
                }
                band_lo_[static_cast<std::size_t>(tt)][static_cast<std::size_t>(q)] = lo;
                band_hi_[static_cast<std::size_t>(tt)][static_cast<std::size_t>(q)] = hi;
            }
        }
    }

    int periods() const noexcept { return static_cast<int>(supports_.size()); }
    double s0() const noexcept { return s0_; }
    const std::vector<std::vector<double>>& supports() const noexcept { return supports_; }
    const std::vector<TradableOption>& options() const noexcept { return options_; }
    const PricingRule& rule() const noexcept { return rule_; }
    const std::vector<Triple>& triples() const noexcept { return triples_; }
    int num_triples() const noexcept { return static_cast<int>(triples_.size()); }
    long num_paths() const noexcept { return prefix_count_.back(); }
    long num_scenarios() const noexcept { return num_paths() << num_triples(); }
    long prefix_count(int i) const { return prefix_count_.at(static_cast<std::size_t>(i)); }

    long path_of(long scenario) const noexcept { return scenario >> num_triples(); }
    int mask_of(long scenario) const noexcept {
        return static_cast<int>(scenario & ((1L << num_triples()) - 1));
    }
    long prefix_id(long path, int i) const {
        return path / suffix_size_[static_cast<std::size_t>(i)];
    }

    // Support index of date i (1-based) along the path.
    int support_index(long path, int i) const {
        return static_cast<int>((path / suffix_size_[static_cast<std::size_t>(i)]) %
                                static_cast<long>(supports_[static_cast<std::size_t>(i - 1)].size()));
    }
    double price_at(long path, int i) const {
        return supports_[static_cast<std::size_t>(i - 1)]
                        [static_cast<std::size_t>(support_index(path, i))];
    }
    void path_prices(long path, std::vector<double>& out) const {
        const int n = periods();
        out.resize(static_cast<std::size_t>(n));
        for (int i = 1; i <= n; ++i) out[static_cast<std::size_t>(i - 1)] = price_at(path, i);
    }

    // Prices s_1..s_i along prefix q of length i.
    std::vector<double> prefix_values(int i, long q) const {
        std::vector<double> out;
        decode_prefix(q, i, out);
        return out;
    }

    double band_lower(int tt, long prefix) const {
        return band_lo_[static_cast<std::size_t>(tt)][static_cast<std::size_t>(prefix)];
    }
    double band_upper(int tt, long prefix) const {
        return band_hi_[static_cast<std::size_t>(tt)][static_cast<std::size_t>(prefix)];
    }

    // Quote of triple tt in the given scenario: band endpoint for interval
    // rules, realized payoff for the unrestricted rule.
    double quote(long scenario, int tt) const {
        const long path = path_of(scenario);
        const Triple& t = triples_[static_cast<std::size_t>(tt)];
        const long q = prefix_id(path, t.i);
        return (mask_of(scenario) >> tt) & 1 ? band_upper(tt, q) : band_lower(tt, q);
    }
    double option_value(long path, int tt) const {
        const Triple& t = triples_[static_cast<std::size_t>(tt)];
        return options_[static_cast<std::size_t>(t.k)].payoff(price_at(path, t.j));
    }

  private:
    void decode_prefix(long q, int len, std::vector<double>& out) const {
        out.resize(static_cast<std::size_t>(len));
        for (int i = len; i >= 1; --i) {
            const long m = static_cast<long>(supports_[static_cast<std::size_t>(i - 1)].size());
            out[static_cast<std::size_t>(i - 1)] =
                supports_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(q % m)];
            q /= m;
        }
    }

    std::vector<std::vector<double>> supports_;
    double s0_ = 0.0;
    std::vector<TradableOption> options_;
    PricingRule rule_;
    std::vector<Triple> triples_;
    std::vector<long> prefix_count_, suffix_size_;
    std::vector<std::vector<double>> band_lo_, band_hi_;
};

inline ScenarioGrid build_grid(const MarginalSystem& ms, std::vector<TradableOption> options,
                               PricingRule rule) {
    std::vector<std::vector<double>> sup;
    for (const auto& m : ms.all()) sup.push_back(m.points);
    return ScenarioGrid(std::move(sup), ms.s0(), std::move(options), std::move(rule));
}

inline std::vector<double> payoff_by_path(const ScenarioGrid& grid, const PayoffFunction& payoff) {
    if (payoff.periods != grid.periods())
        throw ConfigError("payoff: expects " + std::to_string(payoff.periods) +
                          " periods, grid has " + std::to_string(grid.periods()));
    std::vector<double> out(static_cast<std::size_t>(grid.num_paths()));
    std::vector<double> s;
    for (long p = 0; p < grid.num_paths(); ++p) {
        grid.path_prices(p, s);
        const double v = payoff.eval(s);
        if (!std::isfinite(v)) throw NumericalError("payoff: non-finite value on the grid");
        out[static_cast<std::size_t>(p)] = v;
    }
    return out;
}

// Row layout of the measure program, kept so that solutions can be decoded
// and residuals attributed.
struct PrimalLayout {
    int mass_row = 0;
    std::vector<int> marginal_base;  // per date i (1-based index i-1)
    std::vector<int> martingale_base;  // per date i in 1..n-1
    std::vector<int> option_base;      // per triple
    int num_rows = 0;
};

namespace griddetail {

inline void check_sizes(const ScenarioGrid& grid, const MarginalSystem& ms) {
    if (ms.periods() != grid.periods())
        throw ConfigError("grid/marginals period mismatch");
    for (int i = 1; i <= grid.periods(); ++i)
        if (ms.marginal(i).points != grid.supports()[static_cast<std::size_t>(i - 1)])
            throw ConfigError("grid support differs from marginal support at date " +
                              std::to_string(i));
}

}  // namespace griddetail

// Measure program: maximize expected payoff over calibrated martingale
// measures consistent with the quote bands.
inline LinearProgram assemble_primal(const ScenarioGrid& grid, const MarginalSystem& ms,
                                     const std::vector<double>& path_payoff,
                                     PrimalLayout* layout_out = nullptr) {
    griddetail::check_sizes(grid, ms);
    const int n = grid.periods();
    const long S = grid.num_scenarios();
    const int T = grid.num_triples();

    PrimalLayout lay;
    int row = 0;
    lay.mass_row = row++;
    lay.marginal_base.resize(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        lay.marginal_base[static_cast<std::size_t>(i - 1)] = row;
        row += static_cast<int>(ms.marginal(i).size());
    }
    lay.martingale_base.resize(static_cast<std::size_t>(n - 1));
    for (int i = 1; i <= n - 1; ++i) {
        lay.martingale_base[static_cast<std::size_t>(i - 1)] = row;
        row += static_cast<int>(grid.prefix_count(i));
    }
    lay.option_base.resize(static_cast<std::size_t>(T));
    for (int tt = 0; tt < T; ++tt) {
        lay.option_base[static_cast<std::size_t>(tt)] = row;
        row += static_cast<int>(grid.prefix_count(grid.triples()[static_cast<std::size_t>(tt)].i));
    }
    lay.num_rows = row;

    LinearProgram lp;
    lp.sense = LinearProgram::Sense::maximize;
    lp.num_vars = static_cast<int>(S);
    lp.objective.resize(static_cast<std::size_t>(S));
    lp.row_sense.assign(static_cast<std::size_t>(row), LinearProgram::RowSense::eq);
    lp.rhs.assign(static_cast<std::size_t>(row), 0.0);
    lp.rhs[static_cast<std::size_t>(lay.mass_row)] = 1.0;
    for (int i = 1; i <= n; ++i)
        for (std::size_t u = 0; u < ms.marginal(i).size(); ++u)
            lp.rhs[static_cast<std::size_t>(lay.marginal_base[static_cast<std::size_t>(i - 1)]) + u] =
                ms.marginal(i).weights[u];

    lp.entries.reserve(static_cast<std::size_t>(S) * static_cast<std::size_t>(2 * n + T));
    for (long sc = 0; sc < S; ++sc) {
        const long path = grid.path_of(sc);
        const int col = static_cast<int>(sc);
        lp.objective[static_cast<std::size_t>(sc)] = path_payoff[static_cast<std::size_t>(path)];
        lp.add_entry(lay.mass_row, col, 1.0);
        for (int i = 1; i <= n; ++i)
            lp.add_entry(lay.marginal_base[static_cast<std::size_t>(i - 1)] +
                             grid.support_index(path, i),
                         col, 1.0);
        for (int i = 1; i <= n - 1; ++i) {
            const double d = grid.price_at(path, i + 1) - grid.price_at(path, i);
            if (d != 0.0)
                lp.add_entry(lay.martingale_base[static_cast<std::size_t>(i - 1)] +
                                 static_cast<int>(grid.prefix_id(path, i)),
                             col, d);
        }
        for (int tt = 0; tt < T; ++tt) {
            const Triple& t = grid.triples()[static_cast<std::size_t>(tt)];
            const double d = grid.option_value(path, tt) - grid.quote(sc, tt);
            if (d != 0.0)
                lp.add_entry(lay.option_base[static_cast<std::size_t>(tt)] +
                                 static_cast<int>(grid.prefix_id(path, t.i)),
                             col, d);
        }
    }
    if (layout_out) *layout_out = lay;
    return lp;
}

// Same marginal/martingale skeleton with the quote rows removed: the plain
// martingale-transport program used as the baseline.
inline LinearProgram assemble_baseline(const ScenarioGrid& grid, const MarginalSystem& ms,
                                       const std::vector<double>& path_payoff) {
    griddetail::check_sizes(grid, ms);
    const int n = grid.periods();
    const long P = grid.num_paths();

    int row = 0;
    const int mass_row = row++;
    std::vector<int> marg_base(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        marg_base[static_cast<std::size_t>(i - 1)] = row;
        row += static_cast<int>(ms.marginal(i).size());
    }
    std::vector<int> mart_base(static_cast<std::size_t>(n - 1));
    for (int i = 1; i <= n - 1; ++i) {
        mart_base[static_cast<std::size_t>(i - 1)] = row;
        row += static_cast<int>(grid.prefix_count(i));
    }

    LinearProgram lp;
    lp.sense = LinearProgram::Sense::maximize;
    lp.num_vars = static_cast<int>(P);
    lp.objective = path_payoff;
    lp.row_sense.assign(static_cast<std::size_t>(row), LinearProgram::RowSense::eq);
    lp.rhs.assign(static_cast<std::size_t>(row), 0.0);
    lp.rhs[static_cast<std::size_t>(mass_row)] = 1.0;
    for (int i = 1; i <= n; ++i)
        for (std::size_t u = 0; u < ms.marginal(i).size(); ++u)
            lp.rhs[static_cast<std::size_t>(marg_base[static_cast<std::size_t>(i - 1)]) + u] =
                ms.marginal(i).weights[u];
    for (long p = 0; p < P; ++p) {
        const int col = static_cast<int>(p);
        lp.add_entry(mass_row, col, 1.0);
        for (int i = 1; i <= n; ++i)
            lp.add_entry(marg_base[static_cast<std::size_t>(i - 1)] + grid.support_index(p, i), col,
                         1.0);
        for (int i = 1; i <= n - 1; ++i) {
            const double d = grid.price_at(p, i + 1) - grid.price_at(p, i);
            if (d != 0.0)
                lp.add_entry(mart_base[static_cast<std::size_t>(i - 1)] +
                                 static_cast<int>(grid.prefix_id(p, i)),
                             col, d);
        }
    }
    return lp;
}

// Column layout of the hedge program.
struct DualLayout {
    std::vector<int> u_base;       // per date i: base of u_i over the support
    std::vector<int> stock_base;   // per date i in 1..n-1: base over prefixes
    std::vector<int> option_base;  // per triple: base over prefixes
    int num_vars = 0;
};

inline DualLayout dual_layout(const ScenarioGrid& grid, const MarginalSystem& ms) {
    griddetail::check_sizes(grid, ms);
    const int n = grid.periods();
    DualLayout lay;
    int col = 0;
    lay.u_base.resize(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        lay.u_base[static_cast<std::size_t>(i - 1)] = col;
        col += static_cast<int>(ms.marginal(i).size());
    }
    lay.stock_base.resize(static_cast<std::size_t>(n - 1));
    for (int i = 1; i <= n - 1; ++i) {
        lay.stock_base[static_cast<std::size_t>(i - 1)] = col;
        col += static_cast<int>(grid.prefix_count(i));
    }
    lay.option_base.resize(static_cast<std::size_t>(grid.num_triples()));
    for (int tt = 0; tt < grid.num_triples(); ++tt) {
        lay.option_base[static_cast<std::size_t>(tt)] = col;
        col += static_cast<int>(grid.prefix_count(grid.triples()[static_cast<std::size_t>(tt)].i));
    }
    lay.num_vars = col;
    return lay;
}

// Hedge program: minimize the static cost of a semi-static portfolio that
// super-replicates the payoff on every scenario.
inline LinearProgram assemble_dual(const ScenarioGrid& grid, const MarginalSystem& ms,
                                   const std::vector<double>& path_payoff,
                                   DualLayout* layout_out = nullptr) {
    const DualLayout lay = dual_layout(grid, ms);
    const int n = grid.periods();
    const long S = grid.num_scenarios();
    const int T = grid.num_triples();

    LinearProgram lp;
    lp.sense = LinearProgram::Sense::minimize;
    lp.num_vars = lay.num_vars;
    lp.objective.assign(static_cast<std::size_t>(lay.num_vars), 0.0);
    lp.free_var.assign(static_cast<std::size_t>(lay.num_vars), true);
    for (int i = 1; i <= n; ++i)
        for (std::size_t u = 0; u < ms.marginal(i).size(); ++u)
            lp.objective[static_cast<std::size_t>(lay.u_base[static_cast<std::size_t>(i - 1)]) + u] =
                ms.marginal(i).weights[u];

    lp.row_sense.assign(static_cast<std::size_t>(S), LinearProgram::RowSense::ge);
    lp.rhs.resize(static_cast<std::size_t>(S));
    lp.entries.reserve(static_cast<std::size_t>(S) * static_cast<std::size_t>(2 * n + T));
    for (long sc = 0; sc < S; ++sc) {
        const long path = grid.path_of(sc);
        const int row = static_cast<int>(sc);
        lp.rhs[static_cast<std::size_t>(sc)] = path_payoff[static_cast<std::size_t>(path)];
        for (int i = 1; i <= n; ++i)
            lp.add_entry(row,
                         lay.u_base[static_cast<std::size_t>(i - 1)] + grid.support_index(path, i),
                         1.0);
        for (int i = 1; i <= n - 1; ++i) {
            const double d = grid.price_at(path, i + 1) - grid.price_at(path, i);
            if (d != 0.0)
                lp.add_entry(row,
                             lay.stock_base[static_cast<std::size_t>(i - 1)] +
                                 static_cast<int>(grid.prefix_id(path, i)),
                             d);
        }
        for (int tt = 0; tt < T; ++tt) {
            const Triple& t = grid.triples()[static_cast<std::size_t>(tt)];
            const double d = grid.option_value(path, tt) - grid.quote(sc, tt);
            if (d != 0.0)
                lp.add_entry(row,
                             lay.option_base[static_cast<std::size_t>(tt)] +
                                 static_cast<int>(grid.prefix_id(path, t.i)),
                             d);
        }
    }
    if (layout_out) *layout_out = lay;
    return lp;
}

// --- solution decoding --------------------------------------------------------

// Semi-static super-replication portfolio.
struct HedgePortfolio {
    // Static option positions: value of u_i at each support point of mu_i.
    std::vector<std::vector<double>> u;
    // Forward (stock) position entered at date i, per prefix of length i.
    std::vector<std::vector<double>> stock;
    // Position in the traded option of triple tt, per prefix of length t.i.
    std::vector<std::vector<double>> option;
    double cost = 0.0;  // sum_i integral of u_i against mu_i
};

inline HedgePortfolio extract_hedge(const ScenarioGrid& grid, const MarginalSystem& ms,
                                    const LpSolution& dual_solution) {
    const DualLayout lay = dual_layout(grid, ms);
    if (dual_solution.status != Status::optimal ||
        static_cast<int>(dual_solution.x.size()) != lay.num_vars)
        throw NumericalError("extract_hedge: no optimal dual solution");
    const int n = grid.periods();
    HedgePortfolio h;
    h.u.resize(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        const auto& m = ms.marginal(i);
        auto& ui = h.u[static_cast<std::size_t>(i - 1)];
        ui.resize(m.size());
        for (std::size_t k = 0; k < m.size(); ++k) {
            ui[k] = dual_solution.x[static_cast<std::size_t>(
                lay.u_base[static_cast<std::size_t>(i - 1)] + static_cast<int>(k))];
            h.cost += m.weights[k] * ui[k];
        }
    }
    h.stock.resize(static_cast<std::size_t>(n - 1));
    for (int i = 1; i <= n - 1; ++i) {
        auto& si = h.stock[static_cast<std::size_t>(i - 1)];
        si.resize(static_cast<std::size_t>(grid.prefix_count(i)));
        for (std::size_t q = 0; q < si.size(); ++q)
            si[q] = dual_solution.x[static_cast<std::size_t>(
                lay.stock_base[static_cast<std::size_t>(i - 1)] + static_cast<int>(q))];
    }
    h.option.resize(static_cast<std::size_t>(grid.num_triples()));
    for (int tt = 0; tt < grid.num_triples(); ++tt) {
        auto& ot = h.option[static_cast<std::size_t>(tt)];
        ot.resize(static_cast<std::size_t>(
            grid.prefix_count(grid.triples()[static_cast<std::size_t>(tt)].i)));
        for (std::size_t q = 0; q < ot.size(); ++q)
            ot[q] = dual_solution.x[static_cast<std::size_t>(
                lay.option_base[static_cast<std::size_t>(tt)] + static_cast<int>(q))];
    }
    return h;
}

// Portfolio value minus payoff, minimized over all scenarios: nonnegative
// (within tolerance) certifies the super-replication property.
inline double verify_superhedge(const ScenarioGrid& grid, const HedgePortfolio& h,
                                const std::vector<double>& path_payoff) {
    const int n = grid.periods();
    const int T = grid.num_triples();
    double worst = std::numeric_limits<double>::infinity();
    for (long sc = 0; sc < grid.num_scenarios(); ++sc) {
        const long path = grid.path_of(sc);
        double v = 0.0;
        for (int i = 1; i <= n; ++i)
            v += h.u[static_cast<std::size_t>(i - 1)]
                    [static_cast<std::size_t>(grid.support_index(path, i))];
        for (int i = 1; i <= n - 1; ++i)
            v += h.stock[static_cast<std::size_t>(i - 1)]
                        [static_cast<std::size_t>(grid.prefix_id(path, i))] *
                 (grid.price_at(path, i + 1) - grid.price_at(path, i));
        for (int tt = 0; tt < T; ++tt) {
            const Triple& t = grid.triples()[static_cast<std::size_t>(tt)];
            v += h.option[static_cast<std::size_t>(tt)]
                         [static_cast<std::size_t>(grid.prefix_id(path, t.i))] *
                 (grid.option_value(path, tt) - grid.quote(sc, tt));
        }
        worst = std::min(worst, v - path_payoff[static_cast<std::size_t>(path)]);
    }
    return worst;
}

// Calibrated martingale measure on the scenario grid.
struct MartingaleMeasure {
    std::vector<double> weights;  // per scenario

    double prefix_mass(const ScenarioGrid& grid, int i, long prefix) const {
        double acc = 0.0;
        for (long sc = 0; sc < grid.num_scenarios(); ++sc)
            if (grid.prefix_id(grid.path_of(sc), i) == prefix)
                acc += weights[static_cast<std::size_t>(sc)];
        return acc;
    }
};

inline MartingaleMeasure extract_measure(const ScenarioGrid& grid,
                                         const LpSolution& primal_solution) {
    if (primal_solution.status != Status::optimal ||
        static_cast<long>(primal_solution.x.size()) != grid.num_scenarios())
        throw NumericalError("extract_measure: no optimal primal solution");
    return MartingaleMeasure{primal_solution.x};
}

// Worst violations of the measure program's constraints, each normalized by
// (1 + scale); `band` additionally checks that conditional quotes stay inside
// their bands on positive-mass prefixes.
struct MeasureResiduals {
    double negativity = 0.0;
    double mass = 0.0;
    double marginal = 0.0;
    double martingale = 0.0;
    double band = 0.0;

    double worst() const {
        return std::max({negativity, mass, marginal, martingale, band});
    }
};

inline MeasureResiduals measure_residuals(const ScenarioGrid& grid, const MarginalSystem& ms,
                                          const MartingaleMeasure& mu) {
    griddetail::check_sizes(grid, ms);
    const int n = grid.periods();
    const int T = grid.num_triples();
    const long S = grid.num_scenarios();
    MeasureResiduals res;

    double mass = 0.0;
    for (long sc = 0; sc < S; ++sc) {
        const double w = mu.weights[static_cast<std::size_t>(sc)];
        res.negativity = std::max(res.negativity, -w);
        mass += w;
    }
    res.mass = std::abs(mass - 1.0);

    for (int i = 1; i <= n; ++i) {
        std::vector<double> acc(ms.marginal(i).size(), 0.0);
        for (long sc = 0; sc < S; ++sc)
            acc[static_cast<std::size_t>(grid.support_index(grid.path_of(sc), i))] +=
                mu.weights[static_cast<std::size_t>(sc)];
        for (std::size_t u = 0; u < acc.size(); ++u)
            res.marginal = std::max(res.marginal, std::abs(acc[u] - ms.marginal(i).weights[u]));
    }

    for (int i = 1; i <= n - 1; ++i) {
        std::vector<double> drift(static_cast<std::size_t>(grid.prefix_count(i)), 0.0);
        for (long sc = 0; sc < S; ++sc) {
            const long path = grid.path_of(sc);
            drift[static_cast<std::size_t>(grid.prefix_id(path, i))] +=
                mu.weights[static_cast<std::size_t>(sc)] *
                (grid.price_at(path, i + 1) - grid.price_at(path, i));
        }
        for (double d : drift)
            res.martingale = std::max(res.martingale, std::abs(d) / (1.0 + grid.s0()));
    }

    for (int tt = 0; tt < T; ++tt) {
        const Triple& t = grid.triples()[static_cast<std::size_t>(tt)];
        const long np = grid.prefix_count(t.i);
        std::vector<double> mass_q(static_cast<std::size_t>(np), 0.0);
        std::vector<double> val_q(static_cast<std::size_t>(np), 0.0);
        for (long sc = 0; sc < S; ++sc) {
            const long path = grid.path_of(sc);
            const long q = grid.prefix_id(path, t.i);
            mass_q[static_cast<std::size_t>(q)] += mu.weights[static_cast<std::size_t>(sc)];
            val_q[static_cast<std::size_t>(q)] +=
                mu.weights[static_cast<std::size_t>(sc)] * grid.option_value(path, tt);
        }
        for (long q = 0; q < np; ++q) {
            if (mass_q[static_cast<std::size_t>(q)] <= 1e-12) continue;
            const double price =
                val_q[static_cast<std::size_t>(q)] / mass_q[static_cast<std::size_t>(q)];
            const double lo = grid.band_lower(tt, q), hi = grid.band_upper(tt, q);
            const double scale = 1.0 + std::max(std::abs(lo), std::abs(hi));
            res.band = std::max(res.band, std::max(lo - price, price - hi) / scale);
        }
    }
    return res;
}

// Conditional quote of triple tt at a prefix under a measure; NaN when the
// prefix carries no mass.
inline double conditional_price(const ScenarioGrid& grid, const MartingaleMeasure& mu, int tt,
                                long prefix) {
    const Triple& t = grid.triples()[static_cast<std::size_t>(tt)];
    double mass = 0.0, val = 0.0;
    for (long sc = 0; sc < grid.num_scenarios(); ++sc) {
        const long path = grid.path_of(sc);
        if (grid.prefix_id(path, t.i) != prefix) continue;
        mass += mu.weights[static_cast<std::size_t>(sc)];
        val += mu.weights[static_cast<std::size_t>(sc)] * grid.option_value(path, tt);
    }
    if (mass <= 1e-12) return std::numeric_limits<double>::quiet_NaN();
    return val / mass;
}

}  // namespace dynmot
