#pragma once

// High-level price bounds: solve the measure and hedge programs, cross-check
// the duality gap, verify the extracted artifacts, and report everything in a
// single immutable record.  Also hosts the band-tightness sweep, the
// improvement certificate, and the proportional-transaction-cost variant.

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dynmot/common.hpp"
#include "dynmot/grid.hpp"
#include "dynmot/instruments.hpp"
#include "dynmot/lp.hpp"
#include "dynmot/marginals.hpp"

namespace dynmot {

enum class Side { upper, lower };

inline const char* to_string(Side s) noexcept { return s == Side::upper ? "upper" : "lower"; }

struct BoundOptions {
    double gap_tol = 1e-6;     // primal/dual agreement, relative-absolute
    double verify_tol = 1e-7;  // measure residuals and hedge domination
    bool want_baseline = true;
    SimplexOptions simplex{};
};

// Everything a solve produces.  For the lower side all values (and the hedge)
// are reported in payoff units, i.e. already negated back: `primal_value` is
// the bound itself and the hedge sub-replicates the payoff.
struct BoundReport {
    Side side = Side::upper;
    Status status = Status::numerical_failure;
    double primal_value = std::numeric_limits<double>::quiet_NaN();
    double dual_value = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::quiet_NaN();  // |primal - dual|
    // Value of the quote-row-free program (plain martingale-transport bound)
    // on the same side; NaN when not requested or not applicable.
    double mot_baseline = std::numeric_limits<double>::quiet_NaN();

    HedgePortfolio hedge;          // empty for the transaction-cost variant
    MartingaleMeasure measure;
    MeasureResiduals measure_residuals;
    // min over scenarios of (hedge - payoff) for the upper side, of
    // (payoff - hedge) for the lower side; >= -verify_tol when verified.
    double hedge_margin = std::numeric_limits<double>::quiet_NaN();

    std::string message;                    // diagnostic for non-optimal runs
    std::vector<double> infeasible_prefix;  // witness when a band was empty

    long primal_iterations = 0, dual_iterations = 0;
    bool primal_via_dual = false, dual_via_dual = false;

    std::shared_ptr<const ScenarioGrid> grid;  // geometry the solve ran on
};

namespace boundsdetail {

inline std::vector<double> oriented(const std::vector<double>& phi, Side side) {
    if (side == Side::upper) return phi;
    std::vector<double> neg(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) neg[i] = -phi[i];
    return neg;
}

inline double orient_back(double v, Side side) { return side == Side::upper ? v : -v; }

inline void flip_hedge(HedgePortfolio& h) {
    for (auto& ui : h.u)
        for (double& v : ui) v = -v;
    for (auto& si : h.stock)
        for (double& v : si) v = -v;
    for (auto& oi : h.option)
        for (double& v : oi) v = -v;
    h.cost = -h.cost;
}

}  // namespace boundsdetail

// Solves both programs on a prebuilt grid.  `baseline_hint`, when given,
// skips the baseline solve (sweeps reuse one baseline across entries).
inline BoundReport bound_on_grid(Side side, std::shared_ptr<const ScenarioGrid> grid,
                                 const MarginalSystem& ms, const PayoffFunction& payoff,
                                 const BoundOptions& opt = {},
                                 const double* baseline_hint = nullptr) {
    BoundReport rep;
    rep.side = side;
    rep.grid = grid;
    const std::vector<double> phi =
        boundsdetail::oriented(payoff_by_path(*grid, payoff), side);

    const LpSolution psol = simplex_solve(assemble_primal(*grid, ms, phi), opt.simplex);
    rep.primal_iterations = psol.iterations;
    rep.primal_via_dual = psol.via_dual;
    if (psol.status != Status::optimal) {
        rep.status = psol.status;
        rep.message = std::string("measure program: ") + to_string(psol.status);
        return rep;
    }

    const LpSolution dsol = simplex_solve(assemble_dual(*grid, ms, phi), opt.simplex);
    rep.dual_iterations = dsol.iterations;
    rep.dual_via_dual = dsol.via_dual;
    if (dsol.status != Status::optimal) {
        // The measure program is solvable and bounded, so by duality the hedge
        // program must be too; anything else is a numerical breakdown.
        rep.status = Status::numerical_failure;
        rep.message = std::string("hedge program: ") + to_string(dsol.status);
        return rep;
    }

    rep.gap = std::abs(psol.value - dsol.value);
    if (rep.gap > opt.gap_tol * (1.0 + std::abs(psol.value))) {
        rep.status = Status::numerical_failure;
        rep.message = "duality gap " + std::to_string(rep.gap) + " exceeds tolerance";
        return rep;
    }

    rep.measure = extract_measure(*grid, psol);
    rep.measure_residuals = measure_residuals(*grid, ms, rep.measure);
    rep.hedge = extract_hedge(*grid, ms, dsol);
    rep.hedge_margin = verify_superhedge(*grid, rep.hedge, phi);
    if (rep.measure_residuals.worst() > opt.verify_tol || rep.hedge_margin < -opt.verify_tol ||
        std::abs(rep.hedge.cost - dsol.value) > opt.verify_tol * (1.0 + std::abs(dsol.value))) {
        rep.status = Status::numerical_failure;
        rep.message = "solution verification failed";
        return rep;
    }

    double base = std::numeric_limits<double>::quiet_NaN();
    if (baseline_hint) {
        base = *baseline_hint;
    } else if (opt.want_baseline) {
        const LpSolution bsol = simplex_solve(assemble_baseline(*grid, ms, phi), opt.simplex);
        if (bsol.status != Status::optimal) {
            rep.status = Status::numerical_failure;
            rep.message = std::string("baseline program: ") + to_string(bsol.status);
            return rep;
        }
        base = boundsdetail::orient_back(bsol.value, side);
    }

    rep.status = Status::optimal;
    rep.primal_value = boundsdetail::orient_back(psol.value, side);
    rep.dual_value = boundsdetail::orient_back(dsol.value, side);
    rep.mot_baseline = base;
    if (side == Side::lower) boundsdetail::flip_hedge(rep.hedge);
    return rep;
}

inline BoundReport price_bound(Side side, const MarginalSystem& ms,
                               const std::vector<TradableOption>& options,
                               const PricingRule& rule, const PayoffFunction& payoff,
                               const BoundOptions& opt = {}) {
    try {
        auto grid = std::make_shared<const ScenarioGrid>(build_grid(ms, options, rule));
        return bound_on_grid(side, std::move(grid), ms, payoff, opt);
    } catch (const InfeasibleRuleError& e) {
        BoundReport rep;
        rep.side = side;
        rep.status = Status::infeasible;
        rep.message = e.what();
        rep.infeasible_prefix = e.prefix();
        return rep;
    }
}

inline BoundReport upper_bound(const MarginalSystem& ms,
                               const std::vector<TradableOption>& options,
                               const PricingRule& rule, const PayoffFunction& payoff,
                               const BoundOptions& opt = {}) {
    return price_bound(Side::upper, ms, options, rule, payoff, opt);
}

inline BoundReport lower_bound(const MarginalSystem& ms,
                               const std::vector<TradableOption>& options,
                               const PricingRule& rule, const PayoffFunction& payoff,
                               const BoundOptions& opt = {}) {
    return price_bound(Side::lower, ms, options, rule, payoff, opt);
}

// --- band-tightness sweep ------------------------------------------------------

struct SweepEntry {
    double eps1 = 0.0, eps2 = 0.0;
    double bound = std::numeric_limits<double>::quiet_NaN();
    Status status = Status::numerical_failure;
    double mot_baseline = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
    Side side = Side::upper;
    std::vector<SweepEntry> entries;  // row-major over (eps1, eps2)
};

// One bound per (eps1, eps2) pair over the tightened rule.  Infeasible
// entries are recorded with their status, never dropped or interpolated.
inline SweepResult epsilon_sweep(Side side, const MarginalSystem& ms,
                                 const std::vector<TradableOption>& options,
                                 const PricingRule& base_rule,
                                 const std::vector<double>& eps1_list,
                                 const std::vector<double>& eps2_list,
                                 const PayoffFunction& payoff, const BoundOptions& opt = {}) {
    if (!base_rule.restricted())
        throw ConfigError("epsilon_sweep: base rule must be interval-form");
    if (eps1_list.empty() || eps2_list.empty())
        throw ConfigError("epsilon_sweep: empty epsilon list");

    SweepResult out;
    out.side = side;

    // The baseline has no quote rows, so it is shared by every entry.
    const ScenarioGrid base_grid = build_grid(ms, options, PricingRule::unrestricted());
    const std::vector<double> phi =
        boundsdetail::oriented(payoff_by_path(base_grid, payoff), side);
    const LpSolution bsol = simplex_solve(assemble_baseline(base_grid, ms, phi), opt.simplex);
    if (bsol.status != Status::optimal)
        throw NumericalError(std::string("epsilon_sweep: baseline solve ") +
                             to_string(bsol.status));
    const double baseline = boundsdetail::orient_back(bsol.value, side);

    for (const double e1 : eps1_list)
        for (const double e2 : eps2_list) {
            SweepEntry entry;
            entry.eps1 = e1;
            entry.eps2 = e2;
            entry.mot_baseline = baseline;
            try {
                auto grid = std::make_shared<const ScenarioGrid>(
                    build_grid(ms, options, tighten(base_rule, e1, e2)));
                const BoundReport rep =
                    bound_on_grid(side, std::move(grid), ms, payoff, opt, &baseline);
                entry.status = rep.status;
                entry.bound = rep.primal_value;
            } catch (const InfeasibleRuleError&) {
                entry.status = Status::infeasible;
            }
            out.entries.push_back(entry);
        }
    return out;
}

// Plot-data export; column contract: eps1, eps2, bound, status, mot_baseline.
inline void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
    os << "eps1,eps2,bound,status,mot_baseline\n";
    char buf[128];
    for (const auto& e : sweep.entries) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%.17g", e.eps1, e.eps2, e.bound,
                      to_string(e.status), e.mot_baseline);
        os << buf << '\n';
    }
}

// --- improvement certificate ---------------------------------------------------

// A prefix where the optimizer's conditional option price leaves a candidate
// band: evidence that tightening to that band would cut this optimizer off.
struct BandViolation {
    Triple triple;
    long prefix_id = 0;
    std::vector<double> prefix;  // prices s_1..s_i
    double mass = 0.0;           // optimizer mass of the prefix
    double price = 0.0;          // conditional option price under the optimizer
    double lower = 0.0, upper = 0.0;  // candidate band at the prefix
    double magnitude = 0.0;           // how far the price exits the band
};

struct CertificateReport {
    std::vector<BandViolation> violations;
    bool flagged() const noexcept { return !violations.empty(); }
};

// Checks the report's optimizer against a candidate rule: flags every
// positive-mass prefix whose conditional price exits the candidate band by
// more than `tol`.  Zero-mass prefixes are skipped (the conditional price is
// undefined there and a measure change on a null set is free).
inline CertificateReport certificate_check(const BoundReport& report,
                                           const PricingRule& candidate, double tol = 1e-9,
                                           double mass_tol = 1e-12) {
    if (!report.grid || report.measure.weights.empty())
        throw ConfigError("certificate_check: report carries no optimizer");
    if (!candidate.restricted())
        throw ConfigError("certificate_check: candidate rule must be interval-form");
    const ScenarioGrid& grid = *report.grid;
    const MartingaleMeasure& mu = report.measure;

    CertificateReport out;
    for (int tt = 0; tt < grid.num_triples(); ++tt) {
        const Triple& t = grid.triples()[static_cast<std::size_t>(tt)];
        const long np = grid.prefix_count(t.i);
        std::vector<double> mass(static_cast<std::size_t>(np), 0.0);
        std::vector<double> val(static_cast<std::size_t>(np), 0.0);
        for (long sc = 0; sc < grid.num_scenarios(); ++sc) {
            const long path = grid.path_of(sc);
            const long q = grid.prefix_id(path, t.i);
            mass[static_cast<std::size_t>(q)] += mu.weights[static_cast<std::size_t>(sc)];
            val[static_cast<std::size_t>(q)] +=
                mu.weights[static_cast<std::size_t>(sc)] * grid.option_value(path, tt);
        }
        for (long q = 0; q < np; ++q) {
            if (mass[static_cast<std::size_t>(q)] <= mass_tol) continue;
            const double price =
                val[static_cast<std::size_t>(q)] / mass[static_cast<std::size_t>(q)];
            const std::vector<double> prefix = grid.prefix_values(t.i, q);
            const double lo = candidate.lower(t, prefix);
            const double hi = candidate.upper(t, prefix);
            const double exit = std::max(lo - price, price - hi);
            if (exit > tol)
                out.violations.push_back(BandViolation{t, q, prefix,
                                                       mass[static_cast<std::size_t>(q)], price,
                                                       lo, hi, exit});
        }
    }
    return out;
}

// --- proportional transaction costs ----------------------------------------------

// Static call quote: bid/ask for (S_{t_date} - strike)^+.
struct CallQuote {
    int date = 1;
    double strike = 0.0;
    double bid = 0.0, ask = 0.0;
};

struct FrictionSpec {
    std::vector<double> eps_stock;   // per trading date 1..n-1
    std::vector<double> eps_option;  // per quoting date 1..n-1
    std::vector<CallQuote> quotes;
};

namespace boundsdetail {

inline void validate_frictions(const ScenarioGrid& grid, const FrictionSpec& f) {
    const int n = grid.periods();
    std::vector<std::string> errs;
    if (static_cast<int>(f.eps_stock.size()) != n - 1)
        errs.push_back("eps_stock: need " + std::to_string(n - 1) + " entries, got " +
                       std::to_string(f.eps_stock.size()));
    if (static_cast<int>(f.eps_option.size()) != n - 1)
        errs.push_back("eps_option: need " + std::to_string(n - 1) + " entries, got " +
                       std::to_string(f.eps_option.size()));
    for (double e : f.eps_stock)
        if (!(e >= 0.0) || !std::isfinite(e)) errs.push_back("eps_stock: entries must be >= 0");
    for (double e : f.eps_option)
        if (!(e >= 0.0) || !std::isfinite(e)) errs.push_back("eps_option: entries must be >= 0");
    for (std::size_t q = 0; q < f.quotes.size(); ++q) {
        const auto& c = f.quotes[q];
        const std::string at = "quotes[" + std::to_string(q) + "]: ";
        if (c.date < 1 || c.date > n) errs.push_back(at + "date out of range");
        if (!(c.strike >= 0.0)) errs.push_back(at + "negative strike");
        if (!(c.bid <= c.ask)) errs.push_back(at + "bid exceeds ask");
        if (!std::isfinite(c.bid) || !std::isfinite(c.ask))
            errs.push_back(at + "non-finite quote");
    }
    if (!errs.empty()) throw ConfigError(errs);
}

}  // namespace boundsdetail

// Measure program under proportional frictions.  Marginals are not pinned:
// calibration happens only through the bid/ask quotes, and the martingale and
// quote-consistency equalities relax to two-sided inequalities.
inline LinearProgram assemble_tcost(const ScenarioGrid& grid,
                                    const std::vector<double>& path_payoff,
                                    const FrictionSpec& frictions) {
    boundsdetail::validate_frictions(grid, frictions);
    const int n = grid.periods();
    const long S = grid.num_scenarios();
    const int T = grid.num_triples();

    LinearProgram lp;
    lp.sense = LinearProgram::Sense::maximize;
    lp.num_vars = static_cast<int>(S);
    lp.objective.resize(static_cast<std::size_t>(S));

    const int mass_row = lp.add_row(LinearProgram::RowSense::eq, 1.0);
    // Two-sided drift rows per (date, prefix): (1 -+ eps) s_i brackets the
    // conditional mean of s_{i+1}.
    std::vector<int> drift_lo(static_cast<std::size_t>(n - 1)),
        drift_hi(static_cast<std::size_t>(n - 1));
    for (int i = 1; i <= n - 1; ++i) {
        drift_lo[static_cast<std::size_t>(i - 1)] = lp.num_rows();
        for (long q = 0; q < grid.prefix_count(i); ++q)
            lp.add_row(LinearProgram::RowSense::ge, 0.0);
        drift_hi[static_cast<std::size_t>(i - 1)] = lp.num_rows();
        for (long q = 0; q < grid.prefix_count(i); ++q)
            lp.add_row(LinearProgram::RowSense::le, 0.0);
    }
    // Two-sided quote-consistency rows per (triple, prefix).
    std::vector<int> opt_lo(static_cast<std::size_t>(T)), opt_hi(static_cast<std::size_t>(T));
    for (int tt = 0; tt < T; ++tt) {
        const int i = grid.triples()[static_cast<std::size_t>(tt)].i;
        opt_lo[static_cast<std::size_t>(tt)] = lp.num_rows();
        for (long q = 0; q < grid.prefix_count(i); ++q)
            lp.add_row(LinearProgram::RowSense::ge, 0.0);
        opt_hi[static_cast<std::size_t>(tt)] = lp.num_rows();
        for (long q = 0; q < grid.prefix_count(i); ++q)
            lp.add_row(LinearProgram::RowSense::le, 0.0);
    }
    // Static bid/ask rows.
    std::vector<int> quote_lo, quote_hi;
    for (const auto& c : frictions.quotes) {
        quote_lo.push_back(lp.add_row(LinearProgram::RowSense::ge, c.bid));
        quote_hi.push_back(lp.add_row(LinearProgram::RowSense::le, c.ask));
    }

    for (long sc = 0; sc < S; ++sc) {
        const long path = grid.path_of(sc);
        const int col = static_cast<int>(sc);
        lp.objective[static_cast<std::size_t>(sc)] = path_payoff[static_cast<std::size_t>(path)];
        lp.add_entry(mass_row, col, 1.0);
        for (int i = 1; i <= n - 1; ++i) {
            const double si = grid.price_at(path, i), sj = grid.price_at(path, i + 1);
            const double eps = frictions.eps_stock[static_cast<std::size_t>(i - 1)];
            const int q = static_cast<int>(grid.prefix_id(path, i));
            const double lo = sj - (1.0 - eps) * si, hi = sj - (1.0 + eps) * si;
            if (lo != 0.0) lp.add_entry(drift_lo[static_cast<std::size_t>(i - 1)] + q, col, lo);
            if (hi != 0.0) lp.add_entry(drift_hi[static_cast<std::size_t>(i - 1)] + q, col, hi);
        }
        for (int tt = 0; tt < T; ++tt) {
            const Triple& t = grid.triples()[static_cast<std::size_t>(tt)];
            const double v = grid.option_value(path, tt);
            const double p = grid.quote(sc, tt);
            const double eps = frictions.eps_option[static_cast<std::size_t>(t.i - 1)];
            const int q = static_cast<int>(grid.prefix_id(path, t.i));
            const double lo = v - (1.0 - eps) * p, hi = v - (1.0 + eps) * p;
            if (lo != 0.0) lp.add_entry(opt_lo[static_cast<std::size_t>(tt)] + q, col, lo);
            if (hi != 0.0) lp.add_entry(opt_hi[static_cast<std::size_t>(tt)] + q, col, hi);
        }
        for (std::size_t qi = 0; qi < frictions.quotes.size(); ++qi) {
            const auto& c = frictions.quotes[qi];
            const double v = std::max(grid.price_at(path, c.date) - c.strike, 0.0);
            if (v != 0.0) {
                lp.add_entry(quote_lo[qi], col, v);
                lp.add_entry(quote_hi[qi], col, v);
            }
        }
    }
    return lp;
}

// Transaction-cost bound.  Measure side only: the certified value comes from
// the LP and its row duals on the same solve; no hedge is extracted.
inline BoundReport transaction_cost_bound(Side side, std::shared_ptr<const ScenarioGrid> grid,
                                          const PayoffFunction& payoff,
                                          const FrictionSpec& frictions,
                                          const BoundOptions& opt = {}) {
    BoundReport rep;
    rep.side = side;
    rep.grid = grid;
    const std::vector<double> phi =
        boundsdetail::oriented(payoff_by_path(*grid, payoff), side);
    const LinearProgram lp = assemble_tcost(*grid, phi, frictions);
    const LpSolution sol = simplex_solve(lp, opt.simplex);
    rep.primal_iterations = sol.iterations;
    rep.primal_via_dual = sol.via_dual;
    if (sol.status != Status::optimal) {
        rep.status = sol.status;
        rep.message = std::string("friction measure program: ") + to_string(sol.status);
        return rep;
    }
    // Certify through the row duals of the same program.
    double by = 0.0;
    for (int r = 0; r < lp.num_rows(); ++r)
        by += lp.rhs[static_cast<std::size_t>(r)] * sol.row_dual[static_cast<std::size_t>(r)];
    rep.gap = std::abs(sol.value - by);
    const LpResiduals res = lp_residuals(lp, sol);
    if (rep.gap > opt.gap_tol * (1.0 + std::abs(sol.value)) || res.primal > opt.verify_tol) {
        rep.status = Status::numerical_failure;
        rep.message = "friction solution verification failed";
        return rep;
    }
    rep.status = Status::optimal;
    rep.primal_value = boundsdetail::orient_back(sol.value, side);
    rep.dual_value = boundsdetail::orient_back(by, side);
    rep.measure = MartingaleMeasure{sol.x};
    return rep;
}

inline BoundReport transaction_cost_bound(Side side, std::vector<std::vector<double>> supports,
                                          double s0, std::vector<TradableOption> options,
                                          PricingRule rule, const PayoffFunction& payoff,
                                          const FrictionSpec& frictions,
                                          const BoundOptions& opt = {}) {
    try {
        auto grid = std::make_shared<const ScenarioGrid>(std::move(supports), s0,
                                                         std::move(options), std::move(rule));
        return transaction_cost_bound(side, std::move(grid), payoff, frictions, opt);
    } catch (const InfeasibleRuleError& e) {
        BoundReport rep;
        rep.side = side;
        rep.status = Status::infeasible;
        rep.message = e.what();
        rep.infeasible_prefix = e.prefix();
        return rep;
    }
}

}  // namespace dynmot
