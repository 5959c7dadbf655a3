#pragma once

// Strict-schema JSON experiment configuration.  Unknown keys are rejected,
// every diagnostic carries the offending field path, and all problems found
// in one pass are reported together.  A parsed configuration echoes back as
// canonical JSON with defaults materialized, so re-parsing the echo of a run
// reproduces the configuration verbatim.

#include <cmath>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynmot/bounds.hpp"
#include "dynmot/common.hpp"
#include "dynmot/instruments.hpp"
#include "dynmot/marginals.hpp"
#include "dynmot/nn.hpp"

namespace dynmot {

using Json = nlohmann::json;

namespace configdetail {

// Inverse standard normal CDF: Acklam's rational approximation polished by
// one Halley step against the library's erfc-based CDF, giving ~1e-15
// accuracy over the whole open interval.
inline double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw ConfigError("normal_quantile: u must lie in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (u < plow) {
        const double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - plow) {
        const double q = u - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement: e = CDF(x) - u, density evaluated at x.
    const double e = normal_cdf(x) - u;
    const double g = 0.3989422804014326779 * std::exp(-0.5 * x * x);
    const double w = e / g;
    return x - w / (1.0 + 0.5 * x * w);
}

}  // namespace configdetail

// Log-normal marginal with mean s0 and volatility sigma over horizon t,
// conditional-mean quantized to m cells.
inline DiscreteMarginal lognormal_marginal(double s0, double sigma, double t, int m) {
    if (!(s0 > 0.0)) throw ConfigError("lognormal marginal: s0 must be positive");
    if (!(sigma > 0.0) || !(t > 0.0))
        throw ConfigError("lognormal marginal: sigma and t must be positive");
    const double sd = sigma * std::sqrt(t);
    return discretize(
        [s0, sd](double u) {
            return s0 * std::exp(sd * configdetail::normal_quantile(u) - 0.5 * sd * sd);
        },
        m);
}

// Uniform marginal on [lo, hi] quantized to m equal-probability cell means.
inline DiscreteMarginal uniform_marginal(double lo, double hi, int m) {
    if (!(hi > lo)) throw ConfigError("uniform marginal: need hi > lo");
    return discretize([lo, hi](double u) { return lo + (hi - lo) * u; }, m);
}

// --- configuration schema ----------------------------------------------------------

struct MarginalSpec {
    std::string type;  // "explicit" | "lognormal" | "uniform"
    std::vector<double> points, weights;  // explicit
    double sigma = 0.0, t = 0.0;          // lognormal
    double lo = 0.0, hi = 0.0;            // uniform
    int size = 0;                         // lognormal/uniform cell count
};

struct OptionSpec {
    int maturity = 1;
    double strike = 0.0;
};

struct RuleSpec {
    std::string kind;                 // unrestricted | no_arbitrage | black_scholes | explicit_bands
    double sigma_hat = 0.0, eps_vol = 0.0;  // black_scholes
    std::vector<double> times;              // black_scholes
    std::vector<AffineBand> bands;          // explicit_bands
    double eps1 = 0.0, eps2 = 0.0;          // tightening applied after construction
};

struct PayoffSpec {
    std::string name;  // asian_call | terminal_call | lookback_max
    double strike = 0.0;
};

struct TcostSpec {
    std::vector<double> eps_stock, eps_option;
    std::vector<CallQuote> quotes;
};

struct TaskSpec {
    std::string kind;  // bound | sweep | nn | tcost
    Side side = Side::upper;
    std::vector<double> eps1, eps2;  // sweep grids
    TrainConfig nn;                  // nn task parameters (seed filled from config)
    TcostSpec tcost;
};

struct ExperimentConfig {
    unsigned long long seed = 1;
    std::string out_dir = ".";
    double s0 = 0.0;
    std::vector<MarginalSpec> marginals;
    std::vector<OptionSpec> options;
    RuleSpec rule;
    PayoffSpec payoff;
    TaskSpec task;

    int periods() const { return static_cast<int>(marginals.size()); }

    MarginalSystem build_marginals() const;
    std::vector<TradableOption> build_options() const;
    PricingRule build_rule() const;
    PayoffFunction build_payoff() const;
    FrictionSpec build_frictions() const;
    TrainConfig build_train_config() const;
    Json to_json() const;
};

// --- strict parsing ------------------------------------------------------------------

namespace configdetail {

struct Checker {
    std::vector<std::string> errs;

    void fail(const std::string& path, const std::string& what) { errs.push_back(path + ": " + what); }

    // Rejects keys outside the allowed set.
    void keys(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool ok = false;
            for (const char* k : allowed)
                if (it.key() == k) ok = true;
            if (!ok) fail(path + "." + it.key(), "unknown key");
        }
    }

    bool object(const Json& j, const std::string& path) {
        if (j.is_object()) return true;
        fail(path, "expected an object");
        return false;
    }

    bool has(const Json& j, const std::string& path, const char* key) {
        if (j.contains(key)) return true;
        fail(path + "." + key, "missing required key");
        return false;
    }

    double number(const Json& j, const std::string& path, double fallback = 0.0) {
        if (j.is_number()) {
            const double v = j.get<double>();
            if (std::isfinite(v)) return v;
        }
        fail(path, "expected a finite number");
        return fallback;
    }

    long integer(const Json& j, const std::string& path, long fallback = 0) {
        if (j.is_number_integer()) return j.get<long>();
        fail(path, "expected an integer");
        return fallback;
    }

    std::string text(const Json& j, const std::string& path) {
        if (j.is_string()) return j.get<std::string>();
        fail(path, "expected a string");
        return {};
    }

    std::vector<double> numbers(const Json& j, const std::string& path) {
        std::vector<double> out;
        if (!j.is_array()) {
            fail(path, "expected an array of numbers");
            return out;
        }
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

    std::vector<int> integers(const Json& j, const std::string& path) {
        std::vector<int> out;
        if (!j.is_array()) {
            fail(path, "expected an array of integers");
            return out;
        }
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back(static_cast<int>(integer(j[i], path + "[" + std::to_string(i) + "]")));
        return out;
    }
};

inline MarginalSpec parse_marginal(Checker& ck, const Json& j, const std::string& path) {
    MarginalSpec m;
    if (!ck.object(j, path)) return m;
    if (!ck.has(j, path, "type")) return m;
    m.type = ck.text(j["type"], path + ".type");
    if (m.type == "explicit") {
        ck.keys(j, path, {"type", "points", "weights"});
        if (ck.has(j, path, "points")) m.points = ck.numbers(j["points"], path + ".points");
        if (ck.has(j, path, "weights")) m.weights = ck.numbers(j["weights"], path + ".weights");
        if (m.points.size() != m.weights.size())
            ck.fail(path, "points and weights must have equal length");
    } else if (m.type == "lognormal") {
        ck.keys(j, path, {"type", "sigma", "t", "size"});
        if (ck.has(j, path, "sigma")) m.sigma = ck.number(j["sigma"], path + ".sigma");
        if (ck.has(j, path, "t")) m.t = ck.number(j["t"], path + ".t");
        if (ck.has(j, path, "size"))
            m.size = static_cast<int>(ck.integer(j["size"], path + ".size"));
        if (m.size < 1) ck.fail(path + ".size", "must be >= 1");
    } else if (m.type == "uniform") {
        ck.keys(j, path, {"type", "lo", "hi", "size"});
        if (ck.has(j, path, "lo")) m.lo = ck.number(j["lo"], path + ".lo");
        if (ck.has(j, path, "hi")) m.hi = ck.number(j["hi"], path + ".hi");
        if (ck.has(j, path, "size"))
            m.size = static_cast<int>(ck.integer(j["size"], path + ".size"));
        if (m.size < 1) ck.fail(path + ".size", "must be >= 1");
    } else {
        ck.fail(path + ".type", "unknown marginal type '" + m.type +
                                    "' (expected explicit, lognormal or uniform)");
    }
    return m;
}

inline RuleSpec parse_rule(Checker& ck, const Json& j, const std::string& path,
                           std::size_t num_options) {
    RuleSpec r;
    if (!ck.object(j, path)) return r;
    if (!ck.has(j, path, "kind")) return r;
    r.kind = ck.text(j["kind"], path + ".kind");
    auto tightening = [&](void) {
        if (j.contains("eps1")) r.eps1 = ck.number(j["eps1"], path + ".eps1");
        if (j.contains("eps2")) r.eps2 = ck.number(j["eps2"], path + ".eps2");
        if (r.eps1 < 0.0) ck.fail(path + ".eps1", "must be >= 0");
        if (r.eps2 < 0.0) ck.fail(path + ".eps2", "must be >= 0");
    };
    if (r.kind == "unrestricted") {
        ck.keys(j, path, {"kind"});
    } else if (r.kind == "no_arbitrage") {
        ck.keys(j, path, {"kind", "eps1", "eps2"});
        tightening();
    } else if (r.kind == "black_scholes") {
        ck.keys(j, path, {"kind", "sigma_hat", "eps_vol", "times", "eps1", "eps2"});
        if (ck.has(j, path, "sigma_hat"))
            r.sigma_hat = ck.number(j["sigma_hat"], path + ".sigma_hat");
        if (ck.has(j, path, "eps_vol")) r.eps_vol = ck.number(j["eps_vol"], path + ".eps_vol");
        if (ck.has(j, path, "times")) r.times = ck.numbers(j["times"], path + ".times");
        tightening();
    } else if (r.kind == "explicit_bands") {
        ck.keys(j, path, {"kind", "bands", "eps1", "eps2"});
        if (ck.has(j, path, "bands")) {
            const Json& bands = j["bands"];
            const std::string bpath = path + ".bands";
            if (!bands.is_array()) {
                ck.fail(bpath, "expected an array");
            } else {
                if (bands.size() != num_options)
                    ck.fail(bpath, "need exactly one band per option (" +
                                       std::to_string(num_options) + ")");
                for (std::size_t i = 0; i < bands.size(); ++i) {
                    const std::string ip = bpath + "[" + std::to_string(i) + "]";
                    AffineBand band;
                    if (!ck.object(bands[i], ip)) continue;
                    ck.keys(bands[i], ip,
                            {"lower_intercept", "lower_slope", "upper_intercept", "upper_slope"});
                    if (ck.has(bands[i], ip, "lower_intercept"))
                        band.lower_intercept =
                            ck.number(bands[i]["lower_intercept"], ip + ".lower_intercept");
                    if (ck.has(bands[i], ip, "lower_slope"))
                        band.lower_slope = ck.number(bands[i]["lower_slope"], ip + ".lower_slope");
                    if (ck.has(bands[i], ip, "upper_intercept"))
                        band.upper_intercept =
                            ck.number(bands[i]["upper_intercept"], ip + ".upper_intercept");
                    if (ck.has(bands[i], ip, "upper_slope"))
                        band.upper_slope = ck.number(bands[i]["upper_slope"], ip + ".upper_slope");
                    r.bands.push_back(band);
                }
            }
        }
        tightening();
    } else {
        ck.fail(path + ".kind",
                "unknown rule kind '" + r.kind +
                    "' (expected unrestricted, no_arbitrage, black_scholes or explicit_bands)");
    }
    if ((r.eps1 > 0.0 || r.eps2 > 0.0) && r.kind == "unrestricted")
        ck.fail(path, "tightening requires an interval rule");
    return r;
}

inline Side parse_side(Checker& ck, const Json& j, const std::string& path) {
    const std::string s = ck.text(j, path);
    if (s == "upper") return Side::upper;
    if (s == "lower") return Side::lower;
    if (!s.empty()) ck.fail(path, "expected 'upper' or 'lower'");
    return Side::upper;
}

inline TaskSpec parse_task(Checker& ck, const Json& j, const std::string& path, int periods) {
    TaskSpec t;
    if (!ck.object(j, path)) return t;
    if (!ck.has(j, path, "kind")) return t;
    t.kind = ck.text(j["kind"], path + ".kind");
    if (t.kind == "bound") {
        ck.keys(j, path, {"kind", "side"});
        if (ck.has(j, path, "side")) t.side = parse_side(ck, j["side"], path + ".side");
    } else if (t.kind == "sweep") {
        ck.keys(j, path, {"kind", "side", "eps1", "eps2"});
        if (ck.has(j, path, "side")) t.side = parse_side(ck, j["side"], path + ".side");
        if (ck.has(j, path, "eps1")) t.eps1 = ck.numbers(j["eps1"], path + ".eps1");
        if (ck.has(j, path, "eps2")) t.eps2 = ck.numbers(j["eps2"], path + ".eps2");
        if (t.eps1.empty()) ck.fail(path + ".eps1", "grid must not be empty");
        if (t.eps2.empty()) ck.fail(path + ".eps2", "grid must not be empty");
        for (double e : t.eps1)
            if (e < 0.0) ck.fail(path + ".eps1", "entries must be >= 0");
        for (double e : t.eps2)
            if (e < 0.0) ck.fail(path + ".eps2", "entries must be >= 0");
    } else if (t.kind == "nn") {
        ck.keys(j, path, {"kind", "hidden", "batch", "iterations", "gamma", "window", "step",
                          "runs"});
        if (j.contains("hidden")) t.nn.hidden = ck.integers(j["hidden"], path + ".hidden");
        if (j.contains("batch"))
            t.nn.batch = static_cast<int>(ck.integer(j["batch"], path + ".batch"));
        if (j.contains("iterations")) t.nn.iterations = ck.integer(j["iterations"], path + ".iterations");
        if (j.contains("gamma")) t.nn.gamma = ck.number(j["gamma"], path + ".gamma");
        if (j.contains("window")) t.nn.window = ck.number(j["window"], path + ".window");
        if (j.contains("step")) t.nn.step = ck.number(j["step"], path + ".step");
        if (j.contains("runs")) t.nn.runs = static_cast<int>(ck.integer(j["runs"], path + ".runs"));
        try {
            t.nn.validate();
        } catch (const ConfigError& e) {
            for (const auto& msg : e.messages()) ck.fail(path, msg);
        }
    } else if (t.kind == "tcost") {
        ck.keys(j, path, {"kind", "side", "eps_stock", "eps_option", "quotes"});
        if (ck.has(j, path, "side")) t.side = parse_side(ck, j["side"], path + ".side");
        if (ck.has(j, path, "eps_stock"))
            t.tcost.eps_stock = ck.numbers(j["eps_stock"], path + ".eps_stock");
        if (ck.has(j, path, "eps_option"))
            t.tcost.eps_option = ck.numbers(j["eps_option"], path + ".eps_option");
        if (static_cast<int>(t.tcost.eps_stock.size()) != periods - 1)
            ck.fail(path + ".eps_stock",
                    "need one entry per trading date (" + std::to_string(periods - 1) + ")");
        if (static_cast<int>(t.tcost.eps_option.size()) != periods - 1)
            ck.fail(path + ".eps_option",
                    "need one entry per quoting date (" + std::to_string(periods - 1) + ")");
        for (double e : t.tcost.eps_stock)
            if (e < 0.0) ck.fail(path + ".eps_stock", "entries must be >= 0");
        for (double e : t.tcost.eps_option)
            if (e < 0.0) ck.fail(path + ".eps_option", "entries must be >= 0");
        if (j.contains("quotes")) {
            const Json& q = j["quotes"];
            const std::string qpath = path + ".quotes";
            if (!q.is_array()) {
                ck.fail(qpath, "expected an array");
            } else {
                for (std::size_t i = 0; i < q.size(); ++i) {
                    const std::string ip = qpath + "[" + std::to_string(i) + "]";
                    CallQuote cq;
                    if (!ck.object(q[i], ip)) continue;
                    ck.keys(q[i], ip, {"date", "strike", "bid", "ask"});
                    if (ck.has(q[i], ip, "date"))
                        cq.date = static_cast<int>(ck.integer(q[i]["date"], ip + ".date"));
                    if (ck.has(q[i], ip, "strike"))
                        cq.strike = ck.number(q[i]["strike"], ip + ".strike");
                    if (ck.has(q[i], ip, "bid")) cq.bid = ck.number(q[i]["bid"], ip + ".bid");
                    if (ck.has(q[i], ip, "ask")) cq.ask = ck.number(q[i]["ask"], ip + ".ask");
                    if (cq.date < 1 || cq.date > periods)
                        ck.fail(ip + ".date", "must lie in 1.." + std::to_string(periods));
                    if (cq.bid > cq.ask) ck.fail(ip, "bid exceeds ask");
                    t.tcost.quotes.push_back(cq);
                }
            }
        }
    } else {
        ck.fail(path + ".kind",
                "unknown task kind '" + t.kind + "' (expected bound, sweep, nn or tcost)");
    }
    return t;
}

}  // namespace configdetail

inline ExperimentConfig parse_config(const Json& j) {
    configdetail::Checker ck;
    ExperimentConfig cfg;
    if (!ck.object(j, "config")) throw ConfigError(ck.errs);
    ck.keys(j, "config", {"seed", "out_dir", "problem", "instruments", "rule", "payoff", "task"});
    if (j.contains("seed")) {
        const long s = ck.integer(j["seed"], "config.seed");
        if (s < 0)
            ck.fail("config.seed", "must be >= 0");
        else
            cfg.seed = static_cast<unsigned long long>(s);
    }
    if (j.contains("out_dir")) {
        cfg.out_dir = ck.text(j["out_dir"], "config.out_dir");
        if (cfg.out_dir.empty()) ck.fail("config.out_dir", "must not be empty");
    }

    if (ck.has(j, "config", "problem") && ck.object(j["problem"], "config.problem")) {
        const Json& p = j["problem"];
        ck.keys(p, "config.problem", {"s0", "marginals"});
        if (ck.has(p, "config.problem", "s0")) cfg.s0 = ck.number(p["s0"], "config.problem.s0");
        if (ck.has(p, "config.problem", "marginals")) {
            const Json& ms = p["marginals"];
            if (!ms.is_array() || ms.empty()) {
                ck.fail("config.problem.marginals", "expected a non-empty array");
            } else {
                for (std::size_t i = 0; i < ms.size(); ++i)
                    cfg.marginals.push_back(configdetail::parse_marginal(
                        ck, ms[i], "config.problem.marginals[" + std::to_string(i) + "]"));
            }
        }
    }

    if (j.contains("instruments") && ck.object(j["instruments"], "config.instruments")) {
        const Json& ins = j["instruments"];
        ck.keys(ins, "config.instruments", {"options"});
        if (ins.contains("options")) {
            const Json& opts = ins["options"];
            if (!opts.is_array()) {
                ck.fail("config.instruments.options", "expected an array");
            } else {
                for (std::size_t i = 0; i < opts.size(); ++i) {
                    const std::string ip = "config.instruments.options[" + std::to_string(i) + "]";
                    OptionSpec o;
                    if (!ck.object(opts[i], ip)) continue;
                    ck.keys(opts[i], ip, {"maturity", "strike"});
                    if (ck.has(opts[i], ip, "maturity"))
                        o.maturity =
                            static_cast<int>(ck.integer(opts[i]["maturity"], ip + ".maturity"));
                    if (ck.has(opts[i], ip, "strike"))
                        o.strike = ck.number(opts[i]["strike"], ip + ".strike");
                    if (o.maturity < 1 || o.maturity > cfg.periods())
                        ck.fail(ip + ".maturity",
                                "must lie in 1.." + std::to_string(cfg.periods()));
                    if (o.strike < 0.0) ck.fail(ip + ".strike", "must be >= 0");
                    cfg.options.push_back(o);
                }
            }
        }
    }

    if (ck.has(j, "config", "rule"))
        cfg.rule = configdetail::parse_rule(ck, j["rule"], "config.rule", cfg.options.size());
    if (cfg.rule.kind == "black_scholes" &&
        static_cast<int>(cfg.rule.times.size()) != cfg.periods())
        ck.fail("config.rule.times",
                "need one trading time per period (" + std::to_string(cfg.periods()) + ")");

    if (ck.has(j, "config", "payoff") && ck.object(j["payoff"], "config.payoff")) {
        const Json& p = j["payoff"];
        if (ck.has(p, "config.payoff", "name"))
            cfg.payoff.name = ck.text(p["name"], "config.payoff.name");
        if (cfg.payoff.name == "asian_call" || cfg.payoff.name == "terminal_call") {
            ck.keys(p, "config.payoff", {"name", "strike"});
            if (ck.has(p, "config.payoff", "strike"))
                cfg.payoff.strike = ck.number(p["strike"], "config.payoff.strike");
        } else if (cfg.payoff.name == "lookback_max") {
            ck.keys(p, "config.payoff", {"name"});
        } else if (!cfg.payoff.name.empty()) {
            ck.fail("config.payoff.name",
                    "unknown payoff '" + cfg.payoff.name +
                        "' (expected asian_call, terminal_call or lookback_max)");
        }
    }

    if (ck.has(j, "config", "task"))
        cfg.task = configdetail::parse_task(ck, j["task"], "config.task", cfg.periods());

    if (cfg.task.kind == "sweep" && cfg.rule.kind == "unrestricted")
        ck.fail("config.task", "sweep requires an interval rule");

    // Semantic pass: with the schema clean, run the builders so problems the
    // schema cannot see (convex-order violations with their witness strike,
    // degenerate volatility bands) surface at parse time too.
    if (ck.errs.empty()) {
        auto attempt = [&ck](const char* path, auto&& fn) {
            try {
                fn();
            } catch (const ConfigError& e) {
                for (const auto& msg : e.messages()) ck.fail(path, msg);
            }
        };
        attempt("config.problem.marginals", [&] { (void)cfg.build_marginals(); });
        attempt("config.rule", [&] { (void)cfg.build_rule(); });
        attempt("config.payoff", [&] { (void)cfg.build_payoff(); });
    }

    if (!ck.errs.empty()) throw ConfigError(ck.errs);
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return parse_config(j);
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// --- builders ------------------------------------------------------------------------

inline MarginalSystem ExperimentConfig::build_marginals() const {
    std::vector<DiscreteMarginal> ms;
    for (const auto& m : marginals) {
        if (m.type == "explicit")
            ms.emplace_back(m.points, m.weights);
        else if (m.type == "lognormal")
            ms.push_back(lognormal_marginal(s0, m.sigma, m.t, m.size));
        else
            ms.push_back(uniform_marginal(m.lo, m.hi, m.size));
    }
    return MarginalSystem(s0, std::move(ms));
}

inline std::vector<TradableOption> ExperimentConfig::build_options() const {
    std::vector<TradableOption> out;
    for (const auto& o : options) out.push_back(call_option(o.maturity, o.strike));
    return out;
}

inline PricingRule ExperimentConfig::build_rule() const {
    PricingRule r;
    const auto opts = build_options();
    if (rule.kind == "unrestricted")
        r = PricingRule::unrestricted();
    else if (rule.kind == "no_arbitrage")
        r = no_arbitrage_rule(opts, periods());
    else if (rule.kind == "black_scholes")
        r = black_scholes_rule(opts, periods(), rule.times, rule.sigma_hat, rule.eps_vol);
    else if (rule.kind == "explicit_bands")
        r = explicit_bands_rule(opts, periods(), rule.bands);
    else
        throw ConfigError("config.rule.kind: unknown rule '" + rule.kind + "'");
    if (rule.eps1 > 0.0 || rule.eps2 > 0.0) r = tighten(r, rule.eps1, rule.eps2);
    return r;
}

inline PayoffFunction ExperimentConfig::build_payoff() const {
    if (payoff.name == "asian_call") return asian_call(periods(), payoff.strike);
    if (payoff.name == "terminal_call") return terminal_call(periods(), payoff.strike);
    if (payoff.name == "lookback_max") return lookback_max(periods());
    throw ConfigError("config.payoff.name: unknown payoff '" + payoff.name + "'");
}

inline FrictionSpec ExperimentConfig::build_frictions() const {
    FrictionSpec f;
    f.eps_stock = task.tcost.eps_stock;
    f.eps_option = task.tcost.eps_option;
    f.quotes = task.tcost.quotes;
    return f;
}

inline TrainConfig ExperimentConfig::build_train_config() const {
    TrainConfig t = task.nn;
    t.seed = seed;
    return t;
}

// --- canonical echo ------------------------------------------------------------------

inline Json ExperimentConfig::to_json() const {
    Json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["problem"]["s0"] = s0;
    Json ms = Json::array();
    for (const auto& m : marginals) {
        Json mj;
        mj["type"] = m.type;
        if (m.type == "explicit") {
            mj["points"] = m.points;
            mj["weights"] = m.weights;
        } else if (m.type == "lognormal") {
            mj["sigma"] = m.sigma;
            mj["t"] = m.t;
            mj["size"] = m.size;
        } else {
            mj["lo"] = m.lo;
            mj["hi"] = m.hi;
            mj["size"] = m.size;
        }
        ms.push_back(mj);
    }
    j["problem"]["marginals"] = ms;

    Json opts = Json::array();
    for (const auto& o : options) {
        Json oj;
        oj["maturity"] = o.maturity;
        oj["strike"] = o.strike;
        opts.push_back(oj);
    }
    j["instruments"]["options"] = opts;

    Json rj;
    rj["kind"] = rule.kind;
    if (rule.kind == "black_scholes") {
        rj["sigma_hat"] = rule.sigma_hat;
        rj["eps_vol"] = rule.eps_vol;
        rj["times"] = rule.times;
    } else if (rule.kind == "explicit_bands") {
        Json bands = Json::array();
        for (const auto& b : rule.bands) {
            Json bj;
            bj["lower_intercept"] = b.lower_intercept;
            bj["lower_slope"] = b.lower_slope;
            bj["upper_intercept"] = b.upper_intercept;
            bj["upper_slope"] = b.upper_slope;
            bands.push_back(bj);
        }
        rj["bands"] = bands;
    }
    if (rule.kind != "unrestricted") {
        rj["eps1"] = rule.eps1;
        rj["eps2"] = rule.eps2;
    }
    j["rule"] = rj;

    j["payoff"]["name"] = payoff.name;
    if (payoff.name != "lookback_max") j["payoff"]["strike"] = payoff.strike;

    Json tj;
    tj["kind"] = task.kind;
    if (task.kind == "bound") {
        tj["side"] = to_string(task.side);
    } else if (task.kind == "sweep") {
        tj["side"] = to_string(task.side);
        tj["eps1"] = task.eps1;
        tj["eps2"] = task.eps2;
    } else if (task.kind == "nn") {
        tj["hidden"] = task.nn.hidden;
        tj["batch"] = task.nn.batch;
        tj["iterations"] = task.nn.iterations;
        tj["gamma"] = task.nn.gamma;
        tj["window"] = task.nn.window;
        tj["step"] = task.nn.step;
        tj["runs"] = task.nn.runs;
    } else if (task.kind == "tcost") {
        tj["side"] = to_string(task.side);
        tj["eps_stock"] = task.tcost.eps_stock;
        tj["eps_option"] = task.tcost.eps_option;
        Json quotes = Json::array();
        for (const auto& q : task.tcost.quotes) {
            Json qj;
            qj["date"] = q.date;
            qj["strike"] = q.strike;
            qj["bid"] = q.bid;
            qj["ask"] = q.ask;
            quotes.push_back(qj);
        }
        tj["quotes"] = quotes;
    }
    j["task"] = tj;
    return j;
}

}  // namespace dynmot
