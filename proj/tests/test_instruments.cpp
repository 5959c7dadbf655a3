#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dynmot/instruments.hpp"
#include "support/oracle.hpp"

using namespace dynmot;

TEST_CASE("payoff factories evaluate hand-computed paths", "[instruments]") {
    const std::vector<double> path = {90.0, 100.0, 119.0};
    REQUIRE(asian_call(3, 100.0)(path) == Catch::Approx(3.0).margin(1e-12));
    REQUIRE(asian_call(3, 110.0)(path) == 0.0);
    REQUIRE(terminal_call(3, 100.0)(path) == Catch::Approx(19.0).margin(1e-12));
    REQUIRE(lookback_max(3)(path) == Catch::Approx(119.0).margin(1e-12));
}

TEST_CASE("normal cdf matches the series oracle within 1e-7", "[instruments]") {
    REQUIRE(std::abs(normal_cdf(1.0) - 0.84134474606854295) <= 1e-7);
    REQUIRE(std::abs(normal_cdf(0.5) - 0.6914624612740131) <= 1e-7);
    REQUIRE(std::abs(normal_cdf(-2.345) - 0.0095135397995469222) <= 1e-7);
    for (double x = -6.0; x <= 6.0; x += 0.37)
        REQUIRE(std::abs(normal_cdf(x) - oracle::normal_cdf(x)) <= 1e-7);
    REQUIRE(normal_cdf(0.0) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("black-scholes price matches frozen high-precision values", "[instruments]") {
    REQUIRE(std::abs(bs_price(100.0, 100.0, 0.2, 1.0) - 7.9655674554057963) <= 1e-9);
    REQUIRE(std::abs(bs_price(100.0, 98.0, 0.2, 2.0) - 12.162028316450415) <= 1e-9);
    REQUIRE(std::abs(bs_price(100.0, 98.0, 0.15, 1.0) - 6.9722427390908095) <= 1e-9);
    REQUIRE(std::abs(bs_price(100.0, 120.0, 0.25, 0.5) - 1.51550918700281) <= 1e-9);

    // Boundary cases are exact.
    REQUIRE(bs_price(0.0, 100.0, 0.2, 1.0) == 0.0);
    REQUIRE(bs_price(100.0, 0.0, 0.2, 1.0) == 100.0);

    // Intrinsic value and spot cap; increasing in volatility.
    double prev = 0.0;
    for (double sig = 0.05; sig <= 0.8; sig += 0.05) {
        const double c = bs_price(100.0, 95.0, sig, 1.5);
        REQUIRE(c >= 5.0);
        REQUIRE(c <= 100.0);
        REQUIRE(c >= prev);
        prev = c;
    }
    REQUIRE_THROWS_AS(bs_price(100.0, 100.0, 0.0, 1.0), ConfigError);
    REQUIRE_THROWS_AS(bs_price(100.0, 100.0, 0.2, 0.0), ConfigError);
}

TEST_CASE("active triples pair each option with every earlier date", "[instruments]") {
    std::vector<TradableOption> opts = {call_option(2, 98.0), call_option(3, 98.0)};
    const auto ts = active_triples(opts, 3);
    REQUIRE(ts.size() == 3);  // (1,2,0), (1,3,1), (2,3,1)
    REQUIRE((ts[0].i == 1 && ts[0].j == 2 && ts[0].k == 0));
    REQUIRE((ts[1].i == 1 && ts[1].j == 3 && ts[1].k == 1));
    REQUIRE((ts[2].i == 2 && ts[2].j == 3 && ts[2].k == 1));

    // A maturity-1 option yields no triples: there is no earlier date.
    REQUIRE(active_triples({call_option(1, 100.0)}, 3).empty());
    REQUIRE_THROWS_AS(active_triples({call_option(4, 100.0)}, 3), ConfigError);
}

TEST_CASE("no-arbitrage bands for calls are intrinsic-to-spot", "[instruments]") {
    std::vector<TradableOption> opts = {call_option(2, 98.0), call_option(2, 0.0)};
    const auto rule = no_arbitrage_rule(opts, 2);
    REQUIRE(rule.restricted());
    const Triple t98{1, 2, 0}, t0{1, 2, 1};

    const std::vector<double> pre80 = {80.0};
    REQUIRE(rule.lower(t98, pre80) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(rule.upper(t98, pre80) == Catch::Approx(80.0).margin(1e-12));
    // Zero strike: both envelopes coincide with the spot.
    REQUIRE(rule.lower(t0, pre80) == Catch::Approx(80.0).margin(1e-12));
    REQUIRE(rule.upper(t0, pre80) == Catch::Approx(80.0).margin(1e-12));

    const std::vector<double> pre120 = {120.0};
    REQUIRE(rule.lower(t98, pre120) == Catch::Approx(22.0).margin(1e-12));
    REQUIRE(rule.upper(t98, pre120) == Catch::Approx(120.0).margin(1e-12));
}

TEST_CASE("no-arbitrage bands for generic payoffs use envelopes", "[instruments]") {
    // Straddle: already convex, so the lower band is the payoff; the concave
    // envelope on [0, 200] is the chord through (0,100) and (200,100).
    auto straddle = generic_option(
        2, [](double s) { return std::abs(s - 100.0); }, 100.0, "straddle");
    const auto r1 = no_arbitrage_rule({straddle}, 2, 200.0);
    const Triple t{1, 2, 0};
    const std::vector<double> pre = {150.0};
    REQUIRE(r1.lower(t, pre) == Catch::Approx(50.0).margin(1e-6));
    REQUIRE(r1.upper(t, pre) == Catch::Approx(100.0).margin(1e-6));

    // Capped payoff: concave, so the upper band is the payoff and the lower
    // band is the chord s/2 on [0, 200].
    auto capped = generic_option(
        2, [](double s) { return std::min(s, 100.0); }, 1.0, "capped");
    const auto r2 = no_arbitrage_rule({capped}, 2, 200.0);
    const std::vector<double> pre60 = {60.0};
    REQUIRE(r2.lower(t, pre60) == Catch::Approx(30.0).margin(1e-6));
    REQUIRE(r2.upper(t, pre60) == Catch::Approx(60.0).margin(1e-6));

    // Missing domain or super-linear growth is rejected.
    REQUIRE_THROWS_AS(no_arbitrage_rule({straddle}, 2), ConfigError);
    auto quadratic = generic_option(
        2, [](double s) { return s * s; }, 1.0, "quadratic");
    REQUIRE_THROWS_AS(no_arbitrage_rule({quadratic}, 2, 200.0), ConfigError);
}

TEST_CASE("black-scholes rule brackets quotes by sigma_hat -+ eps", "[instruments]") {
    std::vector<TradableOption> opts = {call_option(3, 98.0)};
    const auto rule = black_scholes_rule(opts, 3, {1.0, 2.0, 3.0}, 0.2, 0.05);
    const Triple t{1, 3, 0};
    const std::vector<double> pre = {105.0};
    REQUIRE(rule.lower(t, pre) == Catch::Approx(bs_price(105.0, 98.0, 0.15, 2.0)).margin(1e-12));
    REQUIRE(rule.upper(t, pre) == Catch::Approx(bs_price(105.0, 98.0, 0.25, 2.0)).margin(1e-12));
    REQUIRE(rule.lower(t, pre) < rule.upper(t, pre));

    REQUIRE_THROWS_AS(black_scholes_rule(opts, 3, {1.0, 2.0, 3.0}, 0.2, 0.2), ConfigError);
    REQUIRE_THROWS_AS(black_scholes_rule(opts, 3, {1.0, 1.0, 3.0}, 0.2, 0.05), ConfigError);
    auto generic = generic_option(2, [](double s) { return s; }, 1.0, "fwd");
    REQUIRE_THROWS_AS(black_scholes_rule({generic}, 3, {1.0, 2.0, 3.0}, 0.2, 0.05), ConfigError);
}

TEST_CASE("tightening shifts bands additively and composes", "[instruments]") {
    std::vector<TradableOption> opts = {call_option(2, 98.0)};
    const auto rule = no_arbitrage_rule(opts, 2);
    const Triple t{1, 2, 0};
    const std::vector<double> pre = {110.0};

    const auto once = tighten(rule, 1.5, 2.0);
    REQUIRE(once.lower(t, pre) == Catch::Approx(12.0 + 1.5).margin(1e-12));
    REQUIRE(once.upper(t, pre) == Catch::Approx(110.0 - 2.0).margin(1e-12));

    const auto twice = tighten(once, 0.5, 1.0);
    const auto direct = tighten(rule, 2.0, 3.0);
    REQUIRE(twice.lower(t, pre) == Catch::Approx(direct.lower(t, pre)).margin(1e-15));
    REQUIRE(twice.upper(t, pre) == Catch::Approx(direct.upper(t, pre)).margin(1e-15));

    REQUIRE_THROWS_AS(tighten(rule, -0.1, 0.0), ConfigError);
    REQUIRE_NOTHROW(tighten(PricingRule::unrestricted(), 0.0, 0.0));
    REQUIRE_THROWS_AS(tighten(PricingRule::unrestricted(), 0.1, 0.0), ConfigError);
}

TEST_CASE("explicit affine bands evaluate their coefficients", "[instruments]") {
    std::vector<TradableOption> opts = {call_option(2, 100.0)};
    const auto rule = explicit_bands_rule(opts, 2, {AffineBand{-10.0, 0.3, 5.0, 0.9}});
    const Triple t{1, 2, 0};
    const std::vector<double> pre = {100.0};
    REQUIRE(rule.lower(t, pre) == Catch::Approx(20.0).margin(1e-12));
    REQUIRE(rule.upper(t, pre) == Catch::Approx(95.0).margin(1e-12));
    REQUIRE_THROWS_AS(explicit_bands_rule(opts, 2, {}), ConfigError);
}
