#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "dynmot/lp.hpp"
#include "support/helpers.hpp"
#include "support/oracle.hpp"

using namespace dynmot;
using testsup::to_tiny;
using testsup::u01;
using RowSense = LinearProgram::RowSense;
using Sense = LinearProgram::Sense;

namespace {

// Random bounded LP, feasible by construction around a planted point.
LinearProgram random_lp(std::mt19937_64& rng, bool with_free, int* planted_cols = nullptr) {
    LinearProgram lp;
    lp.sense = Sense::maximize;
    const int n = 2 + static_cast<int>(rng() % 5);
    const int m = 1 + static_cast<int>(rng() % 5);
    lp.num_vars = n;
    lp.objective.resize(static_cast<std::size_t>(n));
    lp.free_var.assign(static_cast<std::size_t>(n), false);
    std::vector<double> xstar(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        lp.objective[static_cast<std::size_t>(j)] = -2.0 + 4.0 * u01(rng);
        const bool fr = with_free && rng() % 3 == 0;
        lp.free_var[static_cast<std::size_t>(j)] = fr;
        xstar[static_cast<std::size_t>(j)] = fr ? -3.0 + 6.0 * u01(rng) : 3.0 * u01(rng);
    }
    for (int r = 0; r < m; ++r) {
        double ax = 0.0;
        std::vector<double> row(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            row[static_cast<std::size_t>(j)] = -2.0 + 4.0 * u01(rng);
            ax += row[static_cast<std::size_t>(j)] * xstar[static_cast<std::size_t>(j)];
        }
        const int kind = static_cast<int>(rng() % 3);
        if (kind == 0) lp.add_row(RowSense::le, ax + 2.0 * u01(rng));
        else if (kind == 1) lp.add_row(RowSense::ge, ax - 2.0 * u01(rng));
        else lp.add_row(RowSense::eq, ax);
        for (int j = 0; j < n; ++j) lp.add_entry(r, j, row[static_cast<std::size_t>(j)]);
    }
    // Box rows keep the program bounded (and the planted point feasible).
    for (int j = 0; j < n; ++j) {
        const int r = lp.num_rows();
        lp.add_row(RowSense::le, 4.0 + 2.0 * u01(rng));
        lp.add_entry(r, j, 1.0);
        if (lp.free_var[static_cast<std::size_t>(j)]) {
            const int r2 = lp.num_rows();
            lp.add_row(RowSense::ge, -4.0 - 2.0 * u01(rng));
            lp.add_entry(r2, j, 1.0);
        }
    }
    if (planted_cols) *planted_cols = n;
    return lp;
}

}  // namespace

TEST_CASE("textbook maximization with known optimum and duals", "[lp]") {
    // max x + 2y  s.t.  x + y <= 4,  x <= 2,  y <= 3.
    LinearProgram lp;
    lp.sense = Sense::maximize;
    lp.num_vars = 2;
    lp.objective = {1.0, 2.0};
    lp.add_row(RowSense::le, 4.0);
    lp.add_entry(0, 0, 1.0);
    lp.add_entry(0, 1, 1.0);
    lp.add_row(RowSense::le, 2.0);
    lp.add_entry(1, 0, 1.0);
    lp.add_row(RowSense::le, 3.0);
    lp.add_entry(2, 1, 1.0);

    const auto sol = simplex_solve(lp);
    REQUIRE(sol.status == Status::optimal);
    REQUIRE(sol.value == Catch::Approx(7.0).margin(1e-9));
    REQUIRE(sol.x[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(sol.x[1] == Catch::Approx(3.0).margin(1e-9));
    REQUIRE(sol.row_dual[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(sol.row_dual[1] == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(sol.row_dual[2] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(sol.iterations > 0);

    const auto res = lp_residuals(lp, sol);
    REQUIRE(res.primal <= 1e-7);
    REQUIRE(res.dual_sign <= 1e-9);
    REQUIRE(res.duality_gap <= 1e-9);
}

TEST_CASE("equalities and free variables", "[lp]") {
    // min 3u + v  s.t.  u + v = 5,  u - v >= -1,  v free.
    LinearProgram lp;
    lp.num_vars = 2;
    lp.objective = {3.0, 1.0};
    lp.free_var = {false, true};
    lp.add_row(RowSense::eq, 5.0);
    lp.add_entry(0, 0, 1.0);
    lp.add_entry(0, 1, 1.0);
    lp.add_row(RowSense::ge, -1.0);
    lp.add_entry(1, 0, 1.0);
    lp.add_entry(1, 1, -1.0);

    const auto sol = simplex_solve(lp);
    REQUIRE(sol.status == Status::optimal);
    // u = 0 pushes everything into the free variable: v = 5, but the second
    // row forces u - v >= -1, i.e. v <= u + 1, so u = 2, v = 3.
    REQUIRE(sol.value == Catch::Approx(9.0).margin(1e-9));
    REQUIRE(sol.x[0] == Catch::Approx(2.0).margin(1e-9));
    REQUIRE(sol.x[1] == Catch::Approx(3.0).margin(1e-9));
    const auto res = lp_residuals(lp, sol);
    REQUIRE(res.primal <= 1e-7);
    REQUIRE(res.dual_sign <= 1e-9);
    REQUIRE(res.duality_gap <= 1e-9);
}

TEST_CASE("infeasible and unbounded programs are classified", "[lp]") {
    LinearProgram bad;
    bad.num_vars = 1;
    bad.objective = {1.0};
    bad.add_row(RowSense::le, -1.0);
    bad.add_entry(0, 0, 1.0);
    REQUIRE(simplex_solve(bad).status == Status::infeasible);

    LinearProgram unb;
    unb.sense = Sense::maximize;
    unb.num_vars = 1;
    unb.objective = {1.0};
    unb.add_row(RowSense::ge, 1.0);
    unb.add_entry(0, 0, 1.0);
    REQUIRE(simplex_solve(unb).status == Status::unbounded);

    // No rows at all: value 0 when the objective pushes down, unbounded when up.
    LinearProgram empty;
    empty.num_vars = 2;
    empty.objective = {1.0, 0.0};
    REQUIRE(simplex_solve(empty).status == Status::optimal);
    REQUIRE(simplex_solve(empty).value == Catch::Approx(0.0));
    empty.sense = Sense::maximize;
    REQUIRE(simplex_solve(empty).status == Status::unbounded);
}

TEST_CASE("degenerate cycling-prone program terminates via the stall rule", "[lp]") {
    // Beale's example: cycles under naive Dantzig pivoting.
    LinearProgram lp;
    lp.num_vars = 4;
    lp.objective = {-0.75, 150.0, -0.02, 6.0};
    lp.add_row(RowSense::le, 0.0);
    lp.add_entry(0, 0, 0.25);
    lp.add_entry(0, 1, -60.0);
    lp.add_entry(0, 2, -0.04);
    lp.add_entry(0, 3, 9.0);
    lp.add_row(RowSense::le, 0.0);
    lp.add_entry(1, 0, 0.5);
    lp.add_entry(1, 1, -90.0);
    lp.add_entry(1, 2, -0.02);
    lp.add_entry(1, 3, 3.0);
    lp.add_row(RowSense::le, 1.0);
    lp.add_entry(2, 2, 1.0);

    const auto sol = simplex_solve(lp);
    REQUIRE(sol.status == Status::optimal);
    REQUIRE(sol.value == Catch::Approx(-0.05).margin(1e-9));
}

TEST_CASE("all-zero rows are dropped or settle infeasibility", "[lp]") {
    LinearProgram lp;
    lp.num_vars = 1;
    lp.objective = {1.0};
    lp.add_row(RowSense::eq, 0.0);          // 0 == 0: dropped
    lp.add_row(RowSense::le, 5.0);          // 0 <= 5: dropped
    lp.add_row(RowSense::le, 2.0);
    lp.add_entry(2, 0, 1.0);
    lp.sense = Sense::maximize;
    auto sol = simplex_solve(lp);
    REQUIRE(sol.status == Status::optimal);
    REQUIRE(sol.value == Catch::Approx(2.0).margin(1e-9));

    LinearProgram contra = lp;
    contra.add_row(RowSense::eq, 3.0);      // 0 == 3: contradiction
    REQUIRE(simplex_solve(contra).status == Status::infeasible);
}

TEST_CASE("iteration cap reports numerical failure", "[lp]") {
    LinearProgram lp;
    lp.sense = Sense::maximize;
    lp.num_vars = 6;
    lp.objective.assign(6, 1.0);
    for (int r = 0; r < 6; ++r) {
        lp.add_row(RowSense::le, 1.0 + r);
        for (int j = 0; j <= r; ++j) lp.add_entry(r, j, 1.0);
    }
    SimplexOptions opt;
    opt.max_iterations = 1;
    REQUIRE(simplex_solve(lp, opt).status == Status::numerical_failure);
}

TEST_CASE("simplex agrees with exhaustive vertex enumeration", "[lp][oracle]") {
    std::mt19937_64 rng(91);
    int solved = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const LinearProgram lp = random_lp(rng, /*with_free=*/false);
        const auto sol = simplex_solve(lp);
        const auto ve = oracle::enumerate_vertices(to_tiny(lp));
        const auto best = oracle::best_value(to_tiny(lp), ve);
        REQUIRE(best.has_value());  // planted point guarantees feasibility
        REQUIRE(sol.status == Status::optimal);
        REQUIRE(std::abs(sol.value - *best) <= 1e-8 * (1.0 + std::abs(*best)));
        ++solved;
    }
    REQUIRE(solved == 40);
}

TEST_CASE("direct and transposed routes agree", "[lp]") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 40; ++trial) {
        const LinearProgram lp = random_lp(rng, /*with_free=*/true);
        SimplexOptions direct, via;
        direct.force_direct = true;
        via.force_via_dual = true;
        const auto a = simplex_solve(lp, direct);
        const auto b = simplex_solve(lp, via);
        REQUIRE(a.status == Status::optimal);
        REQUIRE(b.status == Status::optimal);
        REQUIRE(b.via_dual);
        REQUIRE(std::abs(a.value - b.value) <= 1e-8 * (1.0 + std::abs(a.value)));
        for (const auto* sol : {&a, &b}) {
            const auto res = lp_residuals(lp, *sol);
            REQUIRE(res.primal <= 1e-7);
            REQUIRE(res.dual_sign <= 1e-7);
            REQUIRE(res.duality_gap <= 1e-7);
        }
    }

    // Status mapping through the transposed route.
    LinearProgram bad;
    bad.num_vars = 1;
    bad.objective = {1.0};
    bad.add_row(RowSense::le, -1.0);
    bad.add_entry(0, 0, 1.0);
    SimplexOptions via;
    via.force_via_dual = true;
    REQUIRE(simplex_solve(bad, via).status == Status::infeasible);

    LinearProgram unb;
    unb.sense = Sense::maximize;
    unb.num_vars = 2;
    unb.objective = {1.0, 0.0};
    unb.add_row(RowSense::ge, 1.0);
    unb.add_entry(0, 0, 1.0);
    unb.add_entry(0, 1, 1.0);
    REQUIRE(simplex_solve(unb, via).status == Status::unbounded);
}

TEST_CASE("sparse text round-trip preserves the program", "[lp]") {
    std::mt19937_64 rng(777);
    const LinearProgram lp = random_lp(rng, /*with_free=*/true);
    std::ostringstream os;
    write_lp(os, lp);
    std::istringstream is(os.str());
    const LinearProgram back = read_lp(is);
    REQUIRE(back.sense == lp.sense);
    REQUIRE(back.num_vars == lp.num_vars);
    REQUIRE(back.num_rows() == lp.num_rows());
    REQUIRE(back.objective == lp.objective);
    REQUIRE(back.rhs == lp.rhs);
    for (int j = 0; j < lp.num_vars; ++j) REQUIRE(back.is_free(j) == lp.is_free(j));
    // Same solution either way.
    const auto a = simplex_solve(lp);
    const auto b = simplex_solve(back);
    REQUIRE(a.value == Catch::Approx(b.value).margin(1e-12));
}
