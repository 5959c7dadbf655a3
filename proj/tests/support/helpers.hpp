#pragma once

// Small helpers shared across test files.

#include <random>
#include <stdexcept>

#include "dynmot/lp.hpp"
#include "support/oracle.hpp"

namespace testsup {

inline double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

// Dense oracle form of a library LP.  The oracle enumerates over x >= 0 only,
// so free variables are rejected.
inline oracle::TinyLp to_tiny(const dynmot::LinearProgram& lp) {
    using RowSense = dynmot::LinearProgram::RowSense;
    for (bool f : lp.free_var)
        if (f) throw std::logic_error("to_tiny: free variables not supported by the oracle");
    oracle::TinyLp t;
    t.cols = lp.num_vars;
    t.A.assign(static_cast<std::size_t>(lp.num_rows()),
               std::vector<double>(static_cast<std::size_t>(lp.num_vars), 0.0));
    t.b = lp.rhs;
    t.c = lp.objective;
    t.sense.resize(static_cast<std::size_t>(lp.num_rows()));
    for (int r = 0; r < lp.num_rows(); ++r)
        t.sense[static_cast<std::size_t>(r)] =
            lp.row_sense[static_cast<std::size_t>(r)] == RowSense::le
                ? -1
                : lp.row_sense[static_cast<std::size_t>(r)] == RowSense::eq ? 0 : 1;
    for (const auto& e : lp.entries)
        t.A[static_cast<std::size_t>(e.row)][static_cast<std::size_t>(e.col)] += e.value;
    return t;
}

}  // namespace testsup
