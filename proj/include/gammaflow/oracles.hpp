#pragma once

// Independent reference computations used by the test suites and by
// `gammaflow verify`. Nothing here calls into the solvers it is used to check.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gammaflow/coeffgroup.hpp"

namespace gammaflow::oracles {

// Minimum of sum E(s_i) over all multisets of at most `max_summands` elements
// drawn from `candidates` (each with a defined cost) summing to sigma.
std::optional<double> brute_force_norm(const CostTable& table, const std::vector<GroupElement>& candidates,
                                       const GroupElement& sigma, int max_summands);

// All-pairs shortest paths over the whole Cayley graph of a finite group;
// returns the norm of every element in enumerate() order (infinity when
// unreachable).
std::vector<double> floyd_norms(const CostTable& table);

// Every element with free coordinates in [-radius, radius].
std::vector<GroupElement> window(const CoefficientGroup& G, int radius);

// Scalar integer flat norm on a small complex by plain enumeration of the
// (q+1)-chain Q over [-range, range]^m:
//   min  sum_c wP_c |S_c - (dQ)_c| + sum_d wQ_d |Q_d|.
// `boundary[d]` lists (q-cell index, sign) pairs of the boundary of (q+1)-cell d.
double exhaustive_flat_norm(const std::vector<std::int64_t>& S,
                            const std::vector<std::vector<std::pair<int, int>>>& boundary,
                            const std::vector<double>& wP, const std::vector<double>& wQ, int range);

// Composite Simpson rule on a uniform partition; used as a reference for the
// closed-form radial integrals.
double simpson(const std::function<double(double)>& f, double lo, double hi, int panels);

}  // namespace gammaflow::oracles
