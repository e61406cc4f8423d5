#pragma once

// Serial reference implementations of the parallel field kernels.  These are
// deliberately plain single-threaded loops: the test suite checks the
// OpenMP kernels against them (bitwise for pointwise stencils, to rounding
// for reductions and the distance transform), and the benchmark tool times
// the two families side by side.

#include "cloudlab/gravity.hpp"
#include "cloudlab/grid.hpp"

#include <vector>

namespace cloudlab {
namespace ref {

// central-difference gradient; same contract as cloudlab::gradient
VectorField gradient(const ScalarField& f);

// central-difference divergence; same contract as cloudlab::divergence
ScalarField divergence(const VectorField& w);

// exact Euclidean distance to the nearest complement cell by exhaustive
// search (O(N * M)); intended for small grids only
std::vector<double> distance_to_complement(const Mask& mask);

// direct O(N^2) potential sum, single-threaded
PotentialSolution solve_potential_direct(const ScalarField& rho);

// plain left-to-right accumulation / maximum
double sum(const std::vector<double>& v);
double max_abs(const std::vector<double>& v);

} // namespace ref
} // namespace cloudlab
