#pragma once

#include "cloudlab/grid.hpp"

namespace cloudlab {

// Splitting of the support into a boundary strip of physical width epsilon
// and the complementary deep interior.  Cells whose center-to-complement
// distance is exactly epsilon belong to the interior.
struct RegionDecomposition {
    Mask support;
    Mask strip;
    Mask interior;
    double epsilon = 0.0;
};

// Exact Euclidean distance (physical units, cell center to cell center) from
// every cell to the nearest cell outside the mask.  Cells outside the mask
// get distance 0; a mask with no complement gets +infinity everywhere inside.
// Interior-layout result.  Separable lower-envelope transform, exact for
// anisotropic spacing.
std::vector<double> distance_to_complement(const Mask& mask);

RegionDecomposition strip_split(const Mask& support, double epsilon);

// Mask cells with at least one 6-neighbor outside the mask (cells beyond the
// box count as complement).
Mask boundary_shell(const Mask& mask);

} // namespace cloudlab
