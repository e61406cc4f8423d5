#pragma once

#include "cloudlab/grid.hpp"

#include <string>
#include <vector>

namespace cloudlab {

// On-disk field container: one line of structured text describing the grid,
// then raw little-endian float64 payload, x-fastest, one full ghost-extended
// array per component.  Round-trips bit-exactly.
struct Snapshot {
    CartesianGrid grid;
    double time = 0.0;
    std::vector<std::string> names;              // one per component
    std::vector<std::vector<double>> components; // each sized grid.ncell_ext()
};

void save_snapshot(const std::string& path, const Snapshot& snap);
Snapshot load_snapshot(const std::string& path);

} // namespace cloudlab
