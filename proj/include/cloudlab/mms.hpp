#pragma once

#include "cloudlab/hyper.hpp"

#include <string>
#include <vector>

namespace cloudlab {

// One resolution row of a manufactured-solution convergence study.  Orders
// are computed against the previous row and are NaN on the first row.
struct MmsRow {
    int n = 0;
    double h = 0.0;
    double err_rho_l1 = 0.0;
    double err_rho_linf = 0.0;
    double err_w_l1 = 0.0;
    double err_w_linf = 0.0;
    double order_rho_l1 = 0.0;
    double order_rho_linf = 0.0;
    double order_w_l1 = 0.0;
    double order_w_linf = 0.0;
};

struct MmsReport {
    std::string id;
    double t_final = 0.0;
    std::vector<MmsRow> rows;
};

// Available manufactured cases:
//  "trig"                 smooth travelling trigonometric fields on the unit
//                         periodic box with analytically derived sources;
//                         measures the spatial convergence order of the full
//                         production update
//  "discrete-stationary"  the source is minus the discrete stage derivative
//                         of the initial state, frozen per cell, so the exact
//                         solution of the *scheme* is constant in time and
//                         any error is pure roundoff accumulation
std::vector<std::string> mms_cases();

// Runs the case through the production step path on n^3 grids and returns
// errors at t_final measured against the exact fields.
MmsReport mms_run(const std::string& id, const std::vector<int>& resolutions, double t_final);

} // namespace cloudlab
