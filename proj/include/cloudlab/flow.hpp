#pragma once

#include "cloudlab/eos.hpp"
#include "cloudlab/gravity.hpp"
#include "cloudlab/grid.hpp"
#include "cloudlab/hyper.hpp"
#include "cloudlab/regions.hpp"

#include <vector>

namespace cloudlab {

// Trilinear interpolation of cell-centered data; requires a filled halo and
// ghost >= 1, and p inside the physical box (cell centers +- h/2).
double interp_scalar(const ScalarField& f, const Vec3& p);
Vec3 interp_vector(const VectorField& f, const Vec3& p);

// Central-difference divergence on interior cells; halo of the result is
// left unfilled.  Requires ghost >= 1 and a filled halo.
ScalarField divergence(const VectorField& w);

enum class MarkerKind { boundary, interior };

// Passive tracer advected with the flow.  Carries the field values at its
// seed, the accumulated time integral of div w along its path, and a short
// velocity history for acceleration estimates.
struct Marker {
    long label = 0;
    MarkerKind kind = MarkerKind::interior;
    Vec3 xi{0.0, 0.0, 0.0}; // seed position
    Vec3 x{0.0, 0.0, 0.0};  // current position
    bool alive = true;
    double alpha0 = 0.0;
    double rho0 = 0.0;
    double int_divw = 0.0;

    static constexpr int kHist = 3;
    int nhist = 0;
    double t_hist[kHist] = {0.0, 0.0, 0.0};
    Vec3 w_hist[kHist] = {};

    void push_history(double t, const Vec3& w);
};

struct MarkerSet {
    double time = 0.0;
    std::vector<Marker> markers;
};

struct MarkerSeedParams {
    int n_boundary = 64;
    int n_interior = 64;
    unsigned long seed = 1;
};

// Deterministic seeding: boundary markers are placed on the inner boundary
// shell of the support by farthest-point sampling (the start cell is chosen
// by the seed), interior markers at Halton(2,3,5) points inside the support
// bounding box (the sequence offset is chosen by the seed), accepted when
// they land in a support cell.  Throws std::runtime_error when a requested
// region is empty or the acceptance loop starves.
MarkerSet seed_markers(const SystemState& state, double floor, const MarkerSeedParams& params);

// One time level of the flow as the markers see it: halo-filled velocity and
// its divergence at time t.
struct FlowFrame {
    double t = 0.0;
    const VectorField* w = nullptr;
    const ScalarField* divw = nullptr;
};

// RK4 advection from f0.t to f1.t with the velocity linear in time between
// the two frames; accumulates int div w by the trapezoid rule along the
// path.  Markers that step outside the box die (alive = false).
void advance_markers(MarkerSet& ms, const FlowFrame& f0, const FlowFrame& f1);

// Lagrangian transport predictions from the accumulated divergence integral:
//   rho(t) = rho0 exp(-int div w),  alpha(t) = alpha0 exp(-(gamma-1)/2 int div w)
struct TransportPrediction {
    double alpha = 0.0;
    double rho = 0.0;
};
TransportPrediction transported_density(const Marker& mk, const EquationOfState& eos);

// Second-order backward difference of the marker velocity on its (generally
// nonuniform) history stencil; throws std::logic_error with fewer than three
// samples.
Vec3 marker_acceleration(const Marker& mk);

// |dw/dt - g| at the marker: how far the marker dynamics is from free fall.
double freefall_residual(const Marker& mk, const PotentialSolution& pot);

// Free-fall residual over the live boundary markers that already carry three
// history samples (younger markers are skipped).  An empty selection yields
// zeros with n = 0.
struct FreefallSummary {
    double max_residual = 0.0;
    double mean_residual = 0.0;
    int n = 0;
};
FreefallSummary freefall_summary(const MarkerSet& ms, const PotentialSolution& pot);

// Symmetric discrepancy between the live boundary markers and the support's
// inner boundary shell: the largest marker-to-shell distance and the largest
// shell-to-marker distance (cell centers).
struct SupportMarkerDistance {
    double marker_to_shell = 0.0;
    double shell_to_marker = 0.0;
};
SupportMarkerDistance support_vs_markers(const MarkerSet& ms, const Mask& support);

} // namespace cloudlab
