#pragma once

#include "cloudlab/eos.hpp"
#include "cloudlab/hyper.hpp"

#include <cstdint>
#include <vector>

namespace cloudlab {

enum class Profile {
    diffuse_bump,         // alpha0 = A (1 - |x-c|^2/R^2)^k_+  (C^{k-1} at the edge)
    physical_vacuum_bump  // rho0  = A (1 - |x-c|^2/R^2)_+     (negative control)
};

enum class VelocityMode {
    rest,              // w0 = 0
    homologous,        // w0 = H (x - c)
    rotation,          // w0 = omega ez x (x - c)
    random_solenoidal  // w0 = eps_amp * normalized curl of a seeded trig potential
};

struct ScenarioConfig {
    Profile profile = Profile::diffuse_bump;
    double amplitude = 1.0;  // A > 0
    double radius = 0.5;     // R > 0
    Vec3 center{0.0, 0.0, 0.0};
    int smoothness = 4;      // k; diffuse profile needs k >= 3 (case A) / k >= 4 (case B)
    VelocityMode velocity_mode = VelocityMode::rest;
    double H = 0.0;
    double omega = 0.0;
    double eps_amp = 0.0;
    std::uint64_t seed = 1;
    EquationOfState eos;
};

// Builds the t=0 state on `grid` (vacuum boundary mode, halos unfilled).
// Throws std::invalid_argument when the config violates its invariants or the
// ball of radius R around the center does not fit in the box with a margin of
// two cells per side.
SystemState make_scenario(const ScenarioConfig& config, const CartesianGrid& grid);

// Spherical free-fall shell oracle in the Lap(phi) = rho convention:
//   r'' = -mu / r^2,  mu = M / (4 pi).
// Integrated adaptively (Dormand-Prince 4(5) in extended precision) until the
// radius falls below 1e-6 r0 (collapse; the analytic remainder closes the gap
// to r = 0) or the trajectory is recognized as escaping.
struct CollapseOracle {
    std::vector<double> t;
    std::vector<double> r;
    std::vector<double> v;
    double mu = 0.0;
    bool collapsed = false;
    double t_collapse = 0.0;  // +infinity when escaping
};

CollapseOracle collapse_oracle(double total_mass, double r0, double v0);

}  // namespace cloudlab
