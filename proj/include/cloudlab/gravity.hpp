#pragma once

#include "cloudlab/grid.hpp"

#include <memory>

namespace cloudlab {

enum class GravityMethod { direct, fft };

// Potential of the attractive Newtonian convention Lap(phi) = rho,
// phi(x) = -(1/4pi) integral rho(y)/|x-y| dy, acceleration g = -grad(phi).
// phi is computed on the full ghost-extended array (so its gradient is
// available on every interior cell); g's halo is filled by extrapolation.
struct PotentialSolution {
    ScalarField phi;
    VectorField g;
    GravityMethod method = GravityMethod::fft;
};

// integral over one cell of 1/|x - y| dy, evaluated at the cell center;
// closed form (prism antiderivative), valid for anisotropic cells.
double cell_self_integral(double hx, double hy, double hz);

// O(N_target x N_source) summation oracle.  Sources are interior cells with
// rho != 0; targets are all extended cells.  Throws if the support touches
// the outermost interior layer.
PotentialSolution solve_potential_direct(const ScalarField& rho);

// Free-space convolution via domain doubling; discretizes the identical sum
// as the direct oracle (same kernel samples, same self-cell constant).
// Plans and the kernel spectrum are cached per grid inside the solver.
class FftPoissonSolver {
public:
    explicit FftPoissonSolver(const CartesianGrid& grid);
    ~FftPoissonSolver();

    FftPoissonSolver(const FftPoissonSolver&) = delete;
    FftPoissonSolver& operator=(const FftPoissonSolver&) = delete;

    PotentialSolution solve(const ScalarField& rho) const;

    const CartesianGrid& grid() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

PotentialSolution solve_potential_fft(const ScalarField& rho);

} // namespace cloudlab
