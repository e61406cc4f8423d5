#include "cloudlab/gravity.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace cloudlab {

namespace {

constexpr double kFourPi = 4.0 * M_PI;

// antiderivative for the triple integral of 1/r over a box corner at (x,y,z);
// degenerate terms (vanishing prefactor) are defined as 0
double prism_term(double x, double y, double z)
{
    double r = std::sqrt(x * x + y * y + z * z);
    double s = 0.0;
    if (x * y != 0.0 && z + r != 0.0)
        s += x * y * std::log(z + r);
    if (y * z != 0.0 && x + r != 0.0)
        s += y * z * std::log(x + r);
    if (z * x != 0.0 && y + r != 0.0)
        s += z * x * std::log(y + r);
    if (x != 0.0)
        s -= 0.5 * x * x * std::atan2(y * z, x * r);
    if (y != 0.0)
        s -= 0.5 * y * y * std::atan2(z * x, y * r);
    if (z != 0.0)
        s -= 0.5 * z * z * std::atan2(x * y, z * r);
    return s;
}

} // namespace

double cell_self_integral(double hx, double hy, double hz)
{
    // integral over [-hx/2,hx/2] x ... of 1/|y| dy = 8 * integral over the
    // positive octant; alternating corner sum of the antiderivative
    double a = 0.5 * hx, b = 0.5 * hy, c = 0.5 * hz;
    double s = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                // inclusion-exclusion over the corner (ia, jb, kc): the full
                // corner enters with +, each dropped coordinate flips the sign
                double sgn = ((i + j + k) % 2 == 1) ? 1.0 : -1.0;
                s += sgn * prism_term(i ? a : 0.0, j ? b : 0.0, k ? c : 0.0);
            }
    return 8.0 * s;
}

namespace {

// gather interior source cells (rho != 0) once; shared by direct solver
struct SourceList {
    std::vector<int> ci, cj, ck;
    std::vector<double> q; // rho * V
};

SourceList collect_sources(const ScalarField& rho)
{
    const CartesianGrid& g = rho.grid;
    SourceList s;
    const double V = g.cell_volume();
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                double r = rho.at(i, j, k);
                if (r != 0.0) {
                    s.ci.push_back(i);
                    s.cj.push_back(j);
                    s.ck.push_back(k);
                    s.q.push_back(r * V);
                }
            }
    return s;
}

void check_support_margin(const ScalarField& rho)
{
    const CartesianGrid& g = rho.grid;
    const auto& d = g.dims;
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                if (rho.at(i, j, k) == 0.0)
                    continue;
                if (i == 0 || j == 0 || k == 0 || i == d[0] - 1 || j == d[1] - 1 || k == d[2] - 1)
                    throw std::invalid_argument(
                        "potential solve: source support touches the box boundary");
            }
}

void fill_gradient_from_phi(PotentialSolution& out)
{
    // phi carries true values on its halo, so mark it directly usable
    out.phi.ghost_ok = true;
    out.g = gradient(out.phi);
    for (int c = 0; c < 3; ++c)
        for (auto& x : out.g.comp[c])
            x = -x;
    // gradient only wrote interior cells; extrapolate a halo so interpolation
    // near the box faces stays defined
    fill_ghosts(out.g, GhostPolicy::extrapolate);
}

} // namespace

PotentialSolution solve_potential_direct(const ScalarField& rho)
{
    const CartesianGrid& g = rho.grid;
    if (g.ghost < 1)
        throw std::invalid_argument("potential solve: grid needs a ghost layer for g = -grad(phi)");
    check_support_margin(rho);

    SourceList src = collect_sources(rho);
    const double self_int = cell_self_integral(g.spacing[0], g.spacing[1], g.spacing[2]);
    const double V = g.cell_volume();

    PotentialSolution out;
    out.method = GravityMethod::direct;
    out.phi = ScalarField(g);

    const int gh = g.ghost;
    const int ex = g.ext(0), ey = g.ext(1), ez = g.ext(2);
    const long ns = (long)src.q.size();

#pragma omp parallel for schedule(static) collapse(2)
    for (int K = 0; K < ez; ++K) {
        for (int J = 0; J < ey; ++J) {
            for (int I = 0; I < ex; ++I) {
                const int ti = I - gh, tj = J - gh, tk = K - gh;
                double acc = 0.0;
                for (long s = 0; s < ns; ++s) {
                    const double dx = (ti - src.ci[s]) * g.spacing[0];
                    const double dy = (tj - src.cj[s]) * g.spacing[1];
                    const double dz = (tk - src.ck[s]) * g.spacing[2];
                    const double r2 = dx * dx + dy * dy + dz * dz;
                    if (r2 > 0.0)
                        acc += src.q[s] / std::sqrt(r2);
                    else
                        acc += src.q[s] * (self_int / V);
                }
                out.phi.v[((long)K * ey + J) * ex + I] = -acc / kFourPi;
            }
        }
    }

    fill_gradient_from_phi(out);
    return out;
}

//=============================================================================
// FFT path: zero-padded convolution on the doubled ghost-extended lattice
//=============================================================================

struct FftPoissonSolver::Impl {
    CartesianGrid grid;
    int mx, my, mz;       // padded (doubled) extents
    long nreal, ncplx;
    fftw_plan fwd = nullptr, bwd = nullptr;
    std::vector<double> work;                     // padded real array
    std::vector<std::complex<double>> spec;       // work spectrum
    std::vector<std::complex<double>> kernel_spec; // FFT of the Green kernel

    explicit Impl(const CartesianGrid& g) : grid(g)
    {
        if (g.ghost < 1)
            throw std::invalid_argument(
                "FftPoissonSolver: grid needs a ghost layer for g = -grad(phi)");
        mx = 2 * g.ext(0);
        my = 2 * g.ext(1);
        mz = 2 * g.ext(2);
        nreal = (long)mx * my * mz;
        ncplx = (long)mz * my * (mx / 2 + 1);

        work.assign(nreal, 0.0);
        spec.resize(ncplx);
        kernel_spec.resize(ncplx);

        // FFTW row-major: slowest dimension first -> (mz, my, mx)
        auto* spec_c = reinterpret_cast<fftw_complex*>(spec.data());
        fwd = fftw_plan_dft_r2c_3d(mz, my, mx, work.data(), spec_c, FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_3d(mz, my, mx, spec_c, work.data(), FFTW_ESTIMATE);
        if (!fwd || !bwd)
            throw std::runtime_error("FftPoissonSolver: FFTW plan creation failed");

        build_kernel();
    }

    ~Impl()
    {
        if (fwd)
            fftw_destroy_plan(fwd);
        if (bwd)
            fftw_destroy_plan(bwd);
    }

    void build_kernel()
    {
        const double V = grid.cell_volume();
        const double self_int = cell_self_integral(grid.spacing[0], grid.spacing[1],
                                                   grid.spacing[2]);
        auto sep = [](int m, int M) { return m <= M / 2 ? m : m - M; };

#pragma omp parallel for schedule(static) collapse(2)
        for (int K = 0; K < mz; ++K) {
            for (int J = 0; J < my; ++J) {
                for (int I = 0; I < mx; ++I) {
                    const double dx = sep(I, mx) * grid.spacing[0];
                    const double dy = sep(J, my) * grid.spacing[1];
                    const double dz = sep(K, mz) * grid.spacing[2];
                    const double r2 = dx * dx + dy * dy + dz * dz;
                    double val = r2 > 0.0 ? -V / (kFourPi * std::sqrt(r2))
                                          : -self_int / kFourPi;
                    work[((long)K * my + J) * mx + I] = val;
                }
            }
        }
        fftw_execute(fwd);
        kernel_spec = spec;
    }

    PotentialSolution solve(const ScalarField& rho)
    {
        if (!(rho.grid == grid))
            throw std::invalid_argument("FftPoissonSolver: grid mismatch");
        check_support_margin(rho);

        const int gh = grid.ghost;

        // embed interior rho at the ghost offset of the extended window
        std::fill(work.begin(), work.end(), 0.0);
#pragma omp parallel for schedule(static) collapse(2)
        for (int k = 0; k < grid.dims[2]; ++k)
            for (int j = 0; j < grid.dims[1]; ++j)
                for (int i = 0; i < grid.dims[0]; ++i)
                    work[((long)(k + gh) * my + (j + gh)) * mx + (i + gh)] =
                        rho.at(i, j, k);

        fftw_execute(fwd);

        const double norm = 1.0 / (double)nreal;
#pragma omp parallel for schedule(static)
        for (long i = 0; i < ncplx; ++i)
            spec[i] *= kernel_spec[i] * norm;

        fftw_execute(bwd);

        PotentialSolution out;
        out.method = GravityMethod::fft;
        out.phi = ScalarField(grid);
        const int ex = grid.ext(0), ey = grid.ext(1), ez = grid.ext(2);
#pragma omp parallel for schedule(static) collapse(2)
        for (int K = 0; K < ez; ++K)
            for (int J = 0; J < ey; ++J)
                for (int I = 0; I < ex; ++I)
                    out.phi.v[((long)K * ey + J) * ex + I] =
                        work[((long)K * my + J) * mx + I];

        fill_gradient_from_phi(out);
        return out;
    }
};

FftPoissonSolver::FftPoissonSolver(const CartesianGrid& grid) : impl_(new Impl(grid)) {}
FftPoissonSolver::~FftPoissonSolver() = default;

PotentialSolution FftPoissonSolver::solve(const ScalarField& rho) const
{
    return impl_->solve(rho);
}

const CartesianGrid& FftPoissonSolver::grid() const
{
    return impl_->grid;
}

PotentialSolution solve_potential_fft(const ScalarField& rho)
{
    FftPoissonSolver solver(rho.grid);
    return solver.solve(rho);
}

} // namespace cloudlab
