#include "cloudlab/ref.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cloudlab {
namespace ref {

namespace {
constexpr double kFourPi = 4.0 * M_PI;
}

VectorField gradient(const ScalarField& f)
{
    const CartesianGrid& g = f.grid;
    if (g.ghost < 1)
        throw std::logic_error("gradient: grid must carry at least one ghost layer");
    if (!f.ghost_ok)
        throw std::logic_error("gradient: ghost halo not filled");

    VectorField out(g);
    const double ix = 0.5 / g.spacing[0];
    const double iy = 0.5 / g.spacing[1];
    const double iz = 0.5 / g.spacing[2];
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                out.at(0, i, j, k) = (f.at(i + 1, j, k) - f.at(i - 1, j, k)) * ix;
                out.at(1, i, j, k) = (f.at(i, j + 1, k) - f.at(i, j - 1, k)) * iy;
                out.at(2, i, j, k) = (f.at(i, j, k + 1) - f.at(i, j, k - 1)) * iz;
            }
    return out;
}

ScalarField divergence(const VectorField& w)
{
    const CartesianGrid& g = w.grid;
    if (g.ghost < 1)
        throw std::invalid_argument("divergence: grid must carry at least one ghost layer");
    if (!w.ghost_ok)
        throw std::logic_error("divergence: ghost halo not filled");
    ScalarField d(g);
    const long s[3] = {1, (long)g.ext(0), (long)g.ext(0) * g.ext(1)};
    for (int ck = 0; ck < g.dims[2]; ++ck)
        for (int cj = 0; cj < g.dims[1]; ++cj)
            for (int ci = 0; ci < g.dims[0]; ++ci) {
                const long c = g.idx(ci, cj, ck);
                double acc = 0.0;
                for (int a = 0; a < 3; ++a)
                    acc += 0.5 * (w.comp[a][c + s[a]] - w.comp[a][c - s[a]]) / g.spacing[a];
                d.v[c] = acc;
            }
    d.ghost_ok = false;
    return d;
}

std::vector<double> distance_to_complement(const Mask& mask)
{
    const CartesianGrid& g = mask.grid;
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const double inf = std::numeric_limits<double>::infinity();

    struct Cell {
        int i, j, k;
    };
    std::vector<Cell> complement;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                if (!mask.at(i, j, k))
                    complement.push_back({i, j, k});

    std::vector<double> out(g.ncell(), 0.0);
    long m = 0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i, ++m) {
                if (!mask.at(i, j, k)) {
                    out[m] = 0.0;
                    continue;
                }
                double best = inf;
                for (const Cell& c : complement) {
                    const double dx = (i - c.i) * g.spacing[0];
                    const double dy = (j - c.j) * g.spacing[1];
                    const double dz = (k - c.k) * g.spacing[2];
                    const double d2 = dx * dx + dy * dy + dz * dz;
                    if (d2 < best)
                        best = d2;
                }
                out[m] = best == inf ? inf : std::sqrt(best);
            }
    return out;
}

PotentialSolution solve_potential_direct(const ScalarField& rho)
{
    const CartesianGrid& g = rho.grid;
    if (g.ghost < 1)
        throw std::invalid_argument("potential solve: grid needs a ghost layer for g = -grad(phi)");

    const auto& d = g.dims;
    std::vector<int> ci, cj, ck;
    std::vector<double> q;
    const double V = g.cell_volume();
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                const double r = rho.at(i, j, k);
                if (r != 0.0) {
                    if (i == 0 || j == 0 || k == 0 || i == d[0] - 1 || j == d[1] - 1 ||
                        k == d[2] - 1)
                        throw std::invalid_argument(
                            "potential solve: source support touches the box boundary");
                    ci.push_back(i);
                    cj.push_back(j);
                    ck.push_back(k);
                    q.push_back(r * V);
                }
            }

    const double self_int = cell_self_integral(g.spacing[0], g.spacing[1], g.spacing[2]);
    PotentialSolution out;
    out.method = GravityMethod::direct;
    out.phi = ScalarField(g);

    const int gh = g.ghost;
    const int ex = g.ext(0), ey = g.ext(1), ez = g.ext(2);
    const long ns = (long)q.size();
    for (int K = 0; K < ez; ++K)
        for (int J = 0; J < ey; ++J)
            for (int I = 0; I < ex; ++I) {
                const int ti = I - gh, tj = J - gh, tk = K - gh;
                double acc = 0.0;
                for (long s = 0; s < ns; ++s) {
                    const double dx = (ti - ci[s]) * g.spacing[0];
                    const double dy = (tj - cj[s]) * g.spacing[1];
                    const double dz = (tk - ck[s]) * g.spacing[2];
                    const double r2 = dx * dx + dy * dy + dz * dz;
                    if (r2 > 0.0)
                        acc += q[s] / std::sqrt(r2);
                    else
                        acc += q[s] * (self_int / V);
                }
                out.phi.v[((long)K * ey + J) * ex + I] = -acc / kFourPi;
            }

    out.phi.ghost_ok = true;
    out.g = ref::gradient(out.phi);
    for (int c = 0; c < 3; ++c)
        for (auto& x : out.g.comp[c])
            x = -x;
    fill_ghosts(out.g, GhostPolicy::extrapolate);
    return out;
}

double sum(const std::vector<double>& v)
{
    double acc = 0.0;
    for (double x : v)
        acc += x;
    return acc;
}

double max_abs(const std::vector<double>& v)
{
    double acc = 0.0;
    for (double x : v) {
        const double a = std::fabs(x);
        if (a > acc)
            acc = a;
    }
    return acc;
}

} // namespace ref
} // namespace cloudlab
