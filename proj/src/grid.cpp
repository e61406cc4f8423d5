#include "cloudlab/grid.hpp"

#include <cmath>

namespace cloudlab {

namespace {

// Fill the halo of one component along every axis in turn.  Earlier passes
// populate the face ghosts so later passes can extend edges and corners.
void fill_component(std::vector<double>& v, const CartesianGrid& g, GhostPolicy policy)
{
    const int gh = g.ghost;
    if (gh == 0)
        return;
    const int ex = g.ext(0), ey = g.ext(1);
    auto lin = [&](int I, int J, int K) { return ((long)K * ey + J) * ex + I; };

    // axis 0: sweep every (j,k) pencil, then axis 1, then axis 2
    for (int axis = 0; axis < 3; ++axis) {
        const int n = g.dims[axis];
        // iterate over the two transverse extents (ghosts included, so corners
        // get consistent values from the later passes)
        int ta = (axis + 1) % 3, tb = (axis + 2) % 3;
        const int na = g.ext(ta), nb = g.ext(tb);
#pragma omp parallel for schedule(static) collapse(2)
        for (int b = 0; b < nb; ++b) {
            for (int a = 0; a < na; ++a) {
                int I[3];
                I[ta] = a;
                I[tb] = b;
                auto cell = [&](int s) {
                    I[axis] = s + gh; // s in interior coords
                    return lin(I[0], I[1], I[2]);
                };
                for (int s = 1; s <= gh; ++s) {
                    double lo, hi;
                    switch (policy) {
                    case GhostPolicy::zero:
                        lo = 0.0;
                        hi = 0.0;
                        break;
                    case GhostPolicy::extrapolate:
                        lo = (s + 1) * v[cell(0)] - s * v[cell(1)];
                        hi = (s + 1) * v[cell(n - 1)] - s * v[cell(n - 2)];
                        break;
                    case GhostPolicy::periodic:
                        lo = v[cell(n - s)];
                        hi = v[cell(s - 1)];
                        break;
                    default:
                        lo = hi = 0.0;
                    }
                    v[cell(-s)] = lo;
                    v[cell(n - 1 + s)] = hi;
                }
            }
        }
    }
}

} // namespace

void fill_ghosts(ScalarField& f, GhostPolicy policy)
{
    fill_component(f.v, f.grid, policy);
    f.ghost_ok = true;
}

void fill_ghosts(VectorField& f, GhostPolicy policy)
{
    for (auto& c : f.comp)
        fill_component(c, f.grid, policy);
    f.ghost_ok = true;
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

#pragma omp parallel for schedule(static) collapse(2)
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                out.at(0, i, j, k) = (f.at(i + 1, j, k) - f.at(i - 1, j, k)) * ix;
                out.at(1, i, j, k) = (f.at(i, j + 1, k) - f.at(i, j - 1, k)) * iy;
                out.at(2, i, j, k) = (f.at(i, j, k + 1) - f.at(i, j, k - 1)) * iz;
            }
        }
    }
    return out;
}

Mask support_mask(const ScalarField& alpha, double floor)
{
    if (floor < 0.0)
        throw std::invalid_argument("support_mask: floor must be non-negative");
    const CartesianGrid& g = alpha.grid;
    Mask m(g);
#pragma omp parallel for schedule(static) collapse(2)
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                m.at(i, j, k) = alpha.at(i, j, k) > floor ? 1 : 0;
    return m;
}

bool mask_touches_boundary(const Mask& m)
{
    const auto& d = m.grid.dims;
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                if (!m.at(i, j, k))
                    continue;
                if (i == 0 || j == 0 || k == 0 || i == d[0] - 1 || j == d[1] - 1 || k == d[2] - 1)
                    return true;
            }
    return false;
}

int mask_margin_cells(const Mask& m)
{
    const auto& d = m.grid.dims;
    int margin = d[0] + d[1] + d[2];
    for (int k = 0; k < d[2]; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                if (!m.at(i, j, k))
                    continue;
                int e = i;
                e = std::min(e, d[0] - 1 - i);
                e = std::min(e, j);
                e = std::min(e, d[1] - 1 - j);
                e = std::min(e, k);
                e = std::min(e, d[2] - 1 - k);
                margin = std::min(margin, e);
            }
    return margin;
}

} // namespace cloudlab
