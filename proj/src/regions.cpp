#include "cloudlab/regions.hpp"

#include <cmath>
#include <limits>

namespace cloudlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance transform along a pencil of n samples with spacing h:
// out[q] = min_p (f[p] + (h (q-p))^2).  Lower envelope of parabolas; entries
// with f = +inf never contribute.
void edt_pencil(const double* f, double* out, int n, double h, int* v, double* z)
{
    int k = -1;
    const double h2 = h * h;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf)
            continue;
        double s = 0.0;
        while (k >= 0) {
            // abscissa (in index units) where parabola q overtakes parabola v[k]
            s = (f[q] - f[v[k]] + h2 * ((double)q * q - (double)v[k] * v[k])) /
                (2.0 * h2 * (q - v[k]));
            if (s > z[k])
                break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -kInf : s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q)
            out[q] = kInf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q)
            ++j;
        double d = h * (q - v[j]);
        out[q] = f[v[j]] + d * d;
    }
}

} // namespace

std::vector<double> distance_to_complement(const Mask& mask)
{
    const CartesianGrid& g = mask.grid;
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    std::vector<double> d2(g.ncell());

    // seed: squared distance is 0 at complement cells, inf at mask cells
    for (long i = 0; i < g.ncell(); ++i)
        d2[i] = mask.m[i] ? kInf : 0.0;

    auto lin = [&](int i, int j, int k) { return ((long)k * ny + j) * nx + i; };

    // pass along x
#pragma omp parallel
    {
        std::vector<double> f(std::max({nx, ny, nz})), o(std::max({nx, ny, nz}));
        std::vector<int> v(std::max({nx, ny, nz}) + 1);
        std::vector<double> z(std::max({nx, ny, nz}) + 2);

#pragma omp for schedule(static) collapse(2)
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j) {
                for (int i = 0; i < nx; ++i)
                    f[i] = d2[lin(i, j, k)];
                edt_pencil(f.data(), o.data(), nx, g.spacing[0], v.data(), z.data());
                for (int i = 0; i < nx; ++i)
                    d2[lin(i, j, k)] = o[i];
            }

#pragma omp for schedule(static) collapse(2)
        for (int k = 0; k < nz; ++k)
            for (int i = 0; i < nx; ++i) {
                for (int j = 0; j < ny; ++j)
                    f[j] = d2[lin(i, j, k)];
                edt_pencil(f.data(), o.data(), ny, g.spacing[1], v.data(), z.data());
                for (int j = 0; j < ny; ++j)
                    d2[lin(i, j, k)] = o[j];
            }

#pragma omp for schedule(static) collapse(2)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                for (int k = 0; k < nz; ++k)
                    f[k] = d2[lin(i, j, k)];
                edt_pencil(f.data(), o.data(), nz, g.spacing[2], v.data(), z.data());
                for (int k = 0; k < nz; ++k)
                    d2[lin(i, j, k)] = o[k];
            }
    }

    for (auto& e : d2)
        e = e == kInf ? kInf : std::sqrt(e);
    return d2;
}

RegionDecomposition strip_split(const Mask& support, double epsilon)
{
    if (!(epsilon > 0.0))
        throw std::invalid_argument("strip_split: epsilon must be positive");

    RegionDecomposition rd;
    rd.support = support;
    rd.strip = Mask(support.grid);
    rd.interior = Mask(support.grid);
    rd.epsilon = epsilon;

    std::vector<double> dist = distance_to_complement(support);
    for (long i = 0; i < support.grid.ncell(); ++i) {
        if (!support.m[i])
            continue;
        if (dist[i] < epsilon)
            rd.strip.m[i] = 1;
        else
            rd.interior.m[i] = 1; // distance exactly epsilon lands here
    }
    return rd;
}

Mask boundary_shell(const Mask& mask)
{
    const CartesianGrid& g = mask.grid;
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    Mask shell(g);

#pragma omp parallel for schedule(static) collapse(2)
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                if (!mask.at(i, j, k))
                    continue;
                auto outside = [&](int a, int b, int c) {
                    if (a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz)
                        return true;
                    return mask.at(a, b, c) == 0;
                };
                if (outside(i - 1, j, k) || outside(i + 1, j, k) || outside(i, j - 1, k) ||
                    outside(i, j + 1, k) || outside(i, j, k - 1) || outside(i, j, k + 1))
                    shell.at(i, j, k) = 1;
            }
    return shell;
}

} // namespace cloudlab
