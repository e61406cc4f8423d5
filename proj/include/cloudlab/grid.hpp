#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cloudlab {

using Vec3 = std::array<double, 3>;
using Index3 = std::array<int, 3>;

// Uniform cell-centered Cartesian grid.  `dims` counts interior cells per
// axis, `origin` is the physical position of the center of cell (0,0,0),
// `ghost` is the halo width carried by every field on this grid.  Storage
// is x-fastest: linear index = ((k+g)*ey + (j+g))*ex + (i+g).
struct CartesianGrid {
    Index3 dims{4, 4, 4};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};
    int ghost = 2;

    CartesianGrid() = default;

    CartesianGrid(Index3 dims_, Vec3 spacing_, Vec3 origin_, int ghost_)
        : dims(dims_), spacing(spacing_), origin(origin_), ghost(ghost_)
    {
        for (int a = 0; a < 3; ++a) {
            if (dims[a] < 4)
                throw std::invalid_argument("CartesianGrid: dims must be >= 4 per axis");
            if (!(spacing[a] > 0.0))
                throw std::invalid_argument("CartesianGrid: spacing must be positive");
        }
        if (ghost < 0)
            throw std::invalid_argument("CartesianGrid: ghost must be non-negative");
    }

    int ext(int a) const { return dims[a] + 2 * ghost; }
    long ncell_ext() const { return (long)ext(0) * ext(1) * ext(2); }
    long ncell() const { return (long)dims[0] * dims[1] * dims[2]; }

    // linear index into a ghost-extended array; interior cells are (0..dims-1),
    // ghosts reachable with indices in [-ghost, dims+ghost)
    long idx(int i, int j, int k) const
    {
        return ((long)(k + ghost) * ext(1) + (j + ghost)) * ext(0) + (i + ghost);
    }

    // linear index into an interior-only array (masks)
    long idx_interior(int i, int j, int k) const
    {
        return ((long)k * dims[1] + j) * dims[0] + i;
    }

    double cell_center(int a, int i) const { return origin[a] + i * spacing[a]; }

    Vec3 position(int i, int j, int k) const
    {
        return {cell_center(0, i), cell_center(1, j), cell_center(2, k)};
    }

    double cell_volume() const { return spacing[0] * spacing[1] * spacing[2]; }

    // physical bounds of the interior box (cell centers +- h/2)
    double box_lo(int a) const { return origin[a] - 0.5 * spacing[a]; }
    double box_hi(int a) const { return origin[a] + (dims[a] - 0.5) * spacing[a]; }

    bool contains(const Vec3& p) const
    {
        for (int a = 0; a < 3; ++a)
            if (p[a] < box_lo(a) || p[a] > box_hi(a))
                return false;
        return true;
    }

    bool operator==(const CartesianGrid& o) const
    {
        return dims == o.dims && spacing == o.spacing && origin == o.origin && ghost == o.ghost;
    }
};

// Cell-centered scalar with ghost halo.  `ghost_ok` records whether the halo
// currently holds values consistent with one of the fill policies; stencil
// operations refuse to run on a stale halo.
struct ScalarField {
    CartesianGrid grid;
    std::vector<double> v;
    bool ghost_ok = false;

    ScalarField() = default;
    explicit ScalarField(const CartesianGrid& g) : grid(g), v(g.ncell_ext(), 0.0) {}

    double& at(int i, int j, int k) { return v[grid.idx(i, j, k)]; }
    double at(int i, int j, int k) const { return v[grid.idx(i, j, k)]; }

    void fill(double x)
    {
        for (auto& e : v)
            e = x;
        ghost_ok = false;
    }
};

// Three cell-centered components stored separately (structure of arrays).
struct VectorField {
    CartesianGrid grid;
    std::array<std::vector<double>, 3> comp;
    bool ghost_ok = false;

    VectorField() = default;
    explicit VectorField(const CartesianGrid& g) : grid(g)
    {
        for (auto& c : comp)
            c.assign(g.ncell_ext(), 0.0);
    }

    double& at(int c, int i, int j, int k) { return comp[c][grid.idx(i, j, k)]; }
    double at(int c, int i, int j, int k) const { return comp[c][grid.idx(i, j, k)]; }

    void fill(double x)
    {
        for (auto& c : comp)
            for (auto& e : c)
                e = x;
        ghost_ok = false;
    }
};

// Boolean region over interior cells only (no halo).
struct Mask {
    CartesianGrid grid;
    std::vector<std::uint8_t> m;

    Mask() = default;
    explicit Mask(const CartesianGrid& g) : grid(g), m(g.ncell(), 0) {}

    std::uint8_t& at(int i, int j, int k) { return m[grid.idx_interior(i, j, k)]; }
    std::uint8_t at(int i, int j, int k) const { return m[grid.idx_interior(i, j, k)]; }

    long count() const
    {
        long n = 0;
        for (auto e : m)
            n += e != 0;
        return n;
    }
};

enum class GhostPolicy {
    zero,        // compactly supported quantities (alpha, rho)
    extrapolate, // linear extrapolation from the two interior cells (velocity)
    periodic     // wrap-around (test mode)
};

void fill_ghosts(ScalarField& f, GhostPolicy policy);
void fill_ghosts(VectorField& f, GhostPolicy policy);

// Second-order central differences on all interior cells; requires ghost >= 1
// and a valid halo.  The result's halo is left unfilled.
VectorField gradient(const ScalarField& f);

// Mask of cells with alpha strictly above `floor`.
Mask support_mask(const ScalarField& alpha, double floor);

// true if some mask cell lies on the outermost interior layer
bool mask_touches_boundary(const Mask& m);

// minimum distance (in cells) from any mask cell to the box faces
int mask_margin_cells(const Mask& m);

} // namespace cloudlab
