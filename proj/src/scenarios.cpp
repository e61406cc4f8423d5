#include "cloudlab/scenarios.hpp"

#include "cloudlab/reduce.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace cloudlab {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Smooth random vector potential: each component is a sum of a few trig modes
// with seeded integer wavevectors, amplitudes and phases.  The velocity is its
// analytic curl, so div w vanishes identically in the continuum.
struct TrigPotential {
    static constexpr int kModes = 3;
    struct Mode {
        double amp;
        double kvec[3];  // radians per length unit
        double phase;
    };
    std::array<std::array<Mode, kModes>, 3> modes;

    static TrigPotential seeded(std::uint64_t seed, const CartesianGrid& g)
    {
        std::mt19937_64 rng(seed);
        auto uniform = [&rng]() { return std::ldexp((double)rng(), -64); };
        TrigPotential p;
        for (int c = 0; c < 3; ++c) {
            for (int m = 0; m < kModes; ++m) {
                Mode& mo = p.modes[c][m];
                mo.amp = 2.0 * uniform() - 1.0;
                for (int a = 0; a < 3; ++a) {
                    const double L = g.box_hi(a) - g.box_lo(a);
                    const int n = 1 + (int)(uniform() * 3.0);  // 1..3
                    mo.kvec[a] = 2.0 * kPi * n / L;
                }
                mo.phase = 2.0 * kPi * uniform();
            }
        }
        return p;
    }

    // d psi_c / d x_a at position x
    double dpsi(int c, int a, const Vec3& x) const
    {
        double s = 0.0;
        for (const Mode& mo : modes[c]) {
            const double ph = mo.kvec[0] * x[0] + mo.kvec[1] * x[1] + mo.kvec[2] * x[2] +
                              mo.phase;
            s += mo.amp * mo.kvec[a] * std::cos(ph);
        }
        return s;
    }

    Vec3 curl(const Vec3& x) const
    {
        return {dpsi(2, 1, x) - dpsi(1, 2, x),
                dpsi(0, 2, x) - dpsi(2, 0, x),
                dpsi(1, 0, x) - dpsi(0, 1, x)};
    }
};

void validate_config(const ScenarioConfig& c, const CartesianGrid& g)
{
    if (!(c.amplitude > 0.0))
        throw std::invalid_argument("scenario: amplitude must be positive");
    if (!(c.radius > 0.0))
        throw std::invalid_argument("scenario: radius must be positive");
    if (c.smoothness < 1)
        throw std::invalid_argument("scenario: smoothness must be at least 1");
    if (c.profile == Profile::diffuse_bump) {
        const int kmin = c.eos.regularity_case == RegularityCase::A ? 3 : 4;
        if (c.smoothness < kmin)
            throw std::invalid_argument(
                c.eos.regularity_case == RegularityCase::A
                    ? "scenario: diffuse profile needs smoothness k >= 3 under case A"
                    : "scenario: diffuse profile needs smoothness k >= 4 under case B");
    }
    for (int a = 0; a < 3; ++a) {
        const double margin = 2.0 * g.spacing[a];
        if (c.center[a] - c.radius < g.box_lo(a) + margin ||
            c.center[a] + c.radius > g.box_hi(a) - margin)
            throw std::invalid_argument(
                "scenario: the support ball must fit in the box with a two-cell margin");
    }
}

} // namespace

SystemState make_scenario(const ScenarioConfig& config, const CartesianGrid& grid)
{
    validate_config(config, grid);

    SystemState state;
    state.time = 0.0;
    state.eos = config.eos;
    state.boundary = BoundaryMode::vacuum;
    state.alpha = ScalarField(grid);
    state.w = VectorField(grid);

    const double R2 = config.radius * config.radius;
    const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];

    // profile
#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const Vec3 x = grid.position(i, j, k);
                double r2 = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const double d = x[a] - config.center[a];
                    r2 += d * d;
                }
                const double u = 1.0 - r2 / R2;
                if (u <= 0.0)
                    continue;
                if (config.profile == Profile::diffuse_bump) {
                    state.alpha.at(i, j, k) = config.amplitude * std::pow(u, config.smoothness);
                } else {
                    state.alpha.at(i, j, k) =
                        config.eos.density_to_makino(config.amplitude * u);
                }
            }
        }
    }

    // velocity
    switch (config.velocity_mode) {
    case VelocityMode::rest:
        break;
    case VelocityMode::homologous:
#pragma omp parallel for collapse(2) schedule(static)
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    const Vec3 x = grid.position(i, j, k);
                    for (int a = 0; a < 3; ++a)
                        state.w.at(a, i, j, k) = config.H * (x[a] - config.center[a]);
                }
        break;
    case VelocityMode::rotation:
#pragma omp parallel for collapse(2) schedule(static)
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    const Vec3 x = grid.position(i, j, k);
                    state.w.at(0, i, j, k) = -config.omega * (x[1] - config.center[1]);
                    state.w.at(1, i, j, k) = config.omega * (x[0] - config.center[0]);
                }
        break;
    case VelocityMode::random_solenoidal: {
        const TrigPotential pot = TrigPotential::seeded(config.seed, grid);
#pragma omp parallel for collapse(2) schedule(static)
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    const Vec3 c = pot.curl(grid.position(i, j, k));
                    for (int a = 0; a < 3; ++a)
                        state.w.at(a, i, j, k) = c[a];
                }
        const double mx = parallel_max(grid.ncell(), [&](long m) {
            const int i = (int)(m % nx);
            const int j = (int)((m / nx) % ny);
            const int k = (int)(m / ((long)nx * ny));
            double s = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double w = state.w.at(a, i, j, k);
                s += w * w;
            }
            return s;
        });
        if (mx > 0.0) {
            const double scale = config.eps_amp / std::sqrt(mx);
            for (auto& comp : state.w.comp)
                for (auto& e : comp)
                    e *= scale;
        }
        break;
    }
    }
    return state;
}

namespace {

using Y2 = std::array<long double, 2>;  // (r, v)

struct DpResult {
    Y2 y5;
    long double err;  // scaled error norm
    bool ok;          // stages stayed at r > 0
};

// One Dormand-Prince 4(5) step of size h from y, for r'' = -mu / r^2.
DpResult dp_step(const Y2& y, long double h, long double mu, long double rtol,
                 long double atol)
{
    auto f = [mu](const Y2& q) -> Y2 { return {q[1], -mu / (q[0] * q[0])}; };

    static const long double A[7][6] = {
        {0, 0, 0, 0, 0, 0},
        {1.0L / 5, 0, 0, 0, 0, 0},
        {3.0L / 40, 9.0L / 40, 0, 0, 0, 0},
        {44.0L / 45, -56.0L / 15, 32.0L / 9, 0, 0, 0},
        {19372.0L / 6561, -25360.0L / 2187, 64448.0L / 6561, -212.0L / 729, 0, 0},
        {9017.0L / 3168, -355.0L / 33, 46732.0L / 5247, 49.0L / 176, -5103.0L / 18656, 0},
        {35.0L / 384, 0, 500.0L / 1113, 125.0L / 192, -2187.0L / 6784, 11.0L / 84},
    };
    static const long double B5[7] = {35.0L / 384,     0, 500.0L / 1113, 125.0L / 192,
                                      -2187.0L / 6784, 11.0L / 84,       0};
    static const long double B4[7] = {5179.0L / 57600,    0,
                                      7571.0L / 16695,    393.0L / 640,
                                      -92097.0L / 339200, 187.0L / 2100,
                                      1.0L / 40};

    Y2 k[7];
    DpResult res;
    res.ok = true;
    k[0] = f(y);
    for (int s = 1; s < 7; ++s) {
        Y2 q = y;
        for (int p = 0; p < s; ++p) {
            q[0] += h * A[s][p] * k[p][0];
            q[1] += h * A[s][p] * k[p][1];
        }
        if (!(q[0] > 0.0L)) {
            res.ok = false;
            return res;
        }
        k[s] = f(q);
    }
    Y2 y5 = y, y4 = y;
    for (int s = 0; s < 7; ++s) {
        y5[0] += h * B5[s] * k[s][0];
        y5[1] += h * B5[s] * k[s][1];
        y4[0] += h * B4[s] * k[s][0];
        y4[1] += h * B4[s] * k[s][1];
    }
    long double en = 0.0L;
    for (int c = 0; c < 2; ++c) {
        const long double sc =
            atol + rtol * std::max(std::fabs((double)y[c]), std::fabs((double)y5[c]));
        const long double d = (y5[c] - y4[c]) / sc;
        en += d * d;
    }
    res.y5 = y5;
    res.err = std::sqrt((double)(en / 2.0L));
    return res;
}

} // namespace

CollapseOracle collapse_oracle(double total_mass, double r0, double v0)
{
    if (!(total_mass > 0.0))
        throw std::invalid_argument("collapse_oracle: total mass must be positive");
    if (!(r0 > 0.0))
        throw std::invalid_argument("collapse_oracle: r0 must be positive");

    CollapseOracle out;
    const long double mu = (long double)total_mass / (4.0L * (long double)kPi);
    out.mu = (double)mu;

    const long double r_stop = 1e-6L * (long double)r0;
    const long double t_ff = 0.5L * (long double)kPi * std::pow((long double)r0, 1.5L) /
                             std::sqrt(2.0L * mu);
    const long double energy = 0.5L * (long double)v0 * v0 - mu / (long double)r0;
    const bool escapes = v0 >= 0.0 && energy >= 0.0L;
    const long double t_max = escapes ? 20.0L * t_ff : 1e4L * t_ff;

    const long double rtol = 1e-15L, atol = 1e-18L * (long double)r0;
    Y2 y{(long double)r0, (long double)v0};
    long double t = 0.0L;
    long double h = 1e-4L * t_ff;

    out.t.push_back(0.0);
    out.r.push_back(r0);
    out.v.push_back(v0);

    bool hit = false;
    long double t_hit = 0.0L;
    for (long it = 0; it < 20000000 && t < t_max; ++it) {
        DpResult s = dp_step(y, h, mu, rtol, atol);
        if (!s.ok || !(s.err == s.err)) {
            h *= 0.5L;
            continue;
        }
        if (s.err > 1.0L) {
            h *= std::max(0.2L, 0.9L * std::pow(s.err, -0.2L));
            continue;
        }
        if (s.y5[0] <= r_stop) {
            // bisect the substep length to land on r = r_stop
            long double lo = 0.0L, hi = h;
            Y2 yl = y;
            for (int b = 0; b < 120 && hi - lo > 0.0L; ++b) {
                const long double mid = 0.5L * (lo + hi);
                DpResult sm = dp_step(y, mid, mu, rtol, atol);
                if (!sm.ok || sm.y5[0] <= r_stop) {
                    hi = mid;
                } else {
                    lo = mid;
                    yl = sm.y5;
                }
            }
            t_hit = t + hi;
            y = yl;
            hit = true;
            break;
        }
        t += h;
        y = s.y5;
        out.t.push_back((double)t);
        out.r.push_back((double)y[0]);
        out.v.push_back((double)y[1]);
        h *= std::min(5.0L, std::max(0.2L, 0.9L * std::pow(std::max(s.err, 1e-10L), -0.2L)));
        if (t + h > t_max)
            h = t_max - t;
        if (!(h > 0.0L))
            break;
    }

    if (hit) {
        // analytic remainder from r_stop to 0 (the energy correction is
        // O(E r_stop / mu) relative -- far below the reported precision)
        const long double rem = (2.0L / 3.0L) * std::pow(r_stop, 1.5L) / std::sqrt(2.0L * mu);
        out.collapsed = true;
        out.t_collapse = (double)(t_hit + rem);
        out.t.push_back(out.t_collapse);
        out.r.push_back(0.0);
        out.v.push_back((double)y[1]);
    } else {
        out.collapsed = false;
        out.t_collapse = std::numeric_limits<double>::infinity();
    }
    return out;
}

}  // namespace cloudlab
