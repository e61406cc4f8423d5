// Benchmark of the OpenMP field kernels against their serial reference
// implementations.  Prints a table: kernel, problem size, serial ms,
// parallel ms, speedup, and the largest observed discrepancy.

#include "cloudlab/flow.hpp"
#include "cloudlab/gravity.hpp"
#include "cloudlab/grid.hpp"
#include "cloudlab/reduce.hpp"
#include "cloudlab/ref.hpp"
#include "cloudlab/regions.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

using namespace cloudlab;

namespace {

template <class F>
double best_ms(F&& body, int reps = 3)
{
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        body();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double ai = a[i], bi = b[i];
        if (std::isinf(ai) && std::isinf(bi))
            continue;
        m = std::max(m, std::fabs(ai - bi));
    }
    return m;
}

void row(const std::string& name, int n, double ser, double par, double diff)
{
    std::printf("%-22s %5d^3 %10.2f %10.2f %8.2fx %12.3e\n", name.c_str(), n, ser, par,
                par > 0.0 ? ser / par : 0.0, diff);
}

CartesianGrid make_grid(int n, int ghost)
{
    return CartesianGrid({n, n, n}, {2.0 / n, 2.0 / n, 2.0 / n}, {-1.0 + 1.0 / n, -1.0 + 1.0 / n, -1.0 + 1.0 / n},
                         ghost);
}

ScalarField random_field(const CartesianGrid& g, unsigned long seed)
{
    ScalarField f(g);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                f.at(i, j, k) = std::ldexp((double)rng(), -64);
    fill_ghosts(f, GhostPolicy::extrapolate);
    return f;
}

} // namespace

int main(int argc, char** argv)
{
    const int n = argc > 1 ? std::atoi(argv[1]) : 64;
    const int n_small = argc > 2 ? std::atoi(argv[2]) : 16;

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("%-22s %7s %10s %10s %9s %12s\n", "kernel", "size", "serial/ms", "openmp/ms",
                "speedup", "max|diff|");

    // gradient -------------------------------------------------------------
    {
        CartesianGrid g = make_grid(n, 1);
        ScalarField f = random_field(g, 11);
        VectorField a(g), b(g);
        const double ts = best_ms([&] { a = ref::gradient(f); });
        const double tp = best_ms([&] { b = gradient(f); });
        double d = 0.0;
        for (int c = 0; c < 3; ++c)
            d = std::max(d, max_diff(a.comp[c], b.comp[c]));
        row("gradient", n, ts, tp, d);
    }

    // divergence -----------------------------------------------------------
    {
        CartesianGrid g = make_grid(n, 1);
        VectorField w(g);
        std::mt19937_64 rng(13);
        for (int c = 0; c < 3; ++c)
            for (auto& x : w.comp[c])
                x = std::ldexp((double)rng(), -64) - 0.5;
        fill_ghosts(w, GhostPolicy::extrapolate);
        ScalarField a(g), b(g);
        const double ts = best_ms([&] { a = ref::divergence(w); });
        const double tp = best_ms([&] { b = divergence(w); });
        row("divergence", n, ts, tp, max_diff(a.v, b.v));
    }

    // distance transform (exhaustive reference only feasible on small grids)
    {
        CartesianGrid g = make_grid(n_small, 0);
        Mask m(g);
        for (int k = 0; k < n_small; ++k)
            for (int j = 0; j < n_small; ++j)
                for (int i = 0; i < n_small; ++i) {
                    const Vec3 x = g.position(i, j, k);
                    m.at(i, j, k) = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] < 0.49 ? 1 : 0;
                }
        std::vector<double> a, b;
        const double ts = best_ms([&] { a = ref::distance_to_complement(m); });
        const double tp = best_ms([&] { b = distance_to_complement(m); });
        row("distance transform", n_small, ts, tp, max_diff(a, b));
    }

    // direct potential -----------------------------------------------------
    {
        CartesianGrid g = make_grid(n_small, 1);
        ScalarField rho(g);
        for (int k = 0; k < n_small; ++k)
            for (int j = 0; j < n_small; ++j)
                for (int i = 0; i < n_small; ++i) {
                    const Vec3 x = g.position(i, j, k);
                    rho.at(i, j, k) = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] < 0.25 ? 1.0 : 0.0;
                }
        PotentialSolution a, b;
        const double ts = best_ms([&] { a = ref::solve_potential_direct(rho); }, 1);
        const double tp = best_ms([&] { b = solve_potential_direct(rho); }, 1);
        row("direct potential", n_small, ts, tp, max_diff(a.phi.v, b.phi.v));
    }

    // reductions -------------------------------------------------------------
    {
        std::vector<double> v((long)n * n * n);
        std::mt19937_64 rng(17);
        for (auto& x : v)
            x = std::ldexp((double)rng(), -64) - 0.5;
        double a = 0.0, b = 0.0;
        const double ts = best_ms([&] { a = ref::sum(v); });
        const double tp =
            best_ms([&] { b = deterministic_sum((long)v.size(), [&](long i) { return v[i]; }); });
        row("sum reduction", n, ts, tp, std::fabs(a - b));

        double am = 0.0, bm = 0.0;
        const double ts2 = best_ms([&] { am = ref::max_abs(v); });
        const double tp2 = best_ms(
            [&] { bm = parallel_max((long)v.size(), [&](long i) { return std::fabs(v[i]); }); });
        row("max reduction", n, ts2, tp2, std::fabs(am - bm));
    }

    return 0;
}
