#include "cloudlab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cloudlab {

namespace {

struct TriWeights {
    long c[8];
    double w[8];
};

TriWeights tri_weights(const CartesianGrid& g, const Vec3& p)
{
    if (g.ghost < 1)
        throw std::invalid_argument("interp: grid must carry at least one ghost layer");
    if (!g.contains(p))
        throw std::domain_error("interp: position outside the box");
    int base[3];
    double fr[3];
    for (int a = 0; a < 3; ++a) {
        const double s = (p[a] - g.origin[a]) / g.spacing[a];
        const double fl = std::floor(s);
        base[a] = (int)fl;
        fr[a] = s - fl;
    }
    TriWeights t;
    int n = 0;
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                t.c[n] = g.idx(base[0] + di, base[1] + dj, base[2] + dk);
                t.w[n] = (di ? fr[0] : 1.0 - fr[0]) * (dj ? fr[1] : 1.0 - fr[1]) *
                         (dk ? fr[2] : 1.0 - fr[2]);
                ++n;
            }
    return t;
}

} // namespace

double interp_scalar(const ScalarField& f, const Vec3& p)
{
    if (!f.ghost_ok)
        throw std::logic_error("interp: ghost halo not filled");
    const TriWeights t = tri_weights(f.grid, p);
    double s = 0.0;
    for (int n = 0; n < 8; ++n)
        s += t.w[n] * f.v[t.c[n]];
    return s;
}

Vec3 interp_vector(const VectorField& f, const Vec3& p)
{
    if (!f.ghost_ok)
        throw std::logic_error("interp: ghost halo not filled");
    const TriWeights t = tri_weights(f.grid, p);
    Vec3 out{0.0, 0.0, 0.0};
    for (int m = 0; m < 3; ++m)
        for (int n = 0; n < 8; ++n)
            out[m] += t.w[n] * f.comp[m][t.c[n]];
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
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
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

void Marker::push_history(double t, const Vec3& w)
{
    if (nhist < kHist) {
        t_hist[nhist] = t;
        w_hist[nhist] = w;
        ++nhist;
    } else {
        for (int i = 0; i + 1 < kHist; ++i) {
            t_hist[i] = t_hist[i + 1];
            w_hist[i] = w_hist[i + 1];
        }
        t_hist[kHist - 1] = t;
        w_hist[kHist - 1] = w;
    }
}

namespace {

double halton(long i, int b)
{
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= b;
        r += f * (i % b);
        i /= b;
    }
    return r;
}

Vec3 dist3(const Vec3& a, const Vec3& b)
{
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Marker make_marker(long label, MarkerKind kind, const Vec3& p, const SystemState& state)
{
    Marker mk;
    mk.label = label;
    mk.kind = kind;
    mk.xi = p;
    mk.x = p;
    mk.alpha0 = interp_scalar(state.alpha, p);
    if (mk.alpha0 < 0.0)
        mk.alpha0 = 0.0;
    mk.rho0 = state.eos.makino_to_density(mk.alpha0);
    mk.push_history(state.time, interp_vector(state.w, p));
    return mk;
}

} // namespace

MarkerSet seed_markers(const SystemState& state, double floor, const MarkerSeedParams& params)
{
    if (params.n_boundary < 0 || params.n_interior < 0)
        throw std::invalid_argument("seed_markers: marker counts must be non-negative");
    if (!state.alpha.ghost_ok || !state.w.ghost_ok)
        throw std::logic_error("seed_markers: ghost halo not filled");
    const CartesianGrid& g = state.alpha.grid;

    const Mask sup = support_mask(state.alpha, floor);
    if (sup.count() == 0)
        throw std::runtime_error("seed_markers: the support is empty");

    MarkerSet ms;
    ms.time = state.time;
    long label = 0;

    if (params.n_boundary > 0) {
        const Mask shell = boundary_shell(sup);
        std::vector<Vec3> pts;
        for (int ck = 0; ck < g.dims[2]; ++ck)
            for (int cj = 0; cj < g.dims[1]; ++cj)
                for (int ci = 0; ci < g.dims[0]; ++ci)
                    if (shell.at(ci, cj, ck))
                        pts.push_back(g.position(ci, cj, ck));
        if (pts.empty())
            throw std::runtime_error("seed_markers: the support has no boundary shell");

        const std::size_t want = std::min<std::size_t>(params.n_boundary, pts.size());
        std::vector<std::size_t> chosen;
        chosen.reserve(want);
        std::vector<double> dmin(pts.size(), std::numeric_limits<double>::infinity());
        std::size_t cur = (std::size_t)(params.seed % pts.size());
        chosen.push_back(cur);
        while (chosen.size() < want) {
            for (std::size_t i = 0; i < pts.size(); ++i)
                dmin[i] = std::min(dmin[i], norm3(dist3(pts[i], pts[cur])));
            std::size_t best = 0;
            double bestd = -1.0;
            for (std::size_t i = 0; i < pts.size(); ++i)
                if (dmin[i] > bestd) {
                    bestd = dmin[i];
                    best = i;
                }
            chosen.push_back(best);
            cur = best;
        }
        for (std::size_t i : chosen)
            ms.markers.push_back(make_marker(label++, MarkerKind::boundary, pts[i], state));
    }

    if (params.n_interior > 0) {
        // bounding box of the support, in cell-center coordinates
        Vec3 lo{0, 0, 0}, hi{0, 0, 0};
        bool first = true;
        for (int ck = 0; ck < g.dims[2]; ++ck)
            for (int cj = 0; cj < g.dims[1]; ++cj)
                for (int ci = 0; ci < g.dims[0]; ++ci)
                    if (sup.at(ci, cj, ck)) {
                        const Vec3 p = g.position(ci, cj, ck);
                        if (first) {
                            lo = hi = p;
                            first = false;
                        } else {
                            for (int a = 0; a < 3; ++a) {
                                lo[a] = std::min(lo[a], p[a]);
                                hi[a] = std::max(hi[a], p[a]);
                            }
                        }
                    }
        int accepted = 0;
        long attempts = 0;
        const long max_attempts = 10000L * (params.n_interior + 1);
        long hidx = 1 + (long)(params.seed % 9973UL);
        const int bases[3] = {2, 3, 5};
        while (accepted < params.n_interior) {
            if (++attempts > max_attempts)
                throw std::runtime_error("seed_markers: interior acceptance starved");
            Vec3 p;
            for (int a = 0; a < 3; ++a)
                p[a] = lo[a] + halton(hidx, bases[a]) * (hi[a] - lo[a]);
            ++hidx;
            int ci[3];
            bool ok = true;
            for (int a = 0; a < 3; ++a) {
                ci[a] = (int)std::llround((p[a] - g.origin[a]) / g.spacing[a]);
                if (ci[a] < 0 || ci[a] >= g.dims[a])
                    ok = false;
            }
            if (!ok || !sup.at(ci[0], ci[1], ci[2]))
                continue;
            ms.markers.push_back(make_marker(label++, MarkerKind::interior, p, state));
            ++accepted;
        }
    }
    return ms;
}

void advance_markers(MarkerSet& ms, const FlowFrame& f0, const FlowFrame& f1)
{
    if (!f0.w || !f0.divw || !f1.w || !f1.divw)
        throw std::invalid_argument("advance_markers: null frame field");
    if (!(f0.w->grid == f1.w->grid))
        throw std::invalid_argument("advance_markers: frames live on different grids");
    const double dt = f1.t - f0.t;
    if (dt < 0.0)
        throw std::invalid_argument("advance_markers: frames out of order");
    if (dt == 0.0) {
        ms.time = f1.t;
        return;
    }

    auto vel = [&](const Vec3& x, double theta) {
        const Vec3 v0 = interp_vector(*f0.w, x);
        const Vec3 v1 = interp_vector(*f1.w, x);
        return Vec3{(1.0 - theta) * v0[0] + theta * v1[0], (1.0 - theta) * v0[1] + theta * v1[1],
                    (1.0 - theta) * v0[2] + theta * v1[2]};
    };
    auto fma3 = [](const Vec3& x, double c, const Vec3& d) {
        return Vec3{x[0] + c * d[0], x[1] + c * d[1], x[2] + c * d[2]};
    };

    for (Marker& mk : ms.markers) {
        if (!mk.alive)
            continue;
        try {
            const Vec3 k1 = vel(mk.x, 0.0);
            const Vec3 k2 = vel(fma3(mk.x, 0.5 * dt, k1), 0.5);
            const Vec3 k3 = vel(fma3(mk.x, 0.5 * dt, k2), 0.5);
            const Vec3 k4 = vel(fma3(mk.x, dt, k3), 1.0);
            Vec3 xn;
            for (int a = 0; a < 3; ++a)
                xn[a] = mk.x[a] + dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            if (!f1.w->grid.contains(xn)) {
                mk.alive = false;
                continue;
            }
            const double d0 = interp_scalar(*f0.divw, mk.x);
            const double d1 = interp_scalar(*f1.divw, xn);
            mk.int_divw += 0.5 * dt * (d0 + d1);
            mk.x = xn;
            mk.push_history(f1.t, interp_vector(*f1.w, xn));
        } catch (const std::domain_error&) {
            mk.alive = false; // an evaluation point left the box
        }
    }
    ms.time = f1.t;
}

TransportPrediction transported_density(const Marker& mk, const EquationOfState& eos)
{
    TransportPrediction p;
    p.alpha = mk.alpha0 * std::exp(-0.5 * (eos.gamma - 1.0) * mk.int_divw);
    p.rho = mk.rho0 * std::exp(-mk.int_divw);
    return p;
}

Vec3 marker_acceleration(const Marker& mk)
{
    if (mk.nhist < 3)
        throw std::logic_error("marker_acceleration: need at least three history samples");
    const double t0 = mk.t_hist[0], t1 = mk.t_hist[1], t2 = mk.t_hist[2];
    if (!(t0 < t1 && t1 < t2))
        throw std::logic_error("marker_acceleration: history times must increase");
    const double c0 = (t2 - t1) / ((t0 - t1) * (t0 - t2));
    const double c1 = (t2 - t0) / ((t1 - t0) * (t1 - t2));
    const double c2 = (2.0 * t2 - t0 - t1) / ((t2 - t0) * (t2 - t1));
    Vec3 a;
    for (int m = 0; m < 3; ++m)
        a[m] = c0 * mk.w_hist[0][m] + c1 * mk.w_hist[1][m] + c2 * mk.w_hist[2][m];
    return a;
}

double freefall_residual(const Marker& mk, const PotentialSolution& pot)
{
    const Vec3 a = marker_acceleration(mk);
    const Vec3 gr = interp_vector(pot.g, mk.x);
    return norm3({a[0] - gr[0], a[1] - gr[1], a[2] - gr[2]});
}

FreefallSummary freefall_summary(const MarkerSet& ms, const PotentialSolution& pot)
{
    FreefallSummary out;
    double sum = 0.0;
    for (const Marker& mk : ms.markers) {
        if (!mk.alive || mk.kind != MarkerKind::boundary || mk.nhist < 3)
            continue;
        const double r = freefall_residual(mk, pot);
        out.max_residual = std::max(out.max_residual, r);
        sum += r;
        ++out.n;
    }
    if (out.n > 0)
        out.mean_residual = sum / out.n;
    return out;
}

SupportMarkerDistance support_vs_markers(const MarkerSet& ms, const Mask& support)
{
    const CartesianGrid& g = support.grid;
    std::vector<Vec3> shell_pts;
    const Mask shell = boundary_shell(support);
    for (int ck = 0; ck < g.dims[2]; ++ck)
        for (int cj = 0; cj < g.dims[1]; ++cj)
            for (int ci = 0; ci < g.dims[0]; ++ci)
                if (shell.at(ci, cj, ck))
                    shell_pts.push_back(g.position(ci, cj, ck));
    std::vector<Vec3> mk_pts;
    for (const Marker& mk : ms.markers)
        if (mk.alive && mk.kind == MarkerKind::boundary)
            mk_pts.push_back(mk.x);
    if (shell_pts.empty())
        throw std::runtime_error("support_vs_markers: the support has no boundary shell");
    if (mk_pts.empty())
        throw std::runtime_error("support_vs_markers: no live boundary markers");

    auto one_sided = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double worst = 0.0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to)
                best = std::min(best, norm3(dist3(p, q)));
            worst = std::max(worst, best);
        }
        return worst;
    };
    SupportMarkerDistance d;
    d.marker_to_shell = one_sided(mk_pts, shell_pts);
    d.shell_to_marker = one_sided(shell_pts, mk_pts);
    return d;
}

} // namespace cloudlab
