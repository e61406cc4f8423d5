#include "cloudlab/diagnostics.hpp"

#include "cloudlab/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace cloudlab {
namespace {

enum class Stencil { none, central, forward, backward };

struct RegionView {
    const CartesianGrid& g;
    const std::vector<std::uint8_t>& m;

    bool in(int i, int j, int k) const
    {
        if (i < 0 || j < 0 || k < 0 || i >= g.dims[0] || j >= g.dims[1] || k >= g.dims[2])
            return false;
        return m[g.idx_interior(i, j, k)] != 0;
    }
};

// Stencil selection for a derivative along `axis` at an in-region cell:
// central when both neighbors lie in the region, otherwise second-order
// one-sided toward whichever side has two in-region cells.
Stencil pick_stencil(const RegionView& r, int i, int j, int k, int axis)
{
    int ip[3] = {i, j, k};
    int im[3] = {i, j, k};
    ip[axis] += 1;
    im[axis] -= 1;
    const bool hp = r.in(ip[0], ip[1], ip[2]);
    const bool hm = r.in(im[0], im[1], im[2]);
    if (hp && hm)
        return Stencil::central;
    int ip2[3] = {i, j, k};
    ip2[axis] += 2;
    if (hp && r.in(ip2[0], ip2[1], ip2[2]))
        return Stencil::forward;
    int im2[3] = {i, j, k};
    im2[axis] -= 2;
    if (hm && r.in(im2[0], im2[1], im2[2]))
        return Stencil::backward;
    return Stencil::none;
}

// Applies the selected stencil to one extended-layout array.
double apply_stencil(Stencil st, const std::vector<double>& q, const CartesianGrid& g,
                     int i, int j, int k, int axis)
{
    const long c = g.idx(i, j, k);
    const long s = axis == 0 ? 1L : (axis == 1 ? (long)g.ext(0) : (long)g.ext(0) * g.ext(1));
    const double h = g.spacing[axis];
    switch (st) {
    case Stencil::central:
        return (q[c + s] - q[c - s]) / (2.0 * h);
    case Stencil::forward:
        return (-3.0 * q[c] + 4.0 * q[c + s] - q[c + 2 * s]) / (2.0 * h);
    case Stencil::backward:
        return (3.0 * q[c] - 4.0 * q[c - s] + q[c - 2 * s]) / (2.0 * h);
    default:
        return 0.0;
    }
}

double frob9(const std::array<std::vector<double>, 9>& t, long m)
{
    double s = 0.0;
    for (int e = 0; e < 9; ++e)
        s += t[e][m] * t[e][m];
    return s;
}

// Least-squares slope of log(max(y, 1e-30)) against t over the trailing
// `window` samples.
double trailing_log_slope(const std::vector<ContinuationSample>& samples,
                          const std::vector<double>& series, int window)
{
    const int n = (int)samples.size();
    const int b = n - window;
    long double st = 0.0L, sy = 0.0L, stt = 0.0L, sty = 0.0L;
    for (int i = b; i < n; ++i) {
        const long double t = samples[i].t;
        const long double y = std::log(std::max(series[i], 1e-30));
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    const long double m = window;
    const long double den = stt - st * st / m;
    if (!(den > 0.0L))
        return 0.0;
    return (double)((sty - st * sy / m) / den);
}

const char* kTermNames[kContinuationTerms] = {
    "strip |W|",          // 0
    "interior expansion", // 1
    "interior rotation",  // 2
    "support |grad alpha|", // 3
    "support |grad w|",   // 4
};

} // namespace

std::size_t VelocityGradient::n_valid() const
{
    std::size_t n = 0;
    for (auto e : valid)
        n += e != 0;
    return n;
}

std::pair<VelocityGradient, KinematicDecomposition> decompose(const VectorField& w,
                                                              const Mask& region)
{
    if (!(w.grid == region.grid))
        throw std::invalid_argument("decompose: field and region grids differ");
    const CartesianGrid& g = w.grid;
    const long n = g.ncell();

    VelocityGradient vg;
    vg.grid = g;
    for (auto& e : vg.W)
        e.assign(n, 0.0);
    vg.valid.assign(n, 0);

    KinematicDecomposition kd;
    kd.grid = g;
    for (auto& e : kd.theta_jk)
        e.assign(n, 0.0);
    for (auto& e : kd.omega_jk)
        e.assign(n, 0.0);
    kd.theta.assign(n, 0.0);
    kd.valid.assign(n, 0);

    const RegionView rv{g, region.m};
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                if (!rv.in(i, j, k))
                    continue;
                const long m = g.idx_interior(i, j, k);
                Stencil st[3];
                bool ok = true;
                for (int a = 0; a < 3; ++a) {
                    st[a] = pick_stencil(rv, i, j, k, a);
                    if (st[a] == Stencil::none)
                        ok = false;
                }
                if (!ok)
                    continue;
                double W[9];
                for (int a = 0; a < 3; ++a)
                    for (int c = 0; c < 3; ++c)
                        W[a * 3 + c] = apply_stencil(st[a], w.comp[c], g, i, j, k, a);
                for (int a = 0; a < 3; ++a) {
                    for (int c = 0; c < 3; ++c) {
                        vg.W[a * 3 + c][m] = W[a * 3 + c];
                        kd.theta_jk[a * 3 + c][m] = 0.5 * (W[a * 3 + c] + W[c * 3 + a]);
                        kd.omega_jk[a * 3 + c][m] = 0.5 * (W[c * 3 + a] - W[a * 3 + c]);
                    }
                }
                kd.theta[m] = W[0] + W[4] + W[8];
                vg.valid[m] = 1;
                kd.valid[m] = 1;
            }
        }
    }
    return {std::move(vg), std::move(kd)};
}

RegionGradient region_gradient(const ScalarField& f, const Mask& region)
{
    if (!(f.grid == region.grid))
        throw std::invalid_argument("region_gradient: field and region grids differ");
    const CartesianGrid& g = f.grid;
    const long n = g.ncell();

    RegionGradient rg;
    rg.grid = g;
    for (auto& e : rg.d)
        e.assign(n, 0.0);
    rg.valid.assign(n, 0);

    const RegionView rv{g, region.m};
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                if (!rv.in(i, j, k))
                    continue;
                const long m = g.idx_interior(i, j, k);
                double d[3];
                bool ok = true;
                for (int a = 0; a < 3; ++a) {
                    const Stencil st = pick_stencil(rv, i, j, k, a);
                    if (st == Stencil::none) {
                        ok = false;
                        break;
                    }
                    d[a] = apply_stencil(st, f.v, g, i, j, k, a);
                }
                if (!ok)
                    continue;
                for (int a = 0; a < 3; ++a)
                    rg.d[a][m] = d[a];
                rg.valid[m] = 1;
            }
        }
    }
    return rg;
}

const char* continuation_term_name(int term)
{
    if (term < 0 || term >= kContinuationTerms)
        throw std::out_of_range("continuation_term_name: term index out of range");
    return kTermNames[term];
}

KinematicCache kinematic_cache(const SystemState& state, const Mask& support)
{
    KinematicCache cache;
    auto wk = decompose(state.w, support);
    cache.grad_w = std::move(wk.first);
    cache.kin = std::move(wk.second);
    cache.grad_alpha = region_gradient(state.alpha, support);
    return cache;
}

void continuation_update(ContinuationRecord& record, const SystemState& state,
                         const RegionDecomposition& decomp, double dt,
                         const KinematicCache& cache)
{
    const CartesianGrid& g = state.alpha.grid;
    if (!(decomp.support.grid == g))
        throw std::invalid_argument("continuation_update: decomposition grid mismatch");
    const long n = g.ncell();
    if ((long)cache.grad_w.valid.size() != n || (long)cache.grad_alpha.valid.size() != n)
        throw std::invalid_argument("continuation_update: cache does not match the grid");

    const auto& sup_m = decomp.support.m;
    const auto& strip_m = decomp.strip.m;
    const auto& int_m = decomp.interior.m;

    const int nx = g.dims[0], ny = g.dims[1];
    const double w2 = parallel_max(n, [&](long m) {
        return (strip_m[m] && cache.grad_w.valid[m]) ? frob9(cache.grad_w.W, m) : 0.0;
    });
    const double th = parallel_max(n, [&](long m) {
        return (int_m[m] && cache.kin.valid[m]) ? std::fabs(cache.kin.theta[m]) : 0.0;
    });
    const double om2 = parallel_max(n, [&](long m) {
        return (int_m[m] && cache.kin.valid[m]) ? frob9(cache.kin.omega_jk, m) : 0.0;
    });
    const double ga2 = parallel_max(n, [&](long m) {
        if (!sup_m[m] || !cache.grad_alpha.valid[m])
            return 0.0;
        double s = 0.0;
        for (int a = 0; a < 3; ++a)
            s += cache.grad_alpha.d[a][m] * cache.grad_alpha.d[a][m];
        return s;
    });
    const double gw2 = parallel_max(n, [&](long m) {
        return (sup_m[m] && cache.grad_w.valid[m]) ? frob9(cache.grad_w.W, m) : 0.0;
    });
    const double amax = parallel_max(n, [&](long m) {
        if (!sup_m[m])
            return 0.0;
        const int i = (int)(m % nx);
        const int j = (int)((m / nx) % ny);
        const int k = (int)(m / ((long)nx * ny));
        return state.alpha.v[g.idx(i, j, k)];
    });

    ContinuationSample s;
    s.t = state.time;
    s.sup_w_strip = std::sqrt(w2);
    s.sup_theta_interior = th;
    s.sup_omega_interior = std::sqrt(om2);
    s.sup_grad_alpha = std::sqrt(ga2);
    s.sup_grad_w = std::sqrt(gw2);
    s.alpha_max = amax;

    std::array<double, kContinuationTerms> I{};
    if (record.samples.empty()) {
        record.epsilon = decomp.epsilon;
    } else {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("continuation_update: dt must be positive");
        const ContinuationSample& p = record.samples.back();
        const std::array<double, kContinuationTerms>& Ip = record.integrals.back();
        const double fp[kContinuationTerms] = {p.sup_w_strip, p.sup_theta_interior,
                                               p.sup_omega_interior, p.sup_grad_alpha,
                                               p.sup_grad_w};
        const double fn[kContinuationTerms] = {s.sup_w_strip, s.sup_theta_interior,
                                               s.sup_omega_interior, s.sup_grad_alpha,
                                               s.sup_grad_w};
        for (int t = 0; t < kContinuationTerms; ++t)
            I[t] = Ip[t] + 0.5 * dt * (fp[t] + fn[t]);
    }

    record.samples.push_back(s);
    record.integrals.push_back(I);
    record.weak_value = I[3] + I[4];
    record.strong_value = I[0] + I[1] + I[2] + I[3];
    record.weak_series.push_back(record.weak_value);
    record.strong_series.push_back(record.strong_value);
}

void continuation_update(ContinuationRecord& record, const SystemState& state,
                         const RegionDecomposition& decomp, double dt)
{
    const KinematicCache cache = kinematic_cache(state, decomp.support);
    continuation_update(record, state, decomp, dt, cache);
}

const char* blowup_verdict_name(BlowupVerdict v)
{
    switch (v) {
    case BlowupVerdict::none:
        return "none";
    case BlowupVerdict::weak_divergence:
        return "weak-divergence";
    default:
        return "strong-divergence";
    }
}

BlowupClassification blowup_classify(const ContinuationRecord& record,
                                     const BlowupThresholds& thresholds, int window)
{
    if (!(thresholds.weak > 0.0) || !(thresholds.strong > 0.0) ||
        !(thresholds.growth_rate > 0.0))
        throw std::invalid_argument("blowup_classify: thresholds must be positive");
    if (window < 2)
        throw std::invalid_argument("blowup_classify: window must be at least 2");

    BlowupClassification out;
    const int n = (int)record.samples.size();
    if (n < window)
        return out;

    // per-term integral series for culprit identification
    auto term_slope = [&](int term) {
        std::vector<double> series(n);
        for (int i = 0; i < n; ++i)
            series[i] = record.integrals[i][term];
        return trailing_log_slope(record.samples, series, window);
    };
    auto fastest = [&](const int* terms, int count) {
        int best = terms[0];
        double best_rate = term_slope(terms[0]);
        for (int t = 1; t < count; ++t) {
            const double r = term_slope(terms[t]);
            if (r > best_rate) {
                best_rate = r;
                best = terms[t];
            }
        }
        return best;
    };

    const double strong_rate = trailing_log_slope(record.samples, record.strong_series, window);
    if (record.strong_value > thresholds.strong && strong_rate > thresholds.growth_rate) {
        out.verdict = BlowupVerdict::strong_divergence;
        out.growth_exponent = strong_rate;
        static const int strong_terms[4] = {0, 1, 2, 3};
        out.culprit = kTermNames[fastest(strong_terms, 4)];
        return out;
    }
    if (record.weak_value > thresholds.weak) {
        out.verdict = BlowupVerdict::weak_divergence;
        out.growth_exponent = trailing_log_slope(record.samples, record.weak_series, window);
        static const int weak_terms[2] = {4, 3};
        out.culprit = kTermNames[fastest(weak_terms, 2)];
        return out;
    }
    out.growth_exponent = strong_rate;
    return out;
}

std::pair<ScalarField, double> relative_entropy(const SystemState& s1, const SystemState& s2)
{
    if (!(s1.alpha.grid == s2.alpha.grid))
        throw std::invalid_argument("relative_entropy: grids differ");
    if (s1.eos.K != s2.eos.K || s1.eos.gamma != s2.eos.gamma ||
        s1.eos.regularity_case != s2.eos.regularity_case)
        throw std::invalid_argument("relative_entropy: equations of state differ");

    const CartesianGrid& g = s1.alpha.grid;
    const EquationOfState& eos = s1.eos;
    const double gam = eos.gamma;
    const double gm1 = gam - 1.0;
    const double inv_c = 1.0 / eos.alpha_coeff();
    const double e_ar = 2.0 / gm1;

    ScalarField eta(g);
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    int bad = 0;

#pragma omp parallel for collapse(2) schedule(static) reduction(| : bad)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const long c = g.idx(i, j, k);
                const double a1 = s1.alpha.v[c];
                const double a2 = s2.alpha.v[c];
                const double r1 = a1 > 0.0 ? std::pow(a1 * inv_c, e_ar) : 0.0;
                const double r2 = a2 > 0.0 ? std::pow(a2 * inv_c, e_ar) : 0.0;
                const double r1g = r1 > 0.0 ? std::pow(r1, gam) : 0.0;
                const double r2g = r2 > 0.0 ? std::pow(r2, gam) : 0.0;
                const double r1gm1 = r1 > 0.0 ? std::pow(r1, gm1) : 0.0;
                double dw2 = 0.0;
                for (int m = 0; m < 3; ++m) {
                    const double d = s2.w.comp[m][c] - s1.w.comp[m][c];
                    dw2 += d * d;
                }
                const double dens = (r2g - r1g - gam * r1gm1 * (r2 - r1)) / gm1;
                const double kin = 0.5 * r2 * dw2;
                double v = dens + kin;
                if (v < 0.0) {
                    const double scale = (r2g + r1g + gam * r1gm1 * std::fabs(r2 - r1)) / gm1;
                    if (v >= -1e-10 * (scale + kin) - 1e-300)
                        v = 0.0;
                    else
                        bad = 1;
                }
                eta.v[c] = v;
            }
        }
    }
    if (bad)
        throw std::logic_error("relative_entropy: negative value beyond roundoff");

    const double V = g.cell_volume();
    const double total = V * deterministic_sum(g.ncell(), [&](long m) {
        const int i = (int)(m % nx);
        const int j = (int)((m / nx) % ny);
        const int k = (int)(m / ((long)nx * ny));
        return eta.v[g.idx(i, j, k)];
    });
    return {std::move(eta), total};
}

DiffuseResidual diffuse_residual(const SystemState& state, const RegionDecomposition& decomp)
{
    const CartesianGrid& g = state.alpha.grid;
    if (!(decomp.support.grid == g))
        throw std::invalid_argument("diffuse_residual: decomposition grid mismatch");
    if (decomp.strip.count() == 0)
        throw std::invalid_argument("diffuse_residual: strip is empty");

    const EquationOfState& eos = state.eos;
    const double gm1 = eos.gamma - 1.0;
    const double coef = gm1 * gm1 / (2.0 * eos.K * eos.gamma);

    const RegionGradient ga = region_gradient(state.alpha, decomp.support);
    const long n = g.ncell();
    const int nx = g.dims[0], ny = g.dims[1];
    const auto& strip_m = decomp.strip.m;

    auto residual_at = [&](long m) {
        if (!strip_m[m] || !ga.valid[m])
            return 0.0;
        const int i = (int)(m % nx);
        const int j = (int)((m / nx) % ny);
        const int k = (int)(m / ((long)nx * ny));
        const double a = std::max(state.alpha.v[g.idx(i, j, k)], 0.0);
        double s = 0.0;
        for (int ax = 0; ax < 3; ++ax)
            s += ga.d[ax][m] * ga.d[ax][m];
        return coef * a * std::sqrt(s);
    };

    DiffuseResidual out;
    out.sup = parallel_max(n, residual_at);

    // profile: sup of the residual binned by distance to the support boundary
    const std::vector<double> dist = distance_to_complement(decomp.support);
    const double hb = std::min({g.spacing[0], g.spacing[1], g.spacing[2]});
    const int nb = std::max(1, (int)std::ceil(decomp.epsilon / hb - 1e-12));
    out.bin_distance.resize(nb);
    out.bin_sup.assign(nb, 0.0);
    for (int b = 0; b < nb; ++b)
        out.bin_distance[b] = (b + 0.5) * hb;
    for (long m = 0; m < n; ++m) {
        if (!strip_m[m])
            continue;
        const double r = residual_at(m);
        // dist measures center-to-center separation; the support boundary
        // sits half a cell beyond the outermost support center
        int b = (int)((dist[m] - 0.5 * hb) / hb);
        if (b < 0)
            b = 0;
        if (b >= nb)
            b = nb - 1;
        if (r > out.bin_sup[b])
            out.bin_sup[b] = r;
    }
    return out;
}

ConservationRecord conservation(const SystemState& state, const ScalarField* phi)
{
    const CartesianGrid& g = state.alpha.grid;
    if (phi && !(phi->grid == g))
        throw std::invalid_argument("conservation: potential grid mismatch");

    const EquationOfState& eos = state.eos;
    const double gam = eos.gamma;
    const double gm1 = gam - 1.0;
    const double inv_c = 1.0 / eos.alpha_coeff();
    const double e_ar = 2.0 / gm1;
    const double K = eos.K;

    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const long n = g.ncell();
    std::vector<double> rho(n, 0.0);

#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double a = state.alpha.v[g.idx(i, j, k)];
                rho[g.idx_interior(i, j, k)] = a > 0.0 ? std::pow(a * inv_c, e_ar) : 0.0;
            }

    auto ext_of = [&](long m) {
        const int i = (int)(m % nx);
        const int j = (int)((m / nx) % ny);
        const int k = (int)(m / ((long)nx * ny));
        return g.idx(i, j, k);
    };

    ConservationRecord rec;
    const double V = g.cell_volume();
    rec.mass = V * deterministic_sum(n, [&](long m) { return rho[m]; });
    for (int c = 0; c < 3; ++c)
        rec.momentum[c] = V * deterministic_sum(n, [&](long m) {
            return rho[m] * state.w.comp[c][ext_of(m)];
        });
    rec.energy = V * deterministic_sum(n, [&](long m) {
        const long c = ext_of(m);
        double w2 = 0.0;
        for (int a = 0; a < 3; ++a)
            w2 += state.w.comp[a][c] * state.w.comp[a][c];
        const double p = rho[m] > 0.0 ? K * std::pow(rho[m], gam) : 0.0;
        return 0.5 * rho[m] * w2 + p / gm1;
    });
    if (phi)
        rec.energy += 0.5 * V * deterministic_sum(n, [&](long m) {
            return rho[m] * phi->v[ext_of(m)];
        });
    return rec;
}

namespace {

// compact central-difference stencils; coefficient index = offset + 2
struct CompactStencil {
    int reach;
    double c[5];
};

const CompactStencil kCompact[5] = {
    {0, {0.0, 0.0, 1.0, 0.0, 0.0}},
    {1, {0.0, -0.5, 0.0, 0.5, 0.0}},
    {1, {0.0, 1.0, -2.0, 1.0, 0.0}},
    {2, {-0.5, 1.0, 0.0, -1.0, 0.5}},
    {2, {1.0, -4.0, 6.0, -4.0, 1.0}},
};

std::vector<double> apply_compact(const std::vector<double>& in, const CartesianGrid& g,
                                  int axis, int order)
{
    const CompactStencil& st = kCompact[order];
    const int ex = g.ext(0), ey = g.ext(1), ez = g.ext(2);
    const long stride = axis == 0 ? 1L : (axis == 1 ? (long)ex : (long)ex * ey);
    const int ea = axis == 0 ? ex : (axis == 1 ? ey : ez);
    const double scale = 1.0 / std::pow(g.spacing[axis], order);

    std::vector<double> out(in.size(), 0.0);
#pragma omp parallel for collapse(2) schedule(static)
    for (int kk = 0; kk < ez; ++kk) {
        for (int jj = 0; jj < ey; ++jj) {
            const long row = ((long)kk * ey + jj) * ex;
            for (int ii = 0; ii < ex; ++ii) {
                const int pa = axis == 0 ? ii : (axis == 1 ? jj : kk);
                if (pa - st.reach < 0 || pa + st.reach >= ea)
                    continue;
                const long c = row + ii;
                double s = 0.0;
                for (int o = -st.reach; o <= st.reach; ++o)
                    s += st.c[o + 2] * in[c + o * stride];
                out[c] = s * scale;
            }
        }
    }
    return out;
}

} // namespace

double discrete_sobolev(const SystemState& state, int order, double floor)
{
    if (order < 1 || order > 4)
        throw std::invalid_argument("discrete_sobolev: order must lie in 1..4");
    if (floor < 0.0)
        throw std::invalid_argument("discrete_sobolev: floor must be non-negative");

    const CartesianGrid& src = state.alpha.grid;
    const CartesianGrid g(src.dims, src.spacing, src.origin, 2);
    ScalarField a(g);
    VectorField w(g);
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                a.at(i, j, k) = state.alpha.at(i, j, k);
                for (int c = 0; c < 3; ++c)
                    w.at(c, i, j, k) = state.w.at(c, i, j, k);
            }
    const bool periodic = state.boundary == BoundaryMode::periodic;
    fill_ghosts(a, periodic ? GhostPolicy::periodic : GhostPolicy::zero);
    fill_ghosts(w, periodic ? GhostPolicy::periodic : GhostPolicy::extrapolate);

    std::vector<std::uint8_t> support(g.ncell(), 0);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                support[g.idx_interior(i, j, k)] = a.at(i, j, k) > floor ? 1 : 0;

    auto support_square_sum = [&](const std::vector<double>& arr) {
        return deterministic_sum(g.ncell(), [&](long m) {
            if (!support[m])
                return 0.0;
            const int i = (int)(m % nx);
            const int j = (int)((m / nx) % ny);
            const int k = (int)(m / ((long)nx * ny));
            const double v = arr[g.idx(i, j, k)];
            return v * v;
        });
    };

    const std::vector<double>* comps[4] = {&a.v, &w.comp[0], &w.comp[1], &w.comp[2]};
    double total = 0.0;
    for (const auto* base : comps) {
        for (int bx = 0; bx <= order; ++bx) {
            for (int by = 0; by + bx <= order; ++by) {
                for (int bz = 0; bz + by + bx <= order; ++bz) {
                    std::vector<double> arr = *base;
                    if (bx > 0)
                        arr = apply_compact(arr, g, 0, bx);
                    if (by > 0)
                        arr = apply_compact(arr, g, 1, by);
                    if (bz > 0)
                        arr = apply_compact(arr, g, 2, bz);
                    total += support_square_sum(arr);
                }
            }
        }
    }
    return std::sqrt(total * g.cell_volume());
}

ProportionalFit fit_apriori(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("fit_apriori: series must be non-empty and equal length");
    const std::size_t n = x.size();
    double sxx = 0.0, sxy = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        sy += y[i];
    }
    ProportionalFit fit;
    fit.C = sxx > 0.0 ? sxy / sxx : 0.0;
    const double ybar = sy / (double)n;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.C * x[i];
        ss_res += r * r;
        const double d = y[i] - ybar;
        ss_tot += d * d;
    }
    fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return fit;
}

} // namespace cloudlab
