#include "cloudlab/hyper.hpp"

#include "cloudlab/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

namespace cloudlab {

namespace {

std::string fmt_g(double x)
{
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", x);
    return b;
}

GhostPolicy scalar_policy(BoundaryMode bc)
{
    return bc == BoundaryMode::periodic ? GhostPolicy::periodic : GhostPolicy::zero;
}

GhostPolicy vector_policy(BoundaryMode bc)
{
    return bc == BoundaryMode::periodic ? GhostPolicy::periodic : GhostPolicy::extrapolate;
}

// characteristic sound speed and alpha^2 over the full extended array; `q` is
// alpha itself or the density, depending on which form the caller advances
void thermo_tables(const CartesianGrid& g, const std::vector<double>& q, bool q_is_alpha,
                   const EquationOfState& eos, std::vector<double>& cs, std::vector<double>& a2)
{
    const long n = g.ncell_ext();
    cs.assign(n, 0.0);
    a2.assign(n, 0.0);
    const double gm1 = eos.gamma - 1.0;
    const double coef = eos.alpha_coeff();
    const double e_ra = 0.5 * gm1;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < n; ++i) {
        double a;
        if (q_is_alpha) {
            a = q[i] > 0.0 ? q[i] : 0.0;
            a2[i] = q[i] * q[i];
        } else {
            const double rr = q[i] > 0.0 ? q[i] : 0.0;
            a = coef * std::pow(rr, e_ra);
            a2[i] = a * a;
        }
        cs[i] = 0.5 * gm1 * a;
    }
}

// One face of the continuity flux.  Both the low-order (upwind) and
// high-order (central + fourth-difference dissipation) values are produced;
// faces bordering vacuum collapse to pure upwind so no dissipative mass is
// pumped into empty cells.
inline void mass_face_flux(const double* qq, const double* wa, const std::vector<double>& cs,
                           long c, long sa, double& flo, double& fhi)
{
    const long cp = c + sa;
    if (qq[c] <= 0.0 || qq[cp] <= 0.0) {
        const double wf = 0.5 * (wa[c] + wa[cp]);
        const double qup = wf > 0.0 ? qq[c] : qq[cp];
        flo = qup > 0.0 ? qup * wf : 0.0;
        fhi = flo;
        return;
    }
    const double wf = 0.5 * (wa[c] + wa[cp]);
    flo = wf > 0.0 ? qq[c] * wf : qq[cp] * wf;
    const double lam = std::max(std::fabs(wa[c]) + cs[c], std::fabs(wa[cp]) + cs[cp]);
    fhi = 0.5 * (qq[c] * wa[c] + qq[cp] * wa[cp]) +
          0.125 * lam * (qq[c + 2 * sa] - 3.0 * qq[cp] + 3.0 * qq[c] - qq[c - sa]);
}

// Positivity-limited continuity rate: the antidiffusive part of the
// high-order face flux is scaled per face so a forward-Euler step of size dt
// cannot drive any cell density negative.  Wherever the limiter is inactive
// the rate equals the plain high-order rate bit for bit.
void fct_mass_rate(const ScalarField& q, const VectorField& w, const std::vector<double>& cs,
                   double dt, GhostPolicy qpol, std::vector<double>& rate)
{
    const CartesianGrid& g = q.grid;
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const long s[3] = {1, (long)g.ext(0), (long)g.ext(0) * g.ext(1)};
    const long next = g.ncell_ext();

    // face fluxes indexed by the cell on the face's low side
    std::array<std::vector<double>, 3> flo, fhi;
    for (int a = 0; a < 3; ++a) {
        flo[a].assign(next, 0.0);
        fhi[a].assign(next, 0.0);
    }

    for (int a = 0; a < 3; ++a) {
        const double* wa = w.comp[a].data();
        const double* qq = q.v.data();
        const long sa = s[a];
        // left-side cell runs one layer into the low ghost along this axis
        const int lo_a = -1;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
        for (int ck = 0; ck < nz; ++ck)
            for (int cj = 0; cj < ny; ++cj)
                for (int ci = 0; ci < nx; ++ci) {
                    long c = g.idx(ci, cj, ck);
                    if ((a == 0 && ci == 0) || (a == 1 && cj == 0) || (a == 2 && ck == 0)) {
                        const long cl = c + (long)lo_a * sa;
                        mass_face_flux(qq, wa, cs, cl, sa, flo[a][cl], fhi[a][cl]);
                    }
                    mass_face_flux(qq, wa, cs, c, sa, flo[a][c], fhi[a][c]);
                }
    }

    // limiter factor per cell: fraction of the antidiffusive outflow the cell
    // can afford after the guaranteed-positive low-order update
    ScalarField R(g);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int ck = 0; ck < nz; ++ck)
        for (int cj = 0; cj < ny; ++cj)
            for (int ci = 0; ci < nx; ++ci) {
                const long c = g.idx(ci, cj, ck);
                double qlow = q.v[c];
                double outflow = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const long cm = c - s[a];
                    const double inv_h = 1.0 / g.spacing[a];
                    qlow -= dt * (flo[a][c] - flo[a][cm]) * inv_h;
                    const double ah = fhi[a][c] - flo[a][c];
                    const double al = fhi[a][cm] - flo[a][cm];
                    outflow += (std::max(ah, 0.0) - std::min(al, 0.0)) * inv_h;
                }
                R.v[c] = outflow > 0.0
                             ? std::min(1.0, std::max(qlow, 0.0) / (dt * outflow))
                             : 1.0;
            }
    fill_ghosts(R, qpol);

    rate.assign(next, 0.0);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int ck = 0; ck < nz; ++ck)
        for (int cj = 0; cj < ny; ++cj)
            for (int ci = 0; ci < nx; ++ci) {
                const long c = g.idx(ci, cj, ck);
                double acc = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const long cm = c - s[a];
                    const double inv_h = 1.0 / g.spacing[a];
                    const double ah = fhi[a][c] - flo[a][c];
                    const double al = fhi[a][cm] - flo[a][cm];
                    const double th = ah > 0.0 ? R.v[c] : R.v[c + s[a]];
                    const double tl = al > 0.0 ? R.v[cm] : R.v[c];
                    const double Fh = th < 1.0 ? flo[a][c] + th * ah : fhi[a][c];
                    const double Fl = tl < 1.0 ? flo[a][cm] + tl * al : fhi[a][cm];
                    acc -= (Fh - Fl) * inv_h;
                }
                rate[c] = acc;
            }
}

// Shared semi-discrete operator.  The continuity variable `q` is advanced in
// flux form: central face flux 0.5(q_L w_L + q_R w_R) plus a fourth-difference
// face dissipation scaled by the larger adjacent characteristic speed
// |w^a| + c_s; with fct_dt > 0 the dissipative part is positivity-limited for
// a forward-Euler step of that size.  In alpha form the non-conservative part
// of the alpha equation is restored through the (3-gamma)/2 alpha div w
// source.  The velocity update is advective with the same face dissipation,
// the alpha^2/4 pressure coupling, and gravity.
void derivative_impl(const ScalarField& q, const VectorField& w, const EquationOfState& eos,
                     bool alpha_form, const VectorField* gvec, const SourceTerm* src,
                     double t_stage, ScalarField& dq, VectorField& dw, double fct_dt = 0.0,
                     GhostPolicy qpol = GhostPolicy::zero)
{
    const CartesianGrid& g = q.grid;
    if (g.ghost < 2)
        throw std::invalid_argument("derivative: grid must carry at least two ghost layers");
    if (!(q.grid == w.grid))
        throw std::invalid_argument("derivative: alpha and w live on different grids");
    if (gvec && !(gvec->grid == g))
        throw std::invalid_argument("derivative: gravity field lives on a different grid");
    if (!q.ghost_ok || !w.ghost_ok)
        throw std::logic_error("derivative: ghost halo not filled");

    std::vector<double> cs, a2;
    thermo_tables(g, q.v, alpha_form, eos, cs, a2);

    dq = ScalarField(g);
    dw = VectorField(g);

    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const long s[3] = {1, (long)g.ext(0), (long)g.ext(0) * g.ext(1)};
    const double gm1 = eos.gamma - 1.0;
    const double alpha_src_coef = 0.5 * (3.0 - eos.gamma);

    std::vector<double> limited_rate;
    if (fct_dt > 0.0)
        fct_mass_rate(q, w, cs, fct_dt, qpol, limited_rate);
    const bool have_fct = fct_dt > 0.0;

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int ck = 0; ck < nz; ++ck) {
        for (int cj = 0; cj < ny; ++cj) {
            for (int ci = 0; ci < nx; ++ci) {
                const long c = g.idx(ci, cj, ck);
                double dql = 0.0;
                double dwl[3] = {0.0, 0.0, 0.0};
                double divw = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const long sa = s[a];
                    const double inv_h = 1.0 / g.spacing[a];
                    const double* wa = w.comp[a].data();
                    const double* qq = q.v.data();
                    const long cm2 = c - 2 * sa, cm = c - sa, cp = c + sa, cp2 = c + 2 * sa;

                    const double lam_h =
                        std::max(std::fabs(wa[c]) + cs[c], std::fabs(wa[cp]) + cs[cp]);
                    const double lam_l =
                        std::max(std::fabs(wa[cm]) + cs[cm], std::fabs(wa[c]) + cs[c]);

                    if (!have_fct) {
                        double flo_h, fhi_h, flo_l, fhi_l;
                        mass_face_flux(qq, wa, cs, c, sa, flo_h, fhi_h);
                        mass_face_flux(qq, wa, cs, cm, sa, flo_l, fhi_l);
                        dql -= (fhi_h - fhi_l) * inv_h;
                    }

                    for (int m = 0; m < 3; ++m) {
                        const double* wm = w.comp[m].data();
                        const double Dh =
                            0.125 * lam_h * (wm[cp2] - 3.0 * wm[cp] + 3.0 * wm[c] - wm[cm]);
                        const double Dl =
                            0.125 * lam_l * (wm[cp] - 3.0 * wm[c] + 3.0 * wm[cm] - wm[cm2]);
                        const double adv = wa[c] * 0.5 * (wm[cp] - wm[cm]);
                        dwl[m] -= (adv + (Dh - Dl)) * inv_h;
                    }
                    dwl[a] -= 0.125 * gm1 * (a2[cp] - a2[cm]) * inv_h;
                    if (alpha_form)
                        divw += 0.5 * (wa[cp] - wa[cm]) * inv_h;
                }
                if (have_fct)
                    dql += limited_rate[c];
                if (alpha_form)
                    dql += alpha_src_coef * q.v[c] * divw;
                if (gvec)
                    for (int m = 0; m < 3; ++m)
                        dwl[m] += gvec->comp[m][c];
                if (src) {
                    const Vec3 x = g.position(ci, cj, ck);
                    if (src->rho)
                        dql += src->rho(x, t_stage);
                    for (int m = 0; m < 3; ++m)
                        if (src->w[m])
                            dwl[m] += src->w[m](x, t_stage);
                }
                dq.v[c] = dql;
                for (int m = 0; m < 3; ++m)
                    dw.comp[m][c] = dwl[m];
            }
        }
    }
}

// largest |w^a| + c_s over interior cells
double max_speed_axis(const SystemState& S, int a)
{
    const CartesianGrid& g = S.alpha.grid;
    const int nx = g.dims[0], ny = g.dims[1];
    const double gm1h = 0.5 * (S.eos.gamma - 1.0);
    const double* al = S.alpha.v.data();
    const double* wa = S.w.comp[a].data();
    return parallel_max(
        g.ncell(),
        [&](long i) {
            const int ci = (int)(i % nx);
            const int cj = (int)((i / nx) % ny);
            const int ck = (int)(i / ((long)nx * ny));
            const long c = g.idx(ci, cj, ck);
            const double av = al[c] > 0.0 ? al[c] : 0.0;
            return std::fabs(wa[c]) + gm1h * av;
        },
        0.0);
}

double max_interior_abs(const CartesianGrid& g, const std::vector<double>& v)
{
    const int nx = g.dims[0], ny = g.dims[1];
    return parallel_max(
        g.ncell(),
        [&](long i) {
            const int ci = (int)(i % nx);
            const int cj = (int)((i / nx) % ny);
            const int ck = (int)(i / ((long)nx * ny));
            return std::fabs(v[g.idx(ci, cj, ck)]);
        },
        0.0);
}

double hyperbolic_dt(const SystemState& state, const StepControl& ctrl)
{
    if (!state_finite(state))
        throw CorruptedStateError("step-size control: state holds non-finite values");
    const CartesianGrid& g = state.alpha.grid;
    double denom = 0.0;
    for (int a = 0; a < 3; ++a)
        denom += max_speed_axis(state, a) / g.spacing[a];
    return denom > 0.0 ? ctrl.cfl / denom : std::numeric_limits<double>::infinity();
}

void check_dt_min(double dt, const StepControl& ctrl, double time)
{
    if (ctrl.dt_min > 0.0 && dt < ctrl.dt_min)
        throw BlowupSuspectedError("admissible step " + fmt_g(dt) + " fell below dt_min=" +
                                   fmt_g(ctrl.dt_min) + " at t=" + fmt_g(time) +
                                   ": characteristic speeds are running away");
}

double cap_to_remaining(double dt, const StepControl& ctrl, double time)
{
    const double remaining = ctrl.t_end - time;
    if (remaining <= 0.0)
        return 0.0;
    return std::min(dt, remaining);
}

} // namespace

std::string verdict_name(Verdict v)
{
    switch (v) {
    case Verdict::completed:
        return "completed";
    case Verdict::blowup_suspected:
        return "blowup-suspected";
    default:
        return "corrupted-state";
    }
}

std::pair<ScalarField, VectorField> rhs(const SystemState& state, const VectorField* gvec)
{
    ScalarField a = state.alpha;
    VectorField w = state.w;
    fill_ghosts(a, scalar_policy(state.boundary));
    fill_ghosts(w, vector_policy(state.boundary));
    ScalarField da;
    VectorField dw;
    derivative_impl(a, w, state.eos, /*alpha_form=*/true, gvec, nullptr, state.time, da, dw);
    return {std::move(da), std::move(dw)};
}

std::pair<ScalarField, VectorField> stage_derivative(const SystemState& state,
                                                     const VectorField* gvec)
{
    ScalarField r = density_field(state);
    VectorField w = state.w;
    fill_ghosts(r, scalar_policy(state.boundary));
    fill_ghosts(w, vector_policy(state.boundary));
    ScalarField dr;
    VectorField dw;
    derivative_impl(r, w, state.eos, /*alpha_form=*/false, gvec, nullptr, state.time, dr, dw);
    return {std::move(dr), std::move(dw)};
}

double stable_dt(const SystemState& state, const StepControl& ctrl)
{
    ctrl.validate();
    const double dt_raw = hyperbolic_dt(state, ctrl);
    check_dt_min(dt_raw, ctrl, state.time);
    return cap_to_remaining(dt_raw, ctrl, state.time);
}

double stable_dt_full(const SystemState& state, const StepControl& ctrl, const VectorField* gvec)
{
    ctrl.validate();
    const CartesianGrid& g = state.alpha.grid;
    double dt = hyperbolic_dt(state, ctrl);
    if (gvec) {
        if (!(gvec->grid == g))
            throw std::invalid_argument("stable_dt_full: gravity field lives on a different grid");
        for (int a = 0; a < 3; ++a) {
            const double gmax = max_interior_abs(g, gvec->comp[a]);
            if (gmax > 0.0)
                dt = std::min(dt, ctrl.cfl * std::sqrt(g.spacing[a] / gmax));
        }
    }
    const double amax = parallel_max(
        g.ncell(),
        [&](long i) {
            const int ci = (int)(i % g.dims[0]);
            const int cj = (int)((i / g.dims[0]) % g.dims[1]);
            const int ck = (int)(i / ((long)g.dims[0] * g.dims[1]));
            return state.alpha.v[g.idx(ci, cj, ck)];
        },
        0.0);
    if (amax > 0.0) {
        const double rho_max = state.eos.makino_to_density(amax);
        if (rho_max > 0.0)
            dt = std::min(dt, 0.1 * ctrl.cfl / std::sqrt(rho_max));
    }
    check_dt_min(dt, ctrl, state.time);
    return cap_to_remaining(dt, ctrl, state.time);
}

StepStats step(SystemState& state, double dt, const StepControl& ctrl,
               const FftPoissonSolver* gravity, const SourceTerm* src,
               const PotentialSolution* pot0)
{
    ctrl.validate();
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("step: dt must be positive and finite");
    const CartesianGrid& g = state.alpha.grid;
    if (!(g == state.w.grid))
        throw std::invalid_argument("step: alpha and w live on different grids");
    if (g.ghost < 2)
        throw std::invalid_argument("step: grid must carry at least two ghost layers");
    if (gravity && state.boundary == BoundaryMode::periodic)
        throw std::invalid_argument("step: self-gravity requires vacuum boundaries");

    const EquationOfState& eos = state.eos;
    const GhostPolicy sp = scalar_policy(state.boundary);
    const GhostPolicy vp = vector_policy(state.boundary);
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

    const ScalarField rho0 = density_field(state);
    const VectorField w0 = state.w;

    ScalarField r = rho0;
    VectorField u = w0;
    ScalarField dr;
    VectorField du;

    auto stage = [&](double ts, const PotentialSolution* pre) {
        fill_ghosts(r, sp);
        fill_ghosts(u, vp);
        PotentialSolution local;
        const VectorField* gv = nullptr;
        if (gravity) {
            if (pre) {
                gv = &pre->g;
            } else {
                local = gravity->solve(r);
                gv = &local.g;
            }
        }
        derivative_impl(r, u, eos, /*alpha_form=*/false, gv, src, ts, dr, du,
                        /*fct_dt=*/dt, sp);
    };

    // r <- ca * r0 + cb * r + cd * dr on interior cells (same for u)
    auto combine = [&](double ca, double cb, double cd) {
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
        for (int ck = 0; ck < nz; ++ck) {
            for (int cj = 0; cj < ny; ++cj) {
                for (int ci = 0; ci < nx; ++ci) {
                    const long c = g.idx(ci, cj, ck);
                    r.v[c] = ca * rho0.v[c] + cb * r.v[c] + cd * dr.v[c];
                    for (int m = 0; m < 3; ++m)
                        u.comp[m][c] =
                            ca * w0.comp[m][c] + cb * u.comp[m][c] + cd * du.comp[m][c];
                }
            }
        }
    };

    const double t0 = state.time;
    stage(t0, pot0);
    combine(1.0, 0.0, dt);
    stage(t0 + dt, nullptr);
    combine(0.75, 0.25, 0.25 * dt);
    stage(t0 + 0.5 * dt, nullptr);
    combine(1.0 / 3.0, 2.0 / 3.0, (2.0 / 3.0) * dt);

    // map back to alpha, clip the vacuum tail, and account for every gram the
    // fixup moved
    const double coef = eos.alpha_coeff();
    const double e_ra = 0.5 * (eos.gamma - 1.0);
    const double e_ar = 2.0 / (eos.gamma - 1.0);
    std::vector<double> dmass((std::size_t)g.ncell(), 0.0);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int ck = 0; ck < nz; ++ck) {
        for (int cj = 0; cj < ny; ++cj) {
            for (int ci = 0; ci < nx; ++ci) {
                const long c = g.idx(ci, cj, ck);
                const double rr = r.v[c];
                double a = rr > 0.0 ? coef * std::pow(rr, e_ra) : 0.0;
                if (a < ctrl.floor)
                    a = 0.0;
                const double rfix = a > 0.0 ? std::pow(a / coef, e_ar) : 0.0;
                state.alpha.v[c] = a;
                for (int m = 0; m < 3; ++m)
                    state.w.comp[m][c] = u.comp[m][c];
                dmass[g.idx_interior(ci, cj, ck)] = rfix - rr;
            }
        }
    }
    state.alpha.ghost_ok = false;
    state.w.ghost_ok = false;
    state.time = t0 + dt;

    const double V = g.cell_volume();
    StepStats st;
    st.dt = dt;
    st.clipped_mass_net = V * deterministic_sum(g.ncell(), [&](long i) { return dmass[i]; });
    st.clipped_mass = V * deterministic_sum(g.ncell(), [&](long i) { return std::fabs(dmass[i]); });
    return st;
}

ScalarField density_field(const SystemState& state)
{
    ScalarField rho(state.alpha.grid);
    const double coef = state.eos.alpha_coeff();
    const double e_ar = 2.0 / (state.eos.gamma - 1.0);
    const long n = state.alpha.grid.ncell_ext();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < n; ++i) {
        const double a = state.alpha.v[i];
        rho.v[i] = a > 0.0 ? std::pow(a / coef, e_ar) : 0.0;
    }
    rho.ghost_ok = state.alpha.ghost_ok;
    return rho;
}

double total_mass(const SystemState& state)
{
    const CartesianGrid& g = state.alpha.grid;
    const double coef = state.eos.alpha_coeff();
    const double e_ar = 2.0 / (state.eos.gamma - 1.0);
    const int nx = g.dims[0], ny = g.dims[1];
    const double sum = deterministic_sum(g.ncell(), [&](long i) {
        const int ci = (int)(i % nx);
        const int cj = (int)((i / nx) % ny);
        const int ck = (int)(i / ((long)nx * ny));
        const double a = state.alpha.v[g.idx(ci, cj, ck)];
        return a > 0.0 ? std::pow(a / coef, e_ar) : 0.0;
    });
    return sum * g.cell_volume();
}

bool state_finite(const SystemState& state)
{
    const CartesianGrid& g = state.alpha.grid;
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    int bad = 0;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) reduction(| : bad)
#endif
    for (int ck = 0; ck < nz; ++ck) {
        for (int cj = 0; cj < ny; ++cj) {
            for (int ci = 0; ci < nx; ++ci) {
                const long c = g.idx(ci, cj, ck);
                if (!std::isfinite(state.alpha.v[c]) || !std::isfinite(state.w.comp[0][c]) ||
                    !std::isfinite(state.w.comp[1][c]) || !std::isfinite(state.w.comp[2][c]))
                    bad = 1;
            }
        }
    }
    return bad == 0;
}

RunResult run(SystemState state, const StepControl& ctrl, bool gravity_on, const Hook& hook,
              long cadence, const std::vector<double>& marks)
{
    ctrl.validate();
    if (cadence < 1)
        throw std::invalid_argument("run: cadence must be >= 1");
    if (gravity_on && state.boundary == BoundaryMode::periodic)
        throw std::invalid_argument("run: self-gravity requires vacuum boundaries");
    if (state.alpha.grid.ghost < 2)
        throw std::invalid_argument("run: grid must carry at least two ghost layers");

    RunResult res;
    res.state = std::move(state);
    SystemState& S = res.state;
    const GhostPolicy sp = scalar_policy(S.boundary);
    const GhostPolicy vp = vector_policy(S.boundary);
    fill_ghosts(S.alpha, sp);
    fill_ghosts(S.w, vp);

    if (!state_finite(S)) {
        res.verdict = Verdict::corrupted_state;
        res.detail = "initial state holds non-finite values";
        return res;
    }

    std::optional<FftPoissonSolver> solver;
    if (gravity_on)
        solver.emplace(S.alpha.grid);

    auto tol_of = [](double m) { return 1e-12 * std::max(1.0, std::fabs(m)); };

    // mark times to hit exactly: requested ones inside (t0, t_end], plus t_end
    std::vector<double> ms(marks);
    ms.push_back(ctrl.t_end);
    std::sort(ms.begin(), ms.end());
    std::vector<double> mm;
    for (double m : ms) {
        if (m <= S.time + tol_of(m))
            continue;
        if (m > ctrl.t_end + tol_of(ctrl.t_end))
            continue;
        if (!mm.empty() && m - mm.back() <= tol_of(m))
            continue;
        mm.push_back(m);
    }

    PotentialSolution pot;
    bool pot_fresh = false;
    auto ensure_pot = [&]() -> const PotentialSolution* {
        if (!solver)
            return nullptr;
        if (!pot_fresh) {
            pot = solver->solve(density_field(S));
            pot_fresh = true;
        }
        return &pot;
    };

    if (hook) {
        const bool initial_mark = std::fabs(ctrl.t_end - S.time) <= tol_of(ctrl.t_end);
        HookContext ctx{S, ensure_pot(), StepStats{}, 0, initial_mark};
        const HookAction act = hook(ctx);
        if (act == HookAction::halt_blowup) {
            res.verdict = Verdict::blowup_suspected;
            res.detail = "divergence monitor voted halt at t=" + fmt_g(S.time);
            return res;
        }
        if (act == HookAction::halt_completed) {
            res.detail = "halted by monitor at t=" + fmt_g(S.time);
            return res;
        }
    }

    double eff_dt_min = ctrl.dt_min;
    bool dt_min_resolved = ctrl.dt_min > 0.0;
    std::size_t mi = 0;
    SystemState prev;

    while (S.time < ctrl.t_end - tol_of(ctrl.t_end)) {
        StepControl c2 = ctrl;
        c2.dt_min = dt_min_resolved ? eff_dt_min : 0.0;
        const PotentialSolution* p = nullptr;
        double dt = 0.0;
        try {
            p = ensure_pot();
            dt = stable_dt_full(S, c2, p ? &p->g : nullptr);
        } catch (const BlowupSuspectedError& e) {
            res.verdict = Verdict::blowup_suspected;
            res.detail = e.what();
            break;
        } catch (const CorruptedStateError& e) {
            res.verdict = Verdict::corrupted_state;
            res.detail = e.what();
            break;
        }
        if (!dt_min_resolved && std::isfinite(dt) && dt > 0.0) {
            eff_dt_min = 1e-10 * dt;
            dt_min_resolved = true;
        }
        if (!(dt > 0.0)) {
            res.verdict = Verdict::corrupted_state;
            res.detail = "step size degenerated to zero at t=" + fmt_g(S.time);
            break;
        }

        while (mi < mm.size() && mm[mi] <= S.time + tol_of(mm[mi]))
            ++mi;
        bool hit = false;
        if (mi < mm.size() && S.time + dt >= mm[mi] - tol_of(mm[mi])) {
            dt = mm[mi] - S.time;
            hit = true;
        }

        prev = S;
        StepStats st;
        try {
            st = step(S, dt, ctrl, solver ? &*solver : nullptr, nullptr, p);
        } catch (const std::exception& e) {
            res.verdict = Verdict::corrupted_state;
            res.detail = "step failed at t=" + fmt_g(S.time) + ": " + e.what();
            break;
        }
        pot_fresh = false;
        if (hit) {
            S.time = mm[mi];
            ++mi;
        }
        fill_ghosts(S.alpha, sp);
        fill_ghosts(S.w, vp);
        ++res.steps;
        res.total_clipped_mass += st.clipped_mass;
        res.total_clipped_net += st.clipped_mass_net;

        if (!state_finite(S)) {
            res.verdict = Verdict::corrupted_state;
            res.detail = "non-finite values appeared at t=" + fmt_g(S.time) +
                         "; returning the last finite state";
            res.state = std::move(prev);
            break;
        }

        if (hook &&
            ((res.steps % cadence) == 0 || hit || S.time >= ctrl.t_end - tol_of(ctrl.t_end))) {
            HookContext ctx{S, ensure_pot(), st, res.steps, hit};
            const HookAction act = hook(ctx);
            if (act == HookAction::halt_blowup) {
                res.verdict = Verdict::blowup_suspected;
                res.detail = "divergence monitor voted halt at t=" + fmt_g(S.time);
                break;
            }
            if (act == HookAction::halt_completed) {
                res.detail = "halted by monitor at t=" + fmt_g(S.time);
                break;
            }
        }
    }

    if (res.verdict == Verdict::completed && res.detail.empty())
        res.detail = "reached t_end";
    return res;
}

} // namespace cloudlab
