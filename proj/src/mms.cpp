#include "cloudlab/mms.hpp"

#include "cloudlab/reduce.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace cloudlab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Travelling trigonometric fields on the unit periodic box.  K is chosen so
// the alpha prefactor is exactly 1, which keeps density O(1):
//   alpha*(x,t) = a0 + a1 sin(k.x - omega t),   w*_m = b_m cos(k.x - omega t)
struct TrigCase {
    EquationOfState eos{0.4 * 0.4 / (4.0 * 1.4), 1.4, RegularityCase::A};
    double a0 = 1.0;
    double a1 = 0.2;
    Vec3 b{0.3, -0.2, 0.1};
    Vec3 k{kTwoPi, kTwoPi, kTwoPi};
    double omega = 1.3;

    double phase(const Vec3& x, double t) const
    {
        return k[0] * x[0] + k[1] * x[1] + k[2] * x[2] - omega * t;
    }
    double bk() const { return b[0] * k[0] + b[1] * k[1] + b[2] * k[2]; }

    double alpha(const Vec3& x, double t) const { return a0 + a1 * std::sin(phase(x, t)); }
    double w(int m, const Vec3& x, double t) const { return b[m] * std::cos(phase(x, t)); }
    double rho(const Vec3& x, double t) const { return eos.makino_to_density(alpha(x, t)); }

    // S_rho = d rho*/dt + div(rho* w*), using rho = rho(alpha):
    //   = (2/(gamma-1)) (rho*/alpha*) (dalpha*/dt + w*.grad alpha*) + rho* div w*
    double s_rho(const Vec3& x, double t) const
    {
        const double ph = phase(x, t);
        const double c = std::cos(ph), s = std::sin(ph);
        const double al = a0 + a1 * s;
        const double rh = eos.makino_to_density(al);
        const double dal = -a1 * omega * c + a1 * bk() * c * c; // material derivative of alpha
        return (2.0 / (eos.gamma - 1.0)) * (rh / al) * dal - rh * bk() * s;
    }

    // S_w^m = d w*_m/dt + w*.grad w*_m + (gamma-1)/2 alpha* d_m alpha*
    double s_w(int m, const Vec3& x, double t) const
    {
        const double ph = phase(x, t);
        const double c = std::cos(ph), s = std::sin(ph);
        const double al = a0 + a1 * s;
        return b[m] * omega * s - bk() * b[m] * c * s +
               0.5 * (eos.gamma - 1.0) * al * a1 * k[m] * c;
    }
};

CartesianGrid unit_periodic_grid(int n)
{
    if (n < 4)
        throw std::invalid_argument("mms: resolution must be at least 4");
    const double h = 1.0 / n;
    return CartesianGrid({n, n, n}, {h, h, h}, {0.5 * h, 0.5 * h, 0.5 * h}, 2);
}

SystemState initial_state(const TrigCase& mc, const CartesianGrid& g)
{
    SystemState S;
    S.time = 0.0;
    S.eos = mc.eos;
    S.boundary = BoundaryMode::periodic;
    S.alpha = ScalarField(g);
    S.w = VectorField(g);
    for (int ck = 0; ck < g.dims[2]; ++ck)
        for (int cj = 0; cj < g.dims[1]; ++cj)
            for (int ci = 0; ci < g.dims[0]; ++ci) {
                const Vec3 x = g.position(ci, cj, ck);
                S.alpha.at(ci, cj, ck) = mc.alpha(x, 0.0);
                for (int m = 0; m < 3; ++m)
                    S.w.at(m, ci, cj, ck) = mc.w(m, x, 0.0);
            }
    return S;
}

void advance_to(SystemState& S, const SourceTerm& src, double t_final)
{
    StepControl c;
    c.cfl = 0.4;
    c.t_end = t_final;
    c.dt_min = 0.0;
    c.floor = 0.0;
    const double tol = 1e-12 * std::max(1.0, t_final);
    while (S.time < t_final - tol) {
        const double dt = stable_dt(S, c);
        if (!(dt > 0.0))
            break;
        step(S, dt, c, nullptr, &src);
    }
}

struct ErrorNorms {
    double rho_l1 = 0.0, rho_linf = 0.0, w_l1 = 0.0, w_linf = 0.0;
};

// exact fields evaluated per interior cell by the callbacks
template <class RhoFn, class WFn>
ErrorNorms measure_errors(const SystemState& S, RhoFn&& rho_exact, WFn&& w_exact)
{
    const CartesianGrid& g = S.alpha.grid;
    const ScalarField rho = density_field(S);
    const int nx = g.dims[0], ny = g.dims[1];
    const long n = g.ncell();
    auto decode = [&](long i, int& ci, int& cj, int& ck) {
        ci = (int)(i % nx);
        cj = (int)((i / nx) % ny);
        ck = (int)(i / ((long)nx * ny));
    };
    ErrorNorms e;
    e.rho_l1 = deterministic_sum(n, [&](long i) {
                   int ci, cj, ck;
                   decode(i, ci, cj, ck);
                   return std::fabs(rho.at(ci, cj, ck) - rho_exact(ci, cj, ck));
               }) /
               (double)n;
    e.rho_linf = parallel_max(
        n,
        [&](long i) {
            int ci, cj, ck;
            decode(i, ci, cj, ck);
            return std::fabs(rho.at(ci, cj, ck) - rho_exact(ci, cj, ck));
        },
        0.0);
    e.w_l1 = deterministic_sum(n, [&](long i) {
                 int ci, cj, ck;
                 decode(i, ci, cj, ck);
                 double s = 0.0;
                 for (int m = 0; m < 3; ++m)
                     s += std::fabs(S.w.at(m, ci, cj, ck) - w_exact(m, ci, cj, ck));
                 return s / 3.0;
             }) /
             (double)n;
    e.w_linf = parallel_max(
        n,
        [&](long i) {
            int ci, cj, ck;
            decode(i, ci, cj, ck);
            double s = 0.0;
            for (int m = 0; m < 3; ++m)
                s = std::max(s, std::fabs(S.w.at(m, ci, cj, ck) - w_exact(m, ci, cj, ck)));
            return s;
        },
        0.0);
    return e;
}

MmsRow run_trig(int n, double t_final)
{
    const TrigCase mc;
    const CartesianGrid g = unit_periodic_grid(n);
    SystemState S = initial_state(mc, g);
    SourceTerm src;
    src.rho = [mc](const Vec3& x, double t) { return mc.s_rho(x, t); };
    for (int m = 0; m < 3; ++m)
        src.w[m] = [mc, m](const Vec3& x, double t) { return mc.s_w(m, x, t); };
    advance_to(S, src, t_final);
    const double tf = S.time;
    const ErrorNorms e = measure_errors(
        S, [&](int ci, int cj, int ck) { return mc.rho(g.position(ci, cj, ck), tf); },
        [&](int m, int ci, int cj, int ck) { return mc.w(m, g.position(ci, cj, ck), tf); });
    MmsRow row;
    row.n = n;
    row.h = g.spacing[0];
    row.err_rho_l1 = e.rho_l1;
    row.err_rho_linf = e.rho_linf;
    row.err_w_l1 = e.w_l1;
    row.err_w_linf = e.w_linf;
    return row;
}

MmsRow run_discrete_stationary(int n, double t_final)
{
    const TrigCase mc;
    const CartesianGrid g = unit_periodic_grid(n);
    SystemState S0 = initial_state(mc, g);

    // freeze minus the discrete derivative of the initial state as the source
    auto frozen = std::make_shared<std::pair<ScalarField, VectorField>>(
        stage_derivative(S0, nullptr));
    auto cell_of = [g](const Vec3& x) {
        const int ci = (int)std::llround((x[0] - g.origin[0]) / g.spacing[0]);
        const int cj = (int)std::llround((x[1] - g.origin[1]) / g.spacing[1]);
        const int ck = (int)std::llround((x[2] - g.origin[2]) / g.spacing[2]);
        return g.idx(ci, cj, ck);
    };
    SourceTerm src;
    src.rho = [frozen, cell_of](const Vec3& x, double) { return -frozen->first.v[cell_of(x)]; };
    for (int m = 0; m < 3; ++m)
        src.w[m] = [frozen, cell_of, m](const Vec3& x, double) {
            return -frozen->second.comp[m][cell_of(x)];
        };

    SystemState S = S0;
    advance_to(S, src, t_final);
    const ScalarField rho0 = density_field(S0);
    const ErrorNorms e = measure_errors(
        S, [&](int ci, int cj, int ck) { return rho0.at(ci, cj, ck); },
        [&](int m, int ci, int cj, int ck) { return S0.w.at(m, ci, cj, ck); });
    MmsRow row;
    row.n = n;
    row.h = g.spacing[0];
    row.err_rho_l1 = e.rho_l1;
    row.err_rho_linf = e.rho_linf;
    row.err_w_l1 = e.w_l1;
    row.err_w_linf = e.w_linf;
    return row;
}

} // namespace

std::vector<std::string> mms_cases() { return {"trig", "discrete-stationary"}; }

MmsReport mms_run(const std::string& id, const std::vector<int>& resolutions, double t_final)
{
    if (resolutions.empty())
        throw std::invalid_argument("mms_run: need at least one resolution");
    if (!(t_final > 0.0))
        throw std::invalid_argument("mms_run: t_final must be positive");
    MmsReport rep;
    rep.id = id;
    rep.t_final = t_final;
    for (int n : resolutions) {
        MmsRow row;
        if (id == "trig")
            row = run_trig(n, t_final);
        else if (id == "discrete-stationary")
            row = run_discrete_stationary(n, t_final);
        else
            throw std::invalid_argument("mms_run: unknown case id '" + id + "'");
        if (!rep.rows.empty()) {
            const MmsRow& prev = rep.rows.back();
            const double lh = std::log(prev.h / row.h);
            auto order = [&](double e_prev, double e_cur) {
                if (e_prev > 0.0 && e_cur > 0.0 && lh > 0.0)
                    return std::log(e_prev / e_cur) / lh;
                return std::numeric_limits<double>::quiet_NaN();
            };
            row.order_rho_l1 = order(prev.err_rho_l1, row.err_rho_l1);
            row.order_rho_linf = order(prev.err_rho_linf, row.err_rho_linf);
            row.order_w_l1 = order(prev.err_w_l1, row.err_w_l1);
            row.order_w_linf = order(prev.err_w_linf, row.err_w_linf);
        } else {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            row.order_rho_l1 = row.order_rho_linf = row.order_w_l1 = row.order_w_linf = nan;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace cloudlab
