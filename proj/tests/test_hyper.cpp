#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cloudlab/hyper.hpp>
#include <cloudlab/mms.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

using namespace cloudlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

CartesianGrid unit_box(int n, int ghost = 2)
{
    const double h = 2.0 / n;
    return CartesianGrid({n, n, n}, {h, h, h}, {-1.0 + 0.5 * h, -1.0 + 0.5 * h, -1.0 + 0.5 * h},
                         ghost);
}

SystemState bump_state(int n, double A, double R, double H, const EquationOfState& eos)
{
    CartesianGrid g = unit_box(n);
    SystemState s;
    s.eos = eos;
    s.alpha = ScalarField(g);
    s.w = VectorField(g);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec3 p = g.position(i, j, k);
                const double r2 = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (R * R);
                if (r2 < 1.0)
                    s.alpha.at(i, j, k) = A * std::pow(1.0 - r2, 4);
                for (int c = 0; c < 3; ++c)
                    s.w.at(c, i, j, k) = H * p[c];
            }
    return s;
}

} // namespace

TEST_CASE("rhs of the zero state vanishes identically")
{
    CartesianGrid g = unit_box(8);
    SystemState s;
    s.eos = EquationOfState(1.0, 2.0, RegularityCase::B);
    s.alpha = ScalarField(g);
    s.w = VectorField(g);
    auto [da, dw] = rhs(s, nullptr);
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i) {
                CHECK(da.at(i, j, k) == 0.0);
                for (int c = 0; c < 3; ++c)
                    CHECK(dw.at(c, i, j, k) == 0.0);
            }
}

TEST_CASE("rhs of a constant periodic state vanishes identically")
{
    CartesianGrid g = unit_box(8);
    SystemState s;
    s.eos = EquationOfState(0.5, 1.4, RegularityCase::A);
    s.boundary = BoundaryMode::periodic;
    s.alpha = ScalarField(g);
    s.w = VectorField(g);
    s.alpha.fill(0.7);
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i) {
                s.w.at(0, i, j, k) = 0.3;
                s.w.at(1, i, j, k) = -0.2;
                s.w.at(2, i, j, k) = 0.1;
            }
    auto [da, dw] = rhs(s, nullptr);
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j)
            for (int i = 0; i < 8; ++i) {
                CHECK(da.at(i, j, k) == 0.0);
                for (int c = 0; c < 3; ++c)
                    CHECK(dw.at(c, i, j, k) == 0.0);
            }
}

TEST_CASE("admissible step: frozen formula evaluations")
{
    StepControl ctrl;
    ctrl.cfl = 0.5;
    ctrl.t_end = 100.0;

    // pure transport: max |w_x| = 2, h = 0.1 -> dt = 0.5 / (2/0.1)
    CartesianGrid g({4, 4, 4}, {0.1, 0.1, 0.1}, {0, 0, 0}, 2);
    SystemState s;
    s.eos = EquationOfState(1.0, 2.0, RegularityCase::B);
    s.alpha = ScalarField(g);
    s.w = VectorField(g);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i)
                s.w.at(0, i, j, k) = 2.0;
    CHECK(stable_dt(s, ctrl) == doctest::Approx(0.025).epsilon(1e-14));

    // pure acoustics: gamma = 2, alpha = 2 -> c_s = 1 on all three axes
    SystemState s2;
    s2.eos = EquationOfState(1.0, 2.0, RegularityCase::B);
    s2.alpha = ScalarField(g);
    s2.w = VectorField(g);
    s2.alpha.fill(2.0);
    StepControl c2;
    c2.cfl = 0.3;
    c2.t_end = 100.0;
    CHECK(stable_dt(s2, c2) == doctest::Approx(0.01).epsilon(1e-14));

    // the step never passes t_end
    s2.time = 99.9951;
    CHECK(stable_dt(s2, c2) == doctest::Approx(100.0 - 99.9951).epsilon(1e-10));

    // dt_min undercut reports a suspected blowup
    s2.time = 0.0;
    c2.dt_min = 0.02;
    CHECK_THROWS_AS(stable_dt(s2, c2), BlowupSuspectedError);

    // non-finite state is a corruption
    SystemState s3;
    s3.eos = s.eos;
    s3.alpha = ScalarField(g);
    s3.w = VectorField(g);
    s3.alpha.at(1, 1, 1) = std::numeric_limits<double>::quiet_NaN();
    StepControl c3;
    CHECK_THROWS_AS(stable_dt(s3, c3), CorruptedStateError);
}

TEST_CASE("full step control adds free-fall and contraction caps")
{
    CartesianGrid g({4, 4, 4}, {0.1, 0.1, 0.1}, {0, 0, 0}, 2);
    SystemState s;
    s.eos = EquationOfState(1.0, 2.0, RegularityCase::B);
    s.alpha = ScalarField(g);
    s.w = VectorField(g);
    StepControl ctrl;
    ctrl.cfl = 0.5;
    ctrl.t_end = 1e9;

    // characteristic speeds all vanish; only the gravity cap binds:
    // dt = cfl * sqrt(h / max|g_x|) = 0.5 * sqrt(0.1/0.4) = 0.25
    VectorField grav(g);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i)
                grav.at(0, i, j, k) = 0.4;
    CHECK(stable_dt_full(s, ctrl, &grav) == doctest::Approx(0.25).epsilon(1e-14));

    // the full control can only tighten the characteristic bound
    SystemState sb = bump_state(8, 0.4, 0.5, -0.05, s.eos);
    StepControl cb;
    cb.t_end = 1e9;
    CHECK(stable_dt_full(sb, cb, nullptr) <= stable_dt(sb, cb) + 1e-15);

    // contraction cap: alpha = 2, gamma = 2, K = 1 -> rho = 0.5,
    // dt = min(char bound, 0.1 * cfl / sqrt(0.5)); char bound = 0.3/30 = 0.01
    SystemState s2;
    s2.eos = s.eos;
    s2.alpha = ScalarField(g);
    s2.w = VectorField(g);
    s2.alpha.fill(2.0);
    StepControl c2;
    c2.cfl = 0.3;
    c2.t_end = 1e9;
    const double rho = s2.eos.makino_to_density(2.0);
    const double expect = std::min(0.01, 0.1 * 0.3 / std::sqrt(rho));
    CHECK(stable_dt_full(s2, c2, nullptr) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("deep vacuum cells stay exactly zero across a step")
{
    EquationOfState eos(0.02, 2.0, RegularityCase::B);
    SystemState s = bump_state(24, 0.4, 0.5, -0.05, eos);
    // record cells at least 4 cells away from the support
    Mask sup0 = support_mask(s.alpha, 0.0);
    const CartesianGrid& g = s.alpha.grid;
    auto far_from_support = [&](int i, int j, int k, int reach) {
        for (int dk = -reach; dk <= reach; ++dk)
            for (int dj = -reach; dj <= reach; ++dj)
                for (int di = -reach; di <= reach; ++di) {
                    const int ii = i + di, jj = j + dj, kk = k + dk;
                    if (ii < 0 || jj < 0 || kk < 0 || ii >= g.dims[0] || jj >= g.dims[1] ||
                        kk >= g.dims[2])
                        continue;
                    if (sup0.at(ii, jj, kk))
                        return false;
                }
        return true;
    };
    StepControl ctrl;
    ctrl.t_end = 1e9;
    const double dt = stable_dt_full(s, ctrl, nullptr);
    step(s, dt, ctrl, nullptr);
    long checked = 0;
    for (int k = 0; k < 24; ++k)
        for (int j = 0; j < 24; ++j)
            for (int i = 0; i < 24; ++i)
                if (!sup0.at(i, j, k) && far_from_support(i, j, k, 4)) {
                    CHECK(s.alpha.at(i, j, k) == 0.0);
                    ++checked;
                }
    CHECK(checked > 1000);
}

TEST_CASE("support grows at most one cell per stage")
{
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> ua(-0.5, 0.5);
    CartesianGrid g = unit_box(16);
    SystemState s;
    s.eos = EquationOfState(1.0, 2.0, RegularityCase::B);
    s.alpha = ScalarField(g);
    s.w = VectorField(g);
    // hostile data: sharp random support, random velocities
    for (int k = 4; k < 12; ++k)
        for (int j = 4; j < 12; ++j)
            for (int i = 4; i < 12; ++i)
                s.alpha.at(i, j, k) = std::max(0.0, ua(rng));
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i)
                for (int c = 0; c < 3; ++c)
                    s.w.at(c, i, j, k) = ua(rng);
    Mask sup0 = support_mask(s.alpha, 0.0);
    StepControl ctrl;
    ctrl.t_end = 1e9;
    const double m0 = total_mass(s);
    const double dt = stable_dt_full(s, ctrl, nullptr);
    StepStats st = step(s, dt, ctrl, nullptr);

    // positivity is maintained by the limiter, not by clipping
    double amin = 0.0;
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i)
                amin = std::min(amin, s.alpha.at(i, j, k));
    CHECK(amin >= 0.0);
    CHECK(std::fabs(st.clipped_mass) < 1e-12 * m0);
    CHECK(std::fabs(total_mass(s) - m0) < 1e-12 * m0);

    // three stages can spread physical mass at most three cells (Chebyshev)
    Mask sup1 = support_mask(s.alpha, 0.0);
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i) {
                if (!sup1.at(i, j, k))
                    continue;
                bool near = false;
                for (int dk = -3; dk <= 3 && !near; ++dk)
                    for (int dj = -3; dj <= 3 && !near; ++dj)
                        for (int di = -3; di <= 3 && !near; ++di) {
                            const int ii = i + di, jj = j + dj, kk = k + dk;
                            if (ii < 0 || jj < 0 || kk < 0 || ii >= 16 || jj >= 16 || kk >= 16)
                                continue;
                            if (sup0.at(ii, jj, kk))
                                near = true;
                        }
                CHECK(near);
            }
}

TEST_CASE("acoustic crest speed and Galilean boost")
{
    auto measure_speed = [](double w0) {
        const int n = 128;
        const double h = 1.0 / n;
        CartesianGrid g({n, 4, 4}, {h, h, h}, {0.5 * h, 0.5 * h, 0.5 * h}, 2);
        SystemState s;
        s.eos = EquationOfState(0.4 * 0.4 / 5.6, 1.4, RegularityCase::A); // alpha_coeff = 1
        s.boundary = BoundaryMode::periodic;
        s.alpha = ScalarField(g);
        s.w = VectorField(g);
        const double alpha0 = 1.0, eps = 1e-4;
        for (int k = 0; k < 4; ++k)
            for (int j = 0; j < 4; ++j)
                for (int i = 0; i < n; ++i) {
                    const double x = g.cell_center(0, i);
                    s.alpha.at(i, j, k) = alpha0 + eps * std::sin(2 * kPi * x);
                    s.w.at(0, i, j, k) = w0 + eps * std::sin(2 * kPi * x);
                }
        auto phase = [&](const SystemState& st) {
            std::complex<double> m(0, 0);
            for (int i = 0; i < n; ++i) {
                const double x = g.cell_center(0, i);
                m += (st.alpha.at(i, 0, 0) - alpha0) *
                     std::exp(std::complex<double>(0, -2 * kPi * x));
            }
            return std::arg(m);
        };
        const double p0 = phase(s);
        StepControl ctrl;
        ctrl.t_end = 1.0;
        while (s.time < ctrl.t_end - 1e-14) {
            const double dt = stable_dt(s, ctrl);
            step(s, dt, ctrl, nullptr);
        }
        double dphi = phase(s) - p0;
        while (dphi > kPi)
            dphi -= 2 * kPi;
        while (dphi < -kPi)
            dphi += 2 * kPi;
        return -dphi / (2 * kPi * s.time);
    };

    const double cs = 0.5 * 0.4 * 1.0; // (gamma-1)/2 * alpha0
    const double v_rest = measure_speed(0.0);
    CHECK(v_rest == doctest::Approx(cs).epsilon(0.02));
    const double v_boost = measure_speed(0.13);
    CHECK(v_boost == doctest::Approx(0.13 + cs).epsilon(0.02));
}

TEST_CASE("step argument validation")
{
    SystemState s = bump_state(8, 0.3, 0.5, 0.0, EquationOfState(1.0, 2.0, RegularityCase::B));
    StepControl ctrl;
    CHECK_THROWS_AS(step(s, 0.0, ctrl, nullptr), std::invalid_argument);
    CHECK_THROWS_AS(step(s, -0.1, ctrl, nullptr), std::invalid_argument);

    SystemState sp = s;
    sp.boundary = BoundaryMode::periodic;
    FftPoissonSolver solver(s.alpha.grid);
    CHECK_THROWS_AS(step(sp, 0.01, ctrl, &solver), std::invalid_argument);

    StepControl bad;
    bad.cfl = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.cfl = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    StepControl bad2;
    bad2.floor = -1.0;
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
    StepControl bad3;
    bad3.t_end = -1.0;
    CHECK_THROWS_AS(bad3.validate(), std::invalid_argument);
}

TEST_CASE("vacuum fixup is accounted in the clip ledger")
{
    EquationOfState eos(0.02, 2.0, RegularityCase::B);
    SystemState s = bump_state(16, 0.4, 0.5, -0.05, eos);
    StepControl ctrl;
    ctrl.t_end = 1e9;
    // aggressive floor forces real clipping
    ctrl.floor = 0.2;
    const double m0 = total_mass(s);
    const double dt = stable_dt_full(s, ctrl, nullptr);
    StepStats st = step(s, dt, ctrl, nullptr);
    CHECK(st.clipped_mass > 0.0);
    CHECK(st.clipped_mass >= std::fabs(st.clipped_mass_net) - 1e-18);
    // the conservative update only changes total mass through the fixup
    const double m1 = total_mass(s);
    CHECK(m1 - m0 == doctest::Approx(st.clipped_mass_net).epsilon(1e-10));
    // everything below the floor was zeroed
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i) {
                const double a = s.alpha.at(i, j, k);
                CHECK((a == 0.0 || a >= 0.2 * (1.0 - 1e-12)));
            }
}

TEST_CASE("mass is conserved to roundoff on a gravity-on bump run")
{
    EquationOfState eos(0.02, 2.0, RegularityCase::B);
    SystemState s = bump_state(16, 0.4, 0.5, -0.05, eos);
    StepControl ctrl;
    ctrl.t_end = 1e9;
    ctrl.floor = 1e-12 * 0.4;
    FftPoissonSolver solver(s.alpha.grid);
    const double m0 = total_mass(s);
    double clipped_net = 0.0;
    for (int it = 0; it < 10; ++it) {
        const double dt = 0.8 * stable_dt_full(s, ctrl, nullptr);
        StepStats st = step(s, dt, ctrl, &solver);
        clipped_net += st.clipped_mass_net;
    }
    const double m1 = total_mass(s);
    CHECK(std::fabs(m1 - m0) < 1e-10 * m0);
    CHECK(std::fabs((m1 - m0) - clipped_net) < 1e-12 * m0);
}

TEST_CASE("run loop: marks, hooks, verdicts")
{
    EquationOfState eos(0.02, 2.0, RegularityCase::B);

    SUBCASE("t_end = 0 completes immediately")
    {
        SystemState s = bump_state(8, 0.3, 0.5, 0.0, eos);
        StepControl ctrl;
        ctrl.t_end = 0.0;
        int calls = 0;
        RunResult r = run(std::move(s), ctrl, false,
                          [&](const HookContext&) {
                              ++calls;
                              return HookAction::proceed;
                          },
                          1);
        CHECK(r.verdict == Verdict::completed);
        CHECK(r.steps == 0);
        CHECK(calls >= 1);
        CHECK(r.detail.find("reached t_end") != std::string::npos);
    }

    SUBCASE("mark times are hit exactly")
    {
        SystemState s = bump_state(8, 0.3, 0.5, -0.05, eos);
        StepControl ctrl;
        ctrl.t_end = 0.21;
        std::vector<double> hook_marks;
        RunResult r = run(std::move(s), ctrl, false,
                          [&](const HookContext& hc) {
                              if (hc.at_mark)
                                  hook_marks.push_back(hc.state.time);
                              return HookAction::proceed;
                          },
                          1000000, {0.07, 0.14});
        CHECK(r.verdict == Verdict::completed);
        REQUIRE(hook_marks.size() >= 3);
        CHECK(hook_marks[0] == doctest::Approx(0.07).epsilon(1e-12));
        CHECK(hook_marks[1] == doctest::Approx(0.14).epsilon(1e-12));
        CHECK(hook_marks.back() == doctest::Approx(0.21).epsilon(1e-12));
    }

    SUBCASE("monitor vote ends the run as suspected blowup")
    {
        SystemState s = bump_state(8, 0.3, 0.5, -0.05, eos);
        StepControl ctrl;
        ctrl.t_end = 10.0;
        int calls = 0;
        RunResult r = run(std::move(s), ctrl, false,
                          [&](const HookContext&) {
                              return ++calls >= 4 ? HookAction::halt_blowup
                                                  : HookAction::proceed;
                          },
                          1);
        CHECK(r.verdict == Verdict::blowup_suspected);
        CHECK(r.detail.find("monitor") != std::string::npos);
    }

    SUBCASE("monitor can also end the run as completed")
    {
        SystemState s = bump_state(8, 0.3, 0.5, -0.05, eos);
        StepControl ctrl;
        ctrl.t_end = 10.0;
        int calls = 0;
        RunResult r = run(std::move(s), ctrl, false,
                          [&](const HookContext&) {
                              return ++calls >= 3 ? HookAction::halt_completed
                                                  : HookAction::proceed;
                          },
                          1);
        CHECK(r.verdict == Verdict::completed);
    }

    SUBCASE("non-finite initial state is a corruption verdict")
    {
        SystemState s = bump_state(8, 0.3, 0.5, 0.0, eos);
        s.alpha.at(2, 2, 2) = std::numeric_limits<double>::infinity();
        StepControl ctrl;
        ctrl.t_end = 1.0;
        RunResult r = run(std::move(s), ctrl, false,
                          [](const HookContext&) { return HookAction::proceed; }, 1);
        CHECK(r.verdict == Verdict::corrupted_state);
    }

    SUBCASE("dt_min underflow surfaces as suspected blowup")
    {
        SystemState s = bump_state(8, 0.3, 0.5, -0.05, eos);
        StepControl ctrl;
        ctrl.t_end = 1.0;
        ctrl.dt_min = 1.0; // impossible to satisfy
        RunResult r = run(std::move(s), ctrl, false,
                          [](const HookContext&) { return HookAction::proceed; }, 1);
        CHECK(r.verdict == Verdict::blowup_suspected);
    }

    SUBCASE("step counter matches the number of advances")
    {
        SystemState s = bump_state(8, 0.3, 0.5, -0.05, eos);
        StepControl ctrl;
        ctrl.t_end = 0.05;
        long seen = 0;
        RunResult r = run(std::move(s), ctrl, false,
                          [&](const HookContext& hc) {
                              seen = std::max(seen, hc.step_index);
                              return HookAction::proceed;
                          },
                          1);
        CHECK(r.verdict == Verdict::completed);
        CHECK(r.steps == seen);
        CHECK(r.state.time == doctest::Approx(0.05).epsilon(1e-12));
    }
}

TEST_CASE("verdict names")
{
    CHECK(verdict_name(Verdict::completed) == "completed");
    CHECK(verdict_name(Verdict::blowup_suspected) == "blowup-suspected");
    CHECK(verdict_name(Verdict::corrupted_state) == "corrupted-state");
}

TEST_CASE("manufactured solutions: registered cases and convergence")
{
    const auto cases = mms_cases();
    CHECK(std::find(cases.begin(), cases.end(), "trig") != cases.end());
    CHECK(std::find(cases.begin(), cases.end(), "discrete-stationary") != cases.end());
    CHECK_THROWS_AS(mms_run("no-such-case", {8}, 0.1), std::invalid_argument);

    // the discrete-stationary case isolates time-stepping roundoff
    MmsReport stat = mms_run("discrete-stationary", {16}, 0.25);
    REQUIRE(stat.rows.size() == 1);
    CHECK(stat.rows[0].err_rho_l1 < 1e-12);
    CHECK(stat.rows[0].err_w_l1 < 1e-12);

    // the trig case measures the full production update's spatial order
    MmsReport trig = mms_run("trig", {16, 32}, 0.25);
    REQUIRE(trig.rows.size() == 2);
    CHECK(trig.rows[1].order_rho_l1 > 1.8);
    CHECK(trig.rows[1].order_rho_l1 < 2.6);
    CHECK(trig.rows[1].order_w_l1 > 1.8);
    CHECK(trig.rows[1].order_w_l1 < 2.6);
    CHECK(trig.rows[1].err_rho_l1 < trig.rows[0].err_rho_l1);
}
