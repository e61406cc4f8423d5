#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cloudlab/diagnostics.hpp>
#include <cloudlab/hyper.hpp>
#include <cloudlab/regions.hpp>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace cloudlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

CartesianGrid unit_box(int n, int ghost = 2)
{
    const double h = 2.0 / n;
    return CartesianGrid({n, n, n}, {h, h, h}, {-1.0 + 0.5 * h, -1.0 + 0.5 * h, -1.0 + 0.5 * h},
                         ghost);
}

Mask ball_mask(const CartesianGrid& g, double R)
{
    Mask m(g);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const Vec3 p = g.position(i, j, k);
                if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < R * R)
                    m.at(i, j, k) = 1;
            }
    return m;
}

SystemState bump_state(int n, double A, double R, const EquationOfState& eos)
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
            }
    fill_ghosts(s.alpha, GhostPolicy::zero);
    fill_ghosts(s.w, GhostPolicy::extrapolate);
    return s;
}

SystemState uniform_state(int n, double rho, const Vec3& w, const EquationOfState& eos)
{
    CartesianGrid g = unit_box(n);
    SystemState s;
    s.eos = eos;
    s.alpha = ScalarField(g);
    s.w = VectorField(g);
    const double a = eos.density_to_makino(rho);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                s.alpha.at(i, j, k) = a;
                for (int c = 0; c < 3; ++c)
                    s.w.at(c, i, j, k) = w[c];
            }
    fill_ghosts(s.alpha, GhostPolicy::zero);
    fill_ghosts(s.w, GhostPolicy::extrapolate);
    return s;
}

} // namespace

TEST_CASE("decomposition of an affine velocity field is exact")
{
    CartesianGrid g = unit_box(16);
    // w_k = sum_j A[k][j] x_j + b_k  ->  W[j*3+k] = d_j w_k = A[k][j]
    const double A[3][3] = {{0.3, 1.0, -2.0}, {0.5, -0.7, 0.25}, {1.5, 2.0, 0.9}};
    VectorField w(g);
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i) {
                const Vec3 p = g.position(i, j, k);
                for (int c = 0; c < 3; ++c)
                    w.at(c, i, j, k) =
                        A[c][0] * p[0] + A[c][1] * p[1] + A[c][2] * p[2] + 0.1 * c;
            }
    fill_ghosts(w, GhostPolicy::extrapolate);

    Mask region = ball_mask(g, 0.7);
    auto [W, kin] = decompose(w, region);
    REQUIRE(W.n_valid() > 0);
    long n_checked = 0;
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i) {
                const long q = g.idx_interior(i, j, k);
                if (!W.valid[q])
                    continue;
                ++n_checked;
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) {
                        CHECK(W.W[r * 3 + c][q] == doctest::Approx(A[c][r]).epsilon(1e-12));
                        const double th_expect = 0.5 * (A[c][r] + A[r][c]);
                        const double om_expect = 0.5 * (A[r][c] - A[c][r]);
                        CHECK(kin.theta_jk[r * 3 + c][q] ==
                              doctest::Approx(th_expect).epsilon(1e-12));
                        CHECK(kin.omega_jk[r * 3 + c][q] ==
                              doctest::Approx(om_expect).epsilon(1e-12));
                    }
                CHECK(kin.theta[q] ==
                      doctest::Approx(A[0][0] + A[1][1] + A[2][2]).epsilon(1e-12));
            }
    CHECK(n_checked == (long)W.n_valid());
}

TEST_CASE("rigid rotation: omega_01 = -omega for counterclockwise flow")
{
    const double omega = 1.3;
    CartesianGrid g = unit_box(12);
    VectorField w(g);
    for (int k = 0; k < 12; ++k)
        for (int j = 0; j < 12; ++j)
            for (int i = 0; i < 12; ++i) {
                const Vec3 p = g.position(i, j, k);
                w.at(0, i, j, k) = -omega * p[1];
                w.at(1, i, j, k) = omega * p[0];
            }
    fill_ghosts(w, GhostPolicy::extrapolate);
    Mask region = ball_mask(g, 0.6);
    auto [W, kin] = decompose(w, region);
    for (long q = 0; q < g.ncell(); ++q) {
        if (!kin.valid[q])
            continue;
        CHECK(kin.omega_jk[0 * 3 + 1][q] == doctest::Approx(-omega).epsilon(1e-12));
        CHECK(kin.omega_jk[1 * 3 + 0][q] == doctest::Approx(omega).epsilon(1e-12));
        CHECK(std::fabs(kin.theta[q]) < 1e-12);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                CHECK(std::fabs(kin.theta_jk[r * 3 + c][q]) < 1e-12);
    }
}

TEST_CASE("decomposition identities on random smooth fields")
{
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-1, 1);
    CartesianGrid g = unit_box(12);
    for (int trial = 0; trial < 10; ++trial) {
        VectorField w(g);
        double amp[3][3], ph[3][3];
        for (int c = 0; c < 3; ++c)
            for (int m = 0; m < 3; ++m) {
                amp[c][m] = u(rng);
                ph[c][m] = kPi * u(rng);
            }
        for (int k = 0; k < 12; ++k)
            for (int j = 0; j < 12; ++j)
                for (int i = 0; i < 12; ++i) {
                    const Vec3 p = g.position(i, j, k);
                    for (int c = 0; c < 3; ++c)
                        w.at(c, i, j, k) = amp[c][0] * std::sin(kPi * p[0] + ph[c][0]) +
                                           amp[c][1] * std::cos(kPi * p[1] + ph[c][1]) +
                                           amp[c][2] * std::sin(kPi * p[2] + ph[c][2]);
                }
        fill_ghosts(w, GhostPolicy::extrapolate);
        Mask region = ball_mask(g, 0.8);
        auto [W, kin] = decompose(w, region);
        double worst = 0.0;
        for (long q = 0; q < g.ncell(); ++q) {
            if (!kin.valid[q])
                continue;
            double trace = 0.0;
            for (int r = 0; r < 3; ++r) {
                trace += kin.theta_jk[r * 3 + r][q];
                for (int c = 0; c < 3; ++c) {
                    // symmetry / antisymmetry
                    worst = std::max(worst, std::fabs(kin.theta_jk[r * 3 + c][q] -
                                                      kin.theta_jk[c * 3 + r][q]));
                    worst = std::max(worst, std::fabs(kin.omega_jk[r * 3 + c][q] +
                                                      kin.omega_jk[c * 3 + r][q]));
                    // reconstruction W = theta - omega
                    worst = std::max(worst,
                                     std::fabs(kin.theta_jk[r * 3 + c][q] -
                                               kin.omega_jk[r * 3 + c][q] -
                                               W.W[r * 3 + c][q]));
                }
            }
            worst = std::max(worst, std::fabs(trace - kin.theta[q]));
        }
        CHECK(worst < 1e-13);
    }
}

TEST_CASE("region gradient: exact on affine fields, one-sided at edges")
{
    CartesianGrid g = unit_box(16);
    ScalarField f(g);
    const Vec3 b = {1.5, -0.4, 2.0};
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i) {
                const Vec3 p = g.position(i, j, k);
                f.at(i, j, k) = 0.2 + b[0] * p[0] + b[1] * p[1] + b[2] * p[2];
            }
    fill_ghosts(f, GhostPolicy::zero); // halo content must not matter

    Mask region = ball_mask(g, 0.6);
    RegionGradient rg = region_gradient(f, region);
    long n_valid = 0;
    for (long q = 0; q < g.ncell(); ++q) {
        if (!rg.valid[q])
            continue;
        ++n_valid;
        for (int c = 0; c < 3; ++c)
            CHECK(rg.d[c][q] == doctest::Approx(b[c]).epsilon(1e-12));
    }
    CHECK(n_valid > 200);
    // edge cells (with a one-sided stencil) are included among the valid ones
    Mask shell = boundary_shell(region);
    long shell_valid = 0;
    for (long q = 0; q < g.ncell(); ++q)
        shell_valid += (shell.m[q] && rg.valid[q]) ? 1 : 0;
    CHECK(shell_valid > 0);
}

TEST_CASE("continuation record: exact integrals for a homologous flow")
{
    // w(t) = H(t) x with H = 1/(1-t): the field is linear in space, so every
    // stencil is exact and the sup norms are known in closed form:
    //   strip |W| = sqrt(3) H,  |div w| = 3 H,  |Omega| = 0,
    //   |grad w| = sqrt(3) H,   |grad alpha| = const (static profile).
    // Integral of H over [0, 0.9] is ln 10.
    EquationOfState eos(1.0, 2.0, RegularityCase::B);
    const int n = 16;
    SystemState s = bump_state(n, 0.4, 0.6, eos);
    const CartesianGrid& g = s.alpha.grid;
    Mask support = support_mask(s.alpha, 0.0);
    RegionDecomposition rd = strip_split(support, 2.0 * g.spacing[0]);

    ContinuationRecord rec;
    rec.epsilon = rd.epsilon;
    const double t_end = 0.9;
    const int nsamp = 600;
    const double dt = t_end / nsamp;
    for (int it = 0; it <= nsamp; ++it) {
        const double t = it * dt;
        const double H = 1.0 / (1.0 - t);
        s.time = t;
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const Vec3 p = g.position(i, j, k);
                    for (int c = 0; c < 3; ++c)
                        s.w.at(c, i, j, k) = H * p[c];
                }
        fill_ghosts(s.w, GhostPolicy::extrapolate);
        continuation_update(rec, s, rd, it == 0 ? 0.0 : dt);
    }
    REQUIRE(rec.samples.size() == (std::size_t)nsamp + 1);
    REQUIRE(rec.integrals.size() == rec.samples.size());

    const double L = std::log(10.0);
    const auto& I = rec.integrals.back();
    CHECK(I[0] == doctest::Approx(std::sqrt(3.0) * L).epsilon(1e-4));
    CHECK(I[1] == doctest::Approx(3.0 * L).epsilon(1e-4));
    CHECK(I[2] == 0.0); // rigid part absent; differences cancel exactly
    CHECK(I[4] == doctest::Approx(std::sqrt(3.0) * L).epsilon(1e-4));
    // static alpha: its term integrates to sup |grad alpha| * t exactly
    const double s3 = rec.samples[0].sup_grad_alpha;
    CHECK(s3 > 0.0);
    CHECK(I[3] == doctest::Approx(s3 * t_end).epsilon(1e-10));

    // bookkeeping identities
    CHECK(rec.weak_value == doctest::Approx(I[3] + I[4]).epsilon(1e-12));
    CHECK(rec.strong_value == doctest::Approx(I[0] + I[1] + I[2] + I[3]).epsilon(1e-12));
    CHECK(rec.weak_series.back() == doctest::Approx(rec.weak_value).epsilon(1e-12));
    CHECK(rec.strong_series.back() == doctest::Approx(rec.strong_value).epsilon(1e-12));
    // all tracked integrals are non-negative and non-decreasing
    for (int t = 0; t < kContinuationTerms; ++t) {
        CHECK(rec.integrals.back()[t] >= 0.0);
        CHECK(rec.integrals.back()[t] >= rec.integrals[rec.integrals.size() / 2][t]);
    }

    // the divergence is fast enough to clear the growth gate
    BlowupThresholds th;
    th.weak = 1e9;
    th.strong = 3.0;
    th.growth_rate = 1.0;
    BlowupClassification cls = blowup_classify(rec, th, 8);
    CHECK(cls.verdict == BlowupVerdict::strong_divergence);
    CHECK(cls.growth_exponent > th.growth_rate);

    // term names are part of the reporting contract
    CHECK(std::string(continuation_term_name(0)) == "strip |W|");
    CHECK(std::string(continuation_term_name(1)) == "interior expansion");
    CHECK(std::string(continuation_term_name(2)) == "interior rotation");
    CHECK(std::string(continuation_term_name(3)) == "support |grad alpha|");
    CHECK(std::string(continuation_term_name(4)) == "support |grad w|");
}

TEST_CASE("classification pins the fastest-growing term")
{
    // Central expansion bump with a diverging rate plus a constant rigid
    // rotation.  Only the expansion terms grow super-linearly, so the strong
    // verdict must name "interior expansion" (the rotation and the static
    // alpha gradient accumulate linearly; their trailing log-slopes decay
    // like 1/t).  The bump vanishes for r >= 0.3 while the strip starts at
    // r ~ 0.475, so strip stencils never touch it.
    EquationOfState eos(1.0, 2.0, RegularityCase::B);
    const int n = 32;
    SystemState s = bump_state(n, 0.4, 0.6, eos);
    const CartesianGrid& g = s.alpha.grid;
    Mask support = support_mask(s.alpha, 0.0);
    RegionDecomposition rd = strip_split(support, 2.0 * g.spacing[0]);

    const double Rc = 0.3, om = 0.3;
    ContinuationRecord rec;
    rec.epsilon = rd.epsilon;
    const double t_end = 0.9;
    const int nsamp = 300;
    const double dt = t_end / nsamp;
    for (int it = 0; it <= nsamp; ++it) {
        const double t = it * dt;
        const double H = 1.0 / (1.0 - t);
        s.time = t;
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const Vec3 p = g.position(i, j, k);
                    const double u = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (Rc * Rc);
                    const double prof = u < 1.0 ? (1.0 - u) * (1.0 - u) : 0.0;
                    s.w.at(0, i, j, k) = H * p[0] * prof - om * p[1];
                    s.w.at(1, i, j, k) = H * p[1] * prof + om * p[0];
                    s.w.at(2, i, j, k) = H * p[2] * prof;
                }
        fill_ghosts(s.w, GhostPolicy::extrapolate);
        continuation_update(rec, s, rd, it == 0 ? 0.0 : dt);
    }

    // the strip only ever sees the rotation; the expansion term dominates
    CHECK(rec.integrals.back()[0] < 0.2 * rec.integrals.back()[1]);

    BlowupThresholds th;
    th.weak = 1e9;
    th.strong = 2.0;
    th.growth_rate = 1.0;
    BlowupClassification cls = blowup_classify(rec, th, 8);
    CHECK(cls.verdict == BlowupVerdict::strong_divergence);
    CHECK(cls.culprit == std::string("interior expansion"));
    CHECK(cls.growth_exponent > th.growth_rate);
    // classification is a pure function of the record
    CHECK(cls.growth_exponent == blowup_classify(rec, th, 8).growth_exponent);
}

TEST_CASE("classification gates and edge cases")
{
    EquationOfState eos(1.0, 2.0, RegularityCase::B);
    const int n = 12;
    SystemState s = bump_state(n, 0.4, 0.6, eos);
    const CartesianGrid& g = s.alpha.grid;
    Mask support = support_mask(s.alpha, 0.0);
    RegionDecomposition rd = strip_split(support, 2.0 * g.spacing[0]);

    // constant homologous contraction: integrals grow linearly, log-slope
    // decays like 1/t, so the growth gate blocks a strong verdict
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec3 p = g.position(i, j, k);
                for (int c = 0; c < 3; ++c)
                    s.w.at(c, i, j, k) = -0.4 * p[c];
            }
    fill_ghosts(s.w, GhostPolicy::extrapolate);

    ContinuationRecord rec;
    for (int it = 0; it <= 300; ++it) {
        s.time = it * 0.1;
        continuation_update(rec, s, rd, it == 0 ? 0.0 : 0.1);
    }
    CHECK(rec.strong_value > 10.0); // well above the threshold below

    BlowupThresholds th;
    th.weak = 1e9;
    th.strong = 1.0;
    th.growth_rate = 1.0;
    BlowupClassification cls = blowup_classify(rec, th, 8);
    CHECK(cls.verdict == BlowupVerdict::none); // growth gate held it back

    // the weak path has no growth gate
    BlowupThresholds tw;
    tw.weak = 1.0;
    tw.strong = 1e9;
    tw.growth_rate = 1.0;
    BlowupClassification cw = blowup_classify(rec, tw, 8);
    CHECK(cw.verdict == BlowupVerdict::weak_divergence);
    CHECK_FALSE(cw.culprit.empty());

    // too few samples -> none
    ContinuationRecord tiny;
    s.time = 0.0;
    continuation_update(tiny, s, rd, 0.0);
    CHECK(blowup_classify(tiny, th, 8).verdict == BlowupVerdict::none);

    // configuration errors
    BlowupThresholds bad;
    CHECK_THROWS_AS(blowup_classify(rec, bad, 8), std::invalid_argument);
    CHECK_THROWS_AS(blowup_classify(rec, th, 1), std::invalid_argument);

    // verdict names
    CHECK(std::string(blowup_verdict_name(BlowupVerdict::none)) == "none");
    CHECK(std::string(blowup_verdict_name(BlowupVerdict::weak_divergence)) ==
          "weak-divergence");
    CHECK(std::string(blowup_verdict_name(BlowupVerdict::strong_divergence)) ==
          "strong-divergence");
}

TEST_CASE("kinematic cache reproduces the direct update")
{
    EquationOfState eos(1.0, 2.0, RegularityCase::B);
    SystemState s = bump_state(16, 0.4, 0.6, eos);
    const CartesianGrid& g = s.alpha.grid;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i)
                for (int c = 0; c < 3; ++c)
                    s.w.at(c, i, j, k) = u(rng);
    fill_ghosts(s.w, GhostPolicy::extrapolate);

    Mask support = support_mask(s.alpha, 0.0);
    KinematicCache cache = kinematic_cache(s, support);
    for (double factor : {2.0, 3.0}) {
        RegionDecomposition rd = strip_split(support, factor * g.spacing[0]);
        ContinuationRecord ra, rb;
        continuation_update(ra, s, rd, 0.0);
        continuation_update(rb, s, rd, 0.0, cache);
        REQUIRE(ra.samples.size() == 1);
        REQUIRE(rb.samples.size() == 1);
        CHECK(ra.samples[0].sup_w_strip == rb.samples[0].sup_w_strip);
        CHECK(ra.samples[0].sup_theta_interior == rb.samples[0].sup_theta_interior);
        CHECK(ra.samples[0].sup_omega_interior == rb.samples[0].sup_omega_interior);
        CHECK(ra.samples[0].sup_grad_alpha == rb.samples[0].sup_grad_alpha);
        CHECK(ra.samples[0].sup_grad_w == rb.samples[0].sup_grad_w);
    }
}

TEST_CASE("relative entropy: frozen values, positivity, zero iff equal")
{
    EquationOfState eos(1.0, 2.0, RegularityCase::B);

    SUBCASE("density term: rho 1 vs 2 gives unit entropy density")
    {
        SystemState s1 = uniform_state(8, 1.0, {0, 0, 0}, eos);
        SystemState s2 = uniform_state(8, 2.0, {0, 0, 0}, eos);
        auto [field, total] = relative_entropy(s1, s2);
        // (rho2^2 - rho1^2 - 2 rho1 (rho2-rho1))/(gamma-1) = (4-1-2)/1 = 1
        CHECK(field.at(3, 3, 3) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(total == doctest::Approx(8.0).epsilon(1e-9)); // box volume
    }

    SUBCASE("kinetic term: rho2=1, dw=(2,0,0) gives 2 per unit volume")
    {
        SystemState s1 = uniform_state(8, 1.0, {0, 0, 0}, eos);
        SystemState s2 = uniform_state(8, 1.0, {2, 0, 0}, eos);
        auto [field, total] = relative_entropy(s1, s2);
        CHECK(field.at(3, 3, 3) == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(total == doctest::Approx(16.0).epsilon(1e-9));
    }

    SUBCASE("eta(s, s) vanishes identically")
    {
        SystemState s = bump_state(12, 0.4, 0.5, eos);
        for (int k = 0; k < 12; ++k)
            for (int j = 0; j < 12; ++j)
                for (int i = 0; i < 12; ++i)
                    s.w.at(0, i, j, k) = 0.3;
        fill_ghosts(s.w, GhostPolicy::extrapolate);
        auto [field, total] = relative_entropy(s, s);
        CHECK(total == 0.0);
        for (long q = 0; q < (long)field.v.size(); ++q)
            CHECK(field.v[q] == 0.0);
    }

    SUBCASE("positivity on random pairs, both regularity cases")
    {
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> ur(0.0, 3.0);
        std::uniform_real_distribution<double> uw(-2.0, 2.0);
        for (const auto rc : {RegularityCase::A, RegularityCase::B}) {
            EquationOfState e(0.7, rc == RegularityCase::A ? 1.4 : 1.8, rc);
            for (int trial = 0; trial < 30; ++trial) {
                CartesianGrid g = unit_box(8);
                SystemState s1, s2;
                s1.eos = s2.eos = e;
                s1.alpha = ScalarField(g);
                s2.alpha = ScalarField(g);
                s1.w = VectorField(g);
                s2.w = VectorField(g);
                for (int k = 0; k < 8; ++k)
                    for (int j = 0; j < 8; ++j)
                        for (int i = 0; i < 8; ++i) {
                            s1.alpha.at(i, j, k) = e.density_to_makino(ur(rng));
                            s2.alpha.at(i, j, k) = e.density_to_makino(ur(rng));
                            for (int c = 0; c < 3; ++c) {
                                s1.w.at(c, i, j, k) = uw(rng);
                                s2.w.at(c, i, j, k) = uw(rng);
                            }
                        }
                auto [field, total] = relative_entropy(s1, s2);
                CHECK(total >= -1e-13);
                double fmin = 0.0;
                for (int k = 0; k < 8; ++k)
                    for (int j = 0; j < 8; ++j)
                        for (int i = 0; i < 8; ++i)
                            fmin = std::min(fmin, field.at(i, j, k));
                CHECK(fmin >= -1e-13);
            }
        }
    }

    SUBCASE("grid and eos mismatches are rejected")
    {
        SystemState a = uniform_state(8, 1.0, {0, 0, 0}, eos);
        SystemState b = uniform_state(12, 1.0, {0, 0, 0}, eos);
        CHECK_THROWS_AS(relative_entropy(a, b), std::invalid_argument);
        SystemState c = uniform_state(8, 1.0, {0, 0, 0},
                                      EquationOfState(0.5, 2.0, RegularityCase::B));
        CHECK_THROWS_AS(relative_entropy(a, c), std::invalid_argument);
    }
}

TEST_CASE("diffuse residual separates boundary types")
{
    const double A = 0.4, R = 0.5;
    EquationOfState eos(1.0, 2.0, RegularityCase::B);
    const int n = 64;
    CartesianGrid g = unit_box(n);
    const double h = g.spacing[0];

    // physical vacuum: rho = A (1 - r^2/R^2), alpha = c sqrt(rho);
    // |grad rho^{gamma-1}| = |grad rho| -> plateau 2A/R at the boundary
    SystemState phys;
    phys.eos = eos;
    phys.alpha = ScalarField(g);
    phys.w = VectorField(g);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec3 p = g.position(i, j, k);
                const double r2 = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (R * R);
                if (r2 < 1.0)
                    phys.alpha.at(i, j, k) = eos.density_to_makino(A * (1.0 - r2));
            }
    fill_ghosts(phys.alpha, GhostPolicy::zero);
    fill_ghosts(phys.w, GhostPolicy::extrapolate);

    Mask psup = support_mask(phys.alpha, 0.0);
    RegionDecomposition prd = strip_split(psup, 3.0 * h);
    DiffuseResidual pres = diffuse_residual(phys, prd);
    const double plateau = 2.0 * A / R;
    CHECK(pres.sup == doctest::Approx(plateau).epsilon(0.12));
    REQUIRE(pres.bin_distance.size() == pres.bin_sup.size());
    REQUIRE(pres.bin_sup.size() >= 2);
    // the residual does not taper toward the boundary: the nearest bin stays
    // at the plateau scale, and no bin exceeds the overall sup
    CHECK(pres.bin_sup.front() > 0.5 * plateau);
    double bmax = 0.0;
    for (double v : pres.bin_sup)
        bmax = std::max(bmax, v);
    CHECK(bmax == pres.sup);

    // diffuse bump: alpha = A (1 - r^2/R^2)^4; the residual vanishes toward
    // the boundary, so narrower strips see strictly smaller sups
    SystemState diff = bump_state(n, A, R, eos);
    Mask dsup = support_mask(diff.alpha, 0.0);
    double prev = 1e300;
    double sup5 = 0.0;
    for (double fac : {5.0, 3.0, 2.0}) {
        RegionDecomposition rd = strip_split(dsup, fac * h);
        DiffuseResidual res = diffuse_residual(diff, rd);
        if (fac == 5.0)
            sup5 = res.sup;
        CHECK(res.sup < prev);
        prev = res.sup;
    }
    CHECK(sup5 < 0.1 * plateau);

    // empty strip is rejected
    SystemState empty = bump_state(16, 0.0, 0.5, eos);
    Mask esup = support_mask(empty.alpha, 0.0);
    CHECK(esup.count() == 0);
    RegionDecomposition erd;
    erd.support = esup;
    erd.strip = Mask(empty.alpha.grid);
    erd.interior = Mask(empty.alpha.grid);
    erd.epsilon = 2.0 * empty.alpha.grid.spacing[0];
    CHECK_THROWS_AS(diffuse_residual(empty, erd), std::invalid_argument);
}

TEST_CASE("conservation ledger on closed-form states")
{
    EquationOfState eos(1.0, 2.0, RegularityCase::B);

    SUBCASE("zero state")
    {
        SystemState s = bump_state(8, 0.0, 0.5, eos);
        ConservationRecord c = conservation(s);
        CHECK(c.mass == 0.0);
        CHECK(c.momentum[0] == 0.0);
        CHECK(c.energy == 0.0);
        CHECK(c.clipped_mass == 0.0);
    }

    SUBCASE("uniform state: frozen integrals")
    {
        const double rho = 0.7;
        const Vec3 U = {0.3, -0.2, 0.5};
        SystemState s = uniform_state(8, rho, U, eos);
        ConservationRecord c = conservation(s);
        const double V = 8.0; // box [-1,1]^3
        const double M = rho * V;
        CHECK(c.mass == doctest::Approx(M).epsilon(1e-12));
        for (int a = 0; a < 3; ++a)
            CHECK(c.momentum[a] == doctest::Approx(M * U[a]).epsilon(1e-12));
        // energy = kinetic + internal = M |U|^2/2 + K rho^gamma/(gamma-1) V
        const double u2 = U[0] * U[0] + U[1] * U[1] + U[2] * U[2];
        const double expect = 0.5 * M * u2 + 1.0 * rho * rho * V;
        CHECK(c.energy == doctest::Approx(expect).epsilon(1e-10));

        // gravitational term: phi = -2 adds (1/2) integral rho phi = -M
        ScalarField phi(s.alpha.grid);
        phi.fill(-2.0);
        ConservationRecord cg = conservation(s, &phi);
        CHECK(cg.energy == doctest::Approx(expect - M).epsilon(1e-10));
    }
}

TEST_CASE("discrete Sobolev norm: spike oracle and monotonicity")
{
    CartesianGrid g({8, 8, 8}, {1, 1, 1}, {0, 0, 0}, 2);
    SystemState s;
    s.eos = EquationOfState(1.0, 2.0, RegularityCase::B);
    s.alpha = ScalarField(g);
    s.w = VectorField(g);
    s.alpha.at(4, 4, 4) = 1.0;

    // order 1: value 1, all first differences vanish at the spike -> norm 1
    CHECK(discrete_sobolev(s, 1, 0.0) == doctest::Approx(1.0).epsilon(1e-13));
    // order 2: adds three second differences of -2 each -> sqrt(1 + 12)
    CHECK(discrete_sobolev(s, 2, 0.0) == doctest::Approx(std::sqrt(13.0)).epsilon(1e-13));
    // order 3: every third-order stencil has zero weight on the spike cell
    CHECK(discrete_sobolev(s, 3, 0.0) == doctest::Approx(std::sqrt(13.0)).epsilon(1e-13));
    // order 4: pure fourth differences contribute 3*6^2, the three mixed
    // (2,2,0) stencils contribute 3*4^2 -> sqrt(13 + 108 + 48) = 13
    CHECK(discrete_sobolev(s, 4, 0.0) == doctest::Approx(13.0).epsilon(1e-13));

    CHECK_THROWS_AS(discrete_sobolev(s, 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(discrete_sobolev(s, 5, 0.0), std::invalid_argument);

    // empty support -> 0
    CHECK(discrete_sobolev(s, 2, 2.0) == 0.0);

    // monotone in the order on a random smooth state
    EquationOfState eos(1.0, 2.0, RegularityCase::B);
    SystemState r = bump_state(16, 0.4, 0.6, eos);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i)
                for (int c = 0; c < 3; ++c)
                    r.w.at(c, i, j, k) = u(rng);
    double prev = 0.0;
    for (int order = 1; order <= 4; ++order) {
        const double v = discrete_sobolev(r, order, 0.0);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(prev > 0.0);
}

TEST_CASE("proportional fit through the origin")
{
    SUBCASE("exact proportionality")
    {
        std::vector<double> x = {0.0, 1.0, 2.0, 3.5, 7.0};
        std::vector<double> y;
        for (double v : x)
            y.push_back(3.0 * v);
        ProportionalFit f = fit_apriori(x, y);
        CHECK(f.C == doctest::Approx(3.0).epsilon(1e-14));
        CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("near proportionality keeps r2 high")
    {
        std::vector<double> x, y;
        std::mt19937 rng(2);
        std::uniform_real_distribution<double> u(-0.01, 0.01);
        for (int i = 0; i <= 40; ++i) {
            const double xv = 0.1 * i;
            x.push_back(xv);
            y.push_back(2.0 * xv + u(rng));
        }
        ProportionalFit f = fit_apriori(x, y);
        CHECK(f.C == doctest::Approx(2.0).epsilon(0.01));
        CHECK(f.r2 > 0.99);
    }

    SUBCASE("degenerate inputs")
    {
        std::vector<double> zeros(5, 0.0), ones(5, 1.0);
        ProportionalFit f = fit_apriori(zeros, ones);
        CHECK(f.C == 0.0);
        CHECK_THROWS_AS(fit_apriori({1.0, 2.0}, {1.0}), std::invalid_argument);
        CHECK_THROWS_AS(fit_apriori({}, {}), std::invalid_argument);
    }

    SUBCASE("anti-correlated data yields a negative C and poor r2")
    {
        std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
        std::vector<double> y = {-1.0, -2.1, -2.9, -4.2};
        ProportionalFit f = fit_apriori(x, y);
        CHECK(f.C < 0.0);
    }
}
