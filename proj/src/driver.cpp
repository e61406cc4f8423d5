#include "cloudlab/driver.hpp"

#include "cloudlab/config.hpp"
#include "cloudlab/diagnostics.hpp"
#include "cloudlab/flow.hpp"
#include "cloudlab/mms.hpp"
#include "cloudlab/reduce.hpp"
#include "cloudlab/scenarios.hpp"
#include "cloudlab/snapshot.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace cloudlab {
namespace {

using nlohmann::json;

std::string fmt(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double interior_alpha_max(const SystemState& s)
{
    const CartesianGrid& g = s.alpha.grid;
    const int nx = g.dims[0], ny = g.dims[1];
    return parallel_max(g.ncell(), [&](long m) {
        const int i = (int)(m % nx);
        const int j = (int)((m / nx) % ny);
        const int k = (int)(m / ((long)nx * ny));
        return s.alpha.v[g.idx(i, j, k)];
    });
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunArtifacts {
    std::vector<std::pair<std::string, double>> snapshots;  // file, time
    BlowupClassification classification;
    double classification_epsilon = 0.0;
    long steps = 0;
};

void write_manifest(const std::string& dir, const RunConfig& cfg, const std::string& verdict,
                    const std::string& detail, int exit_code, const RunArtifacts& art,
                    double t_final, double clipped_abs, double clipped_net)
{
    json j;
    j["version"] = kVersion;
    j["command"] = "run";
    j["verdict"] = verdict;
    j["detail"] = detail;
    j["exit_code"] = exit_code;
    j["steps"] = art.steps;
    j["t_final"] = t_final;
    j["clipped_mass_abs"] = clipped_abs;
    j["clipped_mass_net"] = clipped_net;
    j["config"] = json::parse(config_echo(cfg));
    j["snapshots"] = json::array();
    for (const auto& s : art.snapshots)
        j["snapshots"].push_back({{"file", s.first}, {"time", s.second}});
    j["blowup"]["verdict"] = blowup_verdict_name(art.classification.verdict);
    j["blowup"]["culprit"] = art.classification.culprit;
    j["blowup"]["growth_exponent"] = art.classification.growth_exponent;
    j["blowup"]["epsilon"] = art.classification_epsilon;

    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    out << j.dump(2) << "\n";
}

} // namespace

int run_command(const std::string& config_path)
{
    RunConfig cfg;
    SystemState state;
    try {
        cfg = load_config(config_path);
        state = make_scenario(cfg.scenario, cfg.grid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    StepControl ctrl = cfg.control;
    if (ctrl.floor <= 0.0)
        ctrl.floor = 1e-12 * interior_alpha_max(state);

    const std::string dir = cfg.output.directory;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        std::cerr << "error: cannot create output directory '" << dir << "'\n";
        return 2;
    }

    std::ofstream diag_csv(dir + "/diagnostics.csv", std::ios::binary);
    std::ofstream marker_csv(dir + "/markers.csv", std::ios::binary);
    if (!diag_csv || !marker_csv) {
        std::cerr << "error: cannot write into output directory '" << dir << "'\n";
        return 2;
    }

    const DiagnosticsConfig& dg = cfg.diagnostics;
    const int neps = (int)dg.epsilon_factors.size();
    // the record closest to 3 cell widths drives the blowup classification
    int def_eps = 0;
    for (int e = 1; e < neps; ++e)
        if (std::fabs(dg.epsilon_factors[e] - 3.0) <
            std::fabs(dg.epsilon_factors[def_eps] - 3.0))
            def_eps = e;
    const double h_min =
        std::min({cfg.grid.spacing[0], cfg.grid.spacing[1], cfg.grid.spacing[2]});

    {
        std::ostringstream h;
        h << "step,t,dt,mass,mom_x,mom_y,mom_z,energy,clipped_net,clipped_abs,alpha_max,"
             "sup_grad_alpha,sup_grad_w,weak_value";
        for (int e = 0; e < neps; ++e)
            h << ",supW_strip_e" << e << ",suptheta_int_e" << e << ",supomega_int_e" << e
              << ",strong_e" << e;
        h << ",sobolev_h3,diffuse_sup,verdict,culprit";
        diag_csv << h.str() << "\n";
    }
    marker_csv << "id,t,xi_x,xi_y,xi_z,x,y,z,w_x,w_y,w_z,alive\n";

    std::vector<double> marks;
    if (cfg.output.snapshot_dt > 0.0) {
        const long nmark = (long)std::floor(ctrl.t_end / cfg.output.snapshot_dt * (1.0 + 1e-12));
        for (long k = 1; k <= nmark; ++k)
            marks.push_back((double)k * cfg.output.snapshot_dt);
    }

    // hook state
    RunArtifacts art;
    std::vector<ContinuationRecord> records(neps);
    MarkerSet markers;
    bool markers_ready = false;
    VectorField prev_w;
    ScalarField prev_div;
    double prev_t = 0.0;
    double last_sample_t = 0.0;
    bool have_sample = false;
    double clip_abs = 0.0, clip_net = 0.0;
    long snap_index = 0;

    auto write_snapshot_of = [&](const SystemState& s) {
        char name[32];
        std::snprintf(name, sizeof name, "snap_%06ld.dat", snap_index++);
        Snapshot snap;
        snap.grid = s.alpha.grid;
        snap.time = s.time;
        snap.names = {"alpha", "w_x", "w_y", "w_z"};
        snap.components = {s.alpha.v, s.w.comp[0], s.w.comp[1], s.w.comp[2]};
        save_snapshot(dir + "/" + name, snap);
        art.snapshots.emplace_back(name, s.time);
    };

    auto write_marker_rows = [&](double t) {
        for (const Marker& mk : markers.markers) {
            marker_csv << mk.label << ',' << fmt(t) << ',' << fmt(mk.xi[0]) << ','
                       << fmt(mk.xi[1]) << ',' << fmt(mk.xi[2]) << ',' << fmt(mk.x[0]) << ','
                       << fmt(mk.x[1]) << ',' << fmt(mk.x[2]);
            const Vec3 wv = mk.nhist > 0 ? mk.w_hist[std::min(mk.nhist, Marker::kHist) - 1]
                                         : Vec3{0.0, 0.0, 0.0};
            marker_csv << ',' << fmt(wv[0]) << ',' << fmt(wv[1]) << ',' << fmt(wv[2]) << ','
                       << (mk.alive ? 1 : 0) << "\n";
        }
    };

    Hook hook = [&](const HookContext& hc) -> HookAction {
        const SystemState& S = hc.state;
        clip_abs += hc.last_step.clipped_mass;
        clip_net += hc.last_step.clipped_mass_net;

        const GhostPolicy div_policy = S.boundary == BoundaryMode::periodic
                                           ? GhostPolicy::periodic
                                           : GhostPolicy::extrapolate;
        // markers advance on every hook call (the hook fires every step)
        if (!markers_ready) {
            MarkerSeedParams mp;
            mp.n_boundary = dg.boundary_markers;
            mp.n_interior = dg.interior_markers;
            mp.seed = dg.seed;
            markers = seed_markers(S, ctrl.floor, mp);
            prev_w = S.w;
            prev_div = divergence(S.w);
            fill_ghosts(prev_div, div_policy);
            prev_t = S.time;
            markers_ready = true;
        } else if (S.time > prev_t) {
            ScalarField cur_div = divergence(S.w);
            fill_ghosts(cur_div, div_policy);
            FlowFrame f0{prev_t, &prev_w, &prev_div};
            FlowFrame f1{S.time, &S.w, &cur_div};
            advance_markers(markers, f0, f1);
            prev_w = S.w;
            prev_div = std::move(cur_div);
            prev_t = S.time;
        }

        const bool sample = hc.step_index % dg.cadence == 0 || hc.at_mark;
        if (hc.step_index == 0 || hc.at_mark)
            write_snapshot_of(S);
        if (!sample)
            return HookAction::proceed;

        const double dt_sample = have_sample ? S.time - last_sample_t : 0.0;
        if (have_sample && !(dt_sample > 0.0))
            return HookAction::proceed;  // mark landed on a cadence step
        last_sample_t = S.time;
        have_sample = true;

        const Mask support = support_mask(S.alpha, ctrl.floor);
        const KinematicCache cache = kinematic_cache(S, support);
        RegionDecomposition def_decomp;
        for (int e = 0; e < neps; ++e) {
            RegionDecomposition dec = strip_split(support, dg.epsilon_factors[e] * h_min);
            continuation_update(records[e], S, dec, dt_sample, cache);
            if (e == def_eps)
                def_decomp = std::move(dec);
        }

        ConservationRecord cons =
            conservation(S, hc.potential ? &hc.potential->phi : nullptr);
        cons.clipped_mass = clip_net;
        const double sob3 = discrete_sobolev(S, 3, ctrl.floor);
        double diffuse_sup = 0.0;
        try {
            diffuse_sup = diffuse_residual(S, def_decomp).sup;
        } catch (const std::invalid_argument&) {
            diffuse_sup = 0.0;  // empty strip (e.g. vanished support)
        }

        art.classification =
            blowup_classify(records[def_eps], dg.thresholds, dg.window);
        art.classification_epsilon = records[def_eps].epsilon;

        const ContinuationSample& cs = records[def_eps].samples.back();
        std::ostringstream row;
        row << hc.step_index << ',' << fmt(S.time) << ',' << fmt(hc.last_step.dt) << ','
            << fmt(cons.mass) << ',' << fmt(cons.momentum[0]) << ',' << fmt(cons.momentum[1])
            << ',' << fmt(cons.momentum[2]) << ',' << fmt(cons.energy) << ',' << fmt(clip_net)
            << ',' << fmt(clip_abs) << ',' << fmt(cs.alpha_max) << ','
            << fmt(cs.sup_grad_alpha) << ',' << fmt(cs.sup_grad_w) << ','
            << fmt(records[def_eps].weak_value);
        for (int e = 0; e < neps; ++e) {
            const ContinuationSample& ce = records[e].samples.back();
            row << ',' << fmt(ce.sup_w_strip) << ',' << fmt(ce.sup_theta_interior) << ','
                << fmt(ce.sup_omega_interior) << ',' << fmt(records[e].strong_value);
        }
        row << ',' << fmt(sob3) << ',' << fmt(diffuse_sup) << ','
            << blowup_verdict_name(art.classification.verdict) << ','
            << art.classification.culprit;
        diag_csv << row.str() << "\n";

        write_marker_rows(S.time);

        if (art.classification.verdict != BlowupVerdict::none)
            return HookAction::halt_blowup;
        return HookAction::proceed;
    };

    RunResult res;
    try {
        res = run(std::move(state), ctrl, /*gravity_on=*/true, hook, /*cadence=*/1, marks);
    } catch (const std::exception& e) {
        art.steps = 0;
        write_manifest(dir, cfg, verdict_name(Verdict::corrupted_state),
                       std::string("run aborted: ") + e.what(), 3, art, 0.0, clip_abs,
                       clip_net);
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    art.steps = res.steps;

    std::string detail = res.detail;
    if (art.classification.verdict != BlowupVerdict::none)
        detail += std::string("; ") + blowup_verdict_name(art.classification.verdict) +
                  ", culprit: " + art.classification.culprit +
                  ", growth rate: " + fmt(art.classification.growth_exponent);

    int code = 0;
    switch (res.verdict) {
    case Verdict::completed:
        code = 0;
        break;
    case Verdict::blowup_suspected:
        code = 10;
        break;
    case Verdict::corrupted_state:
        code = 3;
        break;
    }
    write_manifest(dir, cfg, verdict_name(res.verdict), detail, code, art, res.state.time,
                   res.total_clipped_mass, res.total_clipped_net);
    std::cout << "verdict: " << verdict_name(res.verdict) << " (" << detail << ")\n";
    return code;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

namespace {

struct RunDirInfo {
    EquationOfState eos;
    std::vector<std::pair<std::string, double>> snapshots;  // path, time
};

RunDirInfo read_run_dir(const std::string& dir)
{
    std::ifstream in(dir + "/manifest.json", std::ios::binary);
    if (!in)
        throw ConfigError("compare: cannot read '" + dir + "/manifest.json'");
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("compare: bad manifest in '" + dir + "': " + e.what());
    }
    RunDirInfo info;
    try {
        const json& je = j.at("config").at("eos");
        const std::string cs = je.at("case").get<std::string>();
        info.eos = EquationOfState(je.at("K").get<double>(), je.at("gamma").get<double>(),
                                   cs == "A" ? RegularityCase::A : RegularityCase::B);
        for (const auto& s : j.at("snapshots"))
            info.snapshots.emplace_back(dir + "/" + s.at("file").get<std::string>(),
                                        s.at("time").get<double>());
    } catch (const std::exception& e) {
        throw ConfigError("compare: manifest in '" + dir + "' is incomplete: " + e.what());
    }
    return info;
}

int component_index(const Snapshot& s, const std::string& name)
{
    for (std::size_t i = 0; i < s.names.size(); ++i)
        if (s.names[i] == name)
            return (int)i;
    throw ConfigError("compare: snapshot lacks component '" + name + "'");
}

SystemState state_from_snapshot(const Snapshot& snap, const EquationOfState& eos)
{
    SystemState s;
    s.time = snap.time;
    s.eos = eos;
    s.boundary = BoundaryMode::vacuum;
    s.alpha = ScalarField(snap.grid);
    s.alpha.v = snap.components[component_index(snap, "alpha")];
    s.w = VectorField(snap.grid);
    s.w.comp[0] = snap.components[component_index(snap, "w_x")];
    s.w.comp[1] = snap.components[component_index(snap, "w_y")];
    s.w.comp[2] = snap.components[component_index(snap, "w_z")];
    return s;
}

bool boxes_match(const CartesianGrid& a, const CartesianGrid& b)
{
    for (int ax = 0; ax < 3; ++ax) {
        const double L = a.box_hi(ax) - a.box_lo(ax);
        if (std::fabs(a.box_lo(ax) - b.box_lo(ax)) > 1e-9 * L ||
            std::fabs(a.box_hi(ax) - b.box_hi(ax)) > 1e-9 * L)
            return false;
    }
    return true;
}

// cell-average a 2x-finer state down onto the coarse grid (density and
// velocity are averaged; alpha is re-derived from the averaged density)
SystemState coarsen_onto(const SystemState& fine, const CartesianGrid& cg)
{
    SystemState out;
    out.time = fine.time;
    out.eos = fine.eos;
    out.boundary = fine.boundary;
    out.alpha = ScalarField(cg);
    out.w = VectorField(cg);

    const CartesianGrid& fg = fine.alpha.grid;
    const EquationOfState& eos = fine.eos;
    const double inv_c = 1.0 / eos.alpha_coeff();
    const double e_ar = 2.0 / (eos.gamma - 1.0);
    const int nx = cg.dims[0], ny = cg.dims[1], nz = cg.dims[2];

#pragma omp parallel for collapse(2) schedule(static)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                double rho = 0.0;
                double w[3] = {0.0, 0.0, 0.0};
                for (int c = 0; c < 8; ++c) {
                    const int fi = 2 * i + (c & 1);
                    const int fj = 2 * j + ((c >> 1) & 1);
                    const int fk = 2 * k + ((c >> 2) & 1);
                    const long fc = fg.idx(fi, fj, fk);
                    const double a = fine.alpha.v[fc];
                    rho += a > 0.0 ? std::pow(a * inv_c, e_ar) : 0.0;
                    for (int m = 0; m < 3; ++m)
                        w[m] += fine.w.comp[m][fc];
                }
                rho *= 0.125;
                out.alpha.at(i, j, k) = eos.density_to_makino(rho);
                for (int m = 0; m < 3; ++m)
                    out.w.at(m, i, j, k) = 0.125 * w[m];
            }
        }
    }
    return out;
}

bool is_double_of(const CartesianGrid& fine, const CartesianGrid& coarse)
{
    for (int a = 0; a < 3; ++a)
        if (fine.dims[a] != 2 * coarse.dims[a])
            return false;
    return boxes_match(fine, coarse);
}

} // namespace

std::vector<std::pair<double, double>> compare_runs(const std::string& dir_a,
                                                    const std::string& dir_b)
{
    RunDirInfo a = read_run_dir(dir_a);
    RunDirInfo b = read_run_dir(dir_b);
    if (a.eos.K != b.eos.K || a.eos.gamma != b.eos.gamma ||
        a.eos.regularity_case != b.eos.regularity_case)
        throw std::invalid_argument(
            "compare: the two runs use different equations of state");

    // match snapshot times
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<double> times;
    for (const auto& sa : a.snapshots) {
        for (const auto& sb : b.snapshots) {
            if (std::fabs(sa.second - sb.second) <=
                1e-9 * std::max(1.0, std::fabs(sa.second))) {
                pairs.emplace_back(sa.first, sb.first);
                times.push_back(sa.second);
                break;
            }
        }
    }
    if (pairs.empty())
        throw std::invalid_argument("compare: no overlapping snapshot times");

    std::vector<std::pair<double, double>> rows;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        Snapshot sa = load_snapshot(pairs[p].first);
        Snapshot sb = load_snapshot(pairs[p].second);
        SystemState s1 = state_from_snapshot(sa, a.eos);
        SystemState s2 = state_from_snapshot(sb, b.eos);
        if (!(s1.alpha.grid == s2.alpha.grid)) {
            if (is_double_of(s2.alpha.grid, s1.alpha.grid))
                s2 = coarsen_onto(s2, s1.alpha.grid);
            else if (is_double_of(s1.alpha.grid, s2.alpha.grid))
                s1 = coarsen_onto(s1, s2.alpha.grid);
            else
                throw std::invalid_argument(
                    "compare: grids neither match nor differ by exactly one "
                    "refinement level");
        }
        rows.emplace_back(times[p], relative_entropy(s1, s2).second);
    }
    return rows;
}

int compare_command(const std::string& dir_a, const std::string& dir_b)
{
    std::vector<std::pair<double, double>> rows;
    try {
        rows = compare_runs(dir_a, dir_b);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cout << "t,eta_total\n";
    double max_eta = 0.0;
    for (const auto& [t, total] : rows) {
        max_eta = std::max(max_eta, total);
        std::cout << fmt(t) << ',' << fmt(total) << "\n";
    }
    std::cout << "# max_eta_total," << fmt(max_eta) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// oracles
// ---------------------------------------------------------------------------

int oracle_gravity_direct(const std::string& in_path, const std::string& out_path)
{
    Snapshot in;
    try {
        in = load_snapshot(in_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (in.components.empty()) {
        std::cerr << "error: oracle gravity-direct: input snapshot has no components\n";
        return 2;
    }
    ScalarField rho(in.grid);
    rho.v = in.components[0];
    PotentialSolution pot;
    try {
        pot = solve_potential_direct(rho);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    Snapshot out;
    out.grid = in.grid;
    out.time = in.time;
    out.names = {"phi"};
    out.components = {pot.phi.v};
    try {
        save_snapshot(out_path, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int oracle_collapse(double total_mass, double r0, double v0)
{
    CollapseOracle o;
    try {
        o = collapse_oracle(total_mass, r0, v0);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cout << "t,r,v\n";
    for (std::size_t i = 0; i < o.t.size(); ++i)
        std::cout << fmt(o.t[i]) << ',' << fmt(o.r[i]) << ',' << fmt(o.v[i]) << "\n";
    if (o.collapsed)
        std::cout << "# t_collapse," << fmt(o.t_collapse) << "\n";
    else
        std::cout << "# escape,inf\n";
    return 0;
}

int oracle_ball_potential(double rho0, double radius)
{
    if (!(rho0 > 0.0) || !(radius > 0.0)) {
        std::cerr << "error: oracle ball-potential: rho0 and R must be positive\n";
        return 2;
    }
    std::cout << "quantity,value\n";
    std::cout << "phi_center," << fmt(-rho0 * radius * radius / 2.0) << "\n";
    std::cout << "phi_surface," << fmt(-rho0 * radius * radius / 3.0) << "\n";
    std::cout << "g_surface," << fmt(rho0 * radius / 3.0) << "\n";
    return 0;
}

int oracle_mms(const std::string& case_id, const std::vector<int>& resolutions,
               double t_final)
{
    MmsReport rep;
    try {
        rep = mms_run(case_id, resolutions, t_final);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cout << "n,h,err_rho_l1,err_rho_linf,err_w_l1,err_w_linf,"
                 "order_rho_l1,order_rho_linf,order_w_l1,order_w_linf\n";
    for (const MmsRow& r : rep.rows) {
        std::cout << r.n << ',' << fmt(r.h) << ',' << fmt(r.err_rho_l1) << ','
                  << fmt(r.err_rho_linf) << ',' << fmt(r.err_w_l1) << ',' << fmt(r.err_w_linf)
                  << ',' << fmt(r.order_rho_l1) << ',' << fmt(r.order_rho_linf) << ','
                  << fmt(r.order_w_l1) << ',' << fmt(r.order_w_linf) << "\n";
    }
    return 0;
}

}  // namespace cloudlab
