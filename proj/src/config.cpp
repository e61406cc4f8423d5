#include "cloudlab/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

namespace cloudlab {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg)
{
    throw ConfigError("config: " + msg);
}

void check_keys(const json& j, const std::string& block,
                std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        fail("block '" + block + "' must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (item.key() == a) {
                ok = true;
                break;
            }
        if (!ok)
            fail("unknown key '" + item.key() + "' in block '" + block + "'");
    }
}

const json& require(const json& j, const std::string& block, const char* key)
{
    auto it = j.find(key);
    if (it == j.end())
        fail("missing key '" + std::string(key) + "' in block '" + block + "'");
    return *it;
}

double as_number(const json& j, const std::string& where)
{
    if (!j.is_number())
        fail("'" + where + "' must be a number");
    return j.get<double>();
}

long as_integer(const json& j, const std::string& where)
{
    if (!j.is_number_integer())
        fail("'" + where + "' must be an integer");
    return j.get<long>();
}

std::string as_string(const json& j, const std::string& where)
{
    if (!j.is_string())
        fail("'" + where + "' must be a string");
    return j.get<std::string>();
}

std::array<double, 3> as_vec3(const json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 3)
        fail("'" + where + "' must be an array of three numbers");
    std::array<double, 3> v;
    for (int a = 0; a < 3; ++a)
        v[a] = as_number(j[a], where);
    return v;
}

CartesianGrid parse_grid(const json& j)
{
    check_keys(j, "grid", {"dims", "box_lo", "box_hi"});
    const json& jd = require(j, "grid", "dims");
    if (!jd.is_array() || jd.size() != 3)
        fail("'grid.dims' must be an array of three integers");
    Index3 dims;
    for (int a = 0; a < 3; ++a)
        dims[a] = (int)as_integer(jd[a], "grid.dims");
    const Vec3 lo = as_vec3(require(j, "grid", "box_lo"), "grid.box_lo");
    const Vec3 hi = as_vec3(require(j, "grid", "box_hi"), "grid.box_hi");
    Vec3 spacing, origin;
    for (int a = 0; a < 3; ++a) {
        if (!(hi[a] > lo[a]))
            fail("'grid.box_hi' must exceed 'grid.box_lo' on every axis");
        if (dims[a] < 4)
            fail("'grid.dims' must be at least 4 per axis");
        spacing[a] = (hi[a] - lo[a]) / dims[a];
        origin[a] = lo[a] + 0.5 * spacing[a];
    }
    try {
        return CartesianGrid(dims, spacing, origin, 2);
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
}

EquationOfState parse_eos(const json& j)
{
    check_keys(j, "eos", {"K", "gamma", "case"});
    const double K = as_number(require(j, "eos", "K"), "eos.K");
    const double gamma = as_number(require(j, "eos", "gamma"), "eos.gamma");
    const std::string cs = as_string(require(j, "eos", "case"), "eos.case");
    RegularityCase rc;
    if (cs == "A" || cs == "a")
        rc = RegularityCase::A;
    else if (cs == "B" || cs == "b")
        rc = RegularityCase::B;
    else
        fail("'eos.case' must be \"A\" or \"B\"");
    try {
        return EquationOfState(K, gamma, rc);
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
}

ScenarioConfig parse_scenario(const json& j, const EquationOfState& eos)
{
    check_keys(j, "scenario",
               {"profile", "amplitude", "radius", "center", "smoothness", "velocity"});
    ScenarioConfig sc;
    sc.eos = eos;
    const std::string prof = as_string(require(j, "scenario", "profile"), "scenario.profile");
    if (prof == "diffuse_bump")
        sc.profile = Profile::diffuse_bump;
    else if (prof == "physical_vacuum_bump")
        sc.profile = Profile::physical_vacuum_bump;
    else
        fail("'scenario.profile' must be \"diffuse_bump\" or \"physical_vacuum_bump\"");
    sc.amplitude = as_number(require(j, "scenario", "amplitude"), "scenario.amplitude");
    sc.radius = as_number(require(j, "scenario", "radius"), "scenario.radius");
    if (j.contains("center"))
        sc.center = as_vec3(j["center"], "scenario.center");
    if (j.contains("smoothness"))
        sc.smoothness = (int)as_integer(j["smoothness"], "scenario.smoothness");

    if (j.contains("velocity")) {
        const json& jv = j["velocity"];
        check_keys(jv, "scenario.velocity", {"mode", "H", "omega", "eps_amp", "seed"});
        const std::string mode =
            as_string(require(jv, "scenario.velocity", "mode"), "scenario.velocity.mode");
        auto reject_except = [&](std::initializer_list<const char*> wanted) {
            for (const auto& item : jv.items()) {
                if (item.key() == "mode")
                    continue;
                bool ok = false;
                for (const char* w : wanted)
                    if (item.key() == w)
                        ok = true;
                if (!ok)
                    fail("key '" + item.key() + "' does not belong to velocity mode '" +
                         mode + "'");
            }
        };
        if (mode == "rest") {
            sc.velocity_mode = VelocityMode::rest;
            reject_except({});
        } else if (mode == "homologous") {
            sc.velocity_mode = VelocityMode::homologous;
            reject_except({"H"});
            sc.H = as_number(require(jv, "scenario.velocity", "H"), "scenario.velocity.H");
        } else if (mode == "rotation") {
            sc.velocity_mode = VelocityMode::rotation;
            reject_except({"omega"});
            sc.omega = as_number(require(jv, "scenario.velocity", "omega"),
                                 "scenario.velocity.omega");
        } else if (mode == "random_solenoidal") {
            sc.velocity_mode = VelocityMode::random_solenoidal;
            reject_except({"eps_amp", "seed"});
            sc.eps_amp = as_number(require(jv, "scenario.velocity", "eps_amp"),
                                   "scenario.velocity.eps_amp");
            if (jv.contains("seed"))
                sc.seed = (std::uint64_t)as_integer(jv["seed"], "scenario.velocity.seed");
        } else {
            fail("'scenario.velocity.mode' must be one of \"rest\", \"homologous\", "
                 "\"rotation\", \"random_solenoidal\"");
        }
    }
    if (!(sc.amplitude > 0.0))
        fail("'scenario.amplitude' must be positive");
    if (!(sc.radius > 0.0))
        fail("'scenario.radius' must be positive");
    if (sc.smoothness < 1)
        fail("'scenario.smoothness' must be at least 1");
    return sc;
}

StepControl parse_control(const json& j)
{
    check_keys(j, "control", {"cfl", "t_end", "dt_min", "floor"});
    StepControl c;
    c.t_end = as_number(require(j, "control", "t_end"), "control.t_end");
    if (j.contains("cfl"))
        c.cfl = as_number(j["cfl"], "control.cfl");
    if (j.contains("dt_min"))
        c.dt_min = as_number(j["dt_min"], "control.dt_min");
    if (j.contains("floor"))
        c.floor = as_number(j["floor"], "control.floor");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    return c;
}

DiagnosticsConfig parse_diagnostics(const json& j)
{
    check_keys(j, "diagnostics",
               {"cadence", "epsilon_factors", "thresholds", "window", "boundary_markers",
                "interior_markers", "seed"});
    DiagnosticsConfig d;
    if (j.contains("cadence")) {
        d.cadence = (int)as_integer(j["cadence"], "diagnostics.cadence");
        if (d.cadence < 1)
            fail("'diagnostics.cadence' must be at least 1");
    }
    if (j.contains("epsilon_factors")) {
        const json& je = j["epsilon_factors"];
        if (!je.is_array() || je.empty())
            fail("'diagnostics.epsilon_factors' must be a non-empty array");
        d.epsilon_factors.clear();
        for (const auto& e : je) {
            const double f = as_number(e, "diagnostics.epsilon_factors");
            if (!(f > 0.0))
                fail("'diagnostics.epsilon_factors' entries must be positive");
            d.epsilon_factors.push_back(f);
        }
    }
    if (j.contains("thresholds")) {
        const json& jt = j["thresholds"];
        check_keys(jt, "diagnostics.thresholds", {"weak", "strong", "growth_rate"});
        if (jt.contains("weak"))
            d.thresholds.weak = as_number(jt["weak"], "diagnostics.thresholds.weak");
        if (jt.contains("strong"))
            d.thresholds.strong = as_number(jt["strong"], "diagnostics.thresholds.strong");
        if (jt.contains("growth_rate"))
            d.thresholds.growth_rate =
                as_number(jt["growth_rate"], "diagnostics.thresholds.growth_rate");
    }
    if (!(d.thresholds.weak > 0.0) || !(d.thresholds.strong > 0.0) ||
        !(d.thresholds.growth_rate > 0.0))
        fail("'diagnostics.thresholds' must all be positive");
    if (j.contains("window")) {
        d.window = (int)as_integer(j["window"], "diagnostics.window");
        if (d.window < 2)
            fail("'diagnostics.window' must be at least 2");
    }
    if (j.contains("boundary_markers")) {
        d.boundary_markers = (int)as_integer(j["boundary_markers"], "diagnostics.boundary_markers");
        if (d.boundary_markers < 0)
            fail("'diagnostics.boundary_markers' must be non-negative");
    }
    if (j.contains("interior_markers")) {
        d.interior_markers = (int)as_integer(j["interior_markers"], "diagnostics.interior_markers");
        if (d.interior_markers < 0)
            fail("'diagnostics.interior_markers' must be non-negative");
    }
    if (j.contains("seed"))
        d.seed = (std::uint64_t)as_integer(j["seed"], "diagnostics.seed");
    return d;
}

OutputConfig parse_output(const json& j)
{
    check_keys(j, "output", {"directory", "snapshot_dt"});
    OutputConfig o;
    if (j.contains("directory")) {
        o.directory = as_string(j["directory"], "output.directory");
        if (o.directory.empty())
            fail("'output.directory' must be non-empty");
    }
    if (j.contains("snapshot_dt")) {
        o.snapshot_dt = as_number(j["snapshot_dt"], "output.snapshot_dt");
        if (o.snapshot_dt < 0.0)
            fail("'output.snapshot_dt' must be non-negative");
    }
    return o;
}

} // namespace

RunConfig parse_config(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        fail(std::string("parse error: ") + e.what());
    }
    check_keys(j, "<top level>", {"grid", "eos", "scenario", "control", "diagnostics", "output"});

    RunConfig cfg;
    cfg.grid = parse_grid(require(j, "<top level>", "grid"));
    cfg.eos = parse_eos(require(j, "<top level>", "eos"));
    cfg.scenario = parse_scenario(require(j, "<top level>", "scenario"), cfg.eos);
    cfg.control = parse_control(require(j, "<top level>", "control"));
    if (j.contains("diagnostics"))
        cfg.diagnostics = parse_diagnostics(j["diagnostics"]);
    if (j.contains("output"))
        cfg.output = parse_output(j["output"]);
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_echo(const RunConfig& cfg)
{
    json j;
    const CartesianGrid& g = cfg.grid;
    j["grid"]["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
    j["grid"]["box_lo"] = {g.box_lo(0), g.box_lo(1), g.box_lo(2)};
    j["grid"]["box_hi"] = {g.box_hi(0), g.box_hi(1), g.box_hi(2)};
    j["eos"]["K"] = cfg.eos.K;
    j["eos"]["gamma"] = cfg.eos.gamma;
    j["eos"]["case"] = cfg.eos.regularity_case == RegularityCase::A ? "A" : "B";
    j["scenario"]["profile"] = cfg.scenario.profile == Profile::diffuse_bump
                                   ? "diffuse_bump"
                                   : "physical_vacuum_bump";
    j["scenario"]["amplitude"] = cfg.scenario.amplitude;
    j["scenario"]["radius"] = cfg.scenario.radius;
    j["scenario"]["center"] = {cfg.scenario.center[0], cfg.scenario.center[1],
                               cfg.scenario.center[2]};
    j["scenario"]["smoothness"] = cfg.scenario.smoothness;
    switch (cfg.scenario.velocity_mode) {
    case VelocityMode::rest:
        j["scenario"]["velocity"]["mode"] = "rest";
        break;
    case VelocityMode::homologous:
        j["scenario"]["velocity"]["mode"] = "homologous";
        j["scenario"]["velocity"]["H"] = cfg.scenario.H;
        break;
    case VelocityMode::rotation:
        j["scenario"]["velocity"]["mode"] = "rotation";
        j["scenario"]["velocity"]["omega"] = cfg.scenario.omega;
        break;
    case VelocityMode::random_solenoidal:
        j["scenario"]["velocity"]["mode"] = "random_solenoidal";
        j["scenario"]["velocity"]["eps_amp"] = cfg.scenario.eps_amp;
        j["scenario"]["velocity"]["seed"] = cfg.scenario.seed;
        break;
    }
    j["control"]["cfl"] = cfg.control.cfl;
    j["control"]["t_end"] = cfg.control.t_end;
    j["control"]["dt_min"] = cfg.control.dt_min;
    j["control"]["floor"] = cfg.control.floor;
    j["diagnostics"]["cadence"] = cfg.diagnostics.cadence;
    j["diagnostics"]["epsilon_factors"] = cfg.diagnostics.epsilon_factors;
    j["diagnostics"]["thresholds"]["weak"] = cfg.diagnostics.thresholds.weak;
    j["diagnostics"]["thresholds"]["strong"] = cfg.diagnostics.thresholds.strong;
    j["diagnostics"]["thresholds"]["growth_rate"] = cfg.diagnostics.thresholds.growth_rate;
    j["diagnostics"]["window"] = cfg.diagnostics.window;
    j["diagnostics"]["boundary_markers"] = cfg.diagnostics.boundary_markers;
    j["diagnostics"]["interior_markers"] = cfg.diagnostics.interior_markers;
    j["diagnostics"]["seed"] = cfg.diagnostics.seed;
    j["output"]["directory"] = cfg.output.directory;
    j["output"]["snapshot_dt"] = cfg.output.snapshot_dt;
    return j.dump(2);
}

}  // namespace cloudlab
