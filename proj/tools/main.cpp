#include "cloudlab/driver.hpp"

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

namespace {

void set_threads(int n)
{
#ifdef _OPENMP
    if (n > 0)
        omp_set_num_threads(n);
#else
    (void)n;
#endif
}

} // namespace

int main(int argc, char** argv)
{
    using namespace cloudlab;

    CLI::App app{"cloudlab: self-gravitating isentropic cloud laboratory"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* cmd_run = app.add_subcommand("run", "advance a configured scenario and write diagnostics");
    cmd_run->add_option("config", config_path, "JSON configuration file")->required();

    std::string dir_a, dir_b;
    CLI::App* cmd_cmp =
        app.add_subcommand("compare", "relative-entropy distance between two run directories");
    cmd_cmp->add_option("dir_a", dir_a, "first run directory")->required();
    cmd_cmp->add_option("dir_b", dir_b, "second run directory")->required();

    CLI::App* cmd_orc = app.add_subcommand("oracle", "independent reference solutions");
    cmd_orc->require_subcommand(1);

    std::string gd_in, gd_out;
    CLI::App* orc_gd =
        cmd_orc->add_subcommand("gravity-direct", "direct-sum potential of a density snapshot");
    orc_gd->add_option("--in", gd_in, "input density snapshot")->required();
    orc_gd->add_option("--out", gd_out, "output potential snapshot")->required();

    double M = 4.0 * M_PI, r0 = 1.0, v0 = 0.0;
    CLI::App* orc_col = cmd_orc->add_subcommand("collapse", "radial free-fall shell trajectory");
    orc_col->add_option("--M", M, "total mass inside the shell");
    orc_col->add_option("--r0", r0, "initial shell radius");
    orc_col->add_option("--v0", v0, "initial radial velocity");

    double rho0 = 1.0, R = 0.5;
    CLI::App* orc_ball =
        cmd_orc->add_subcommand("ball-potential", "closed-form uniform-ball potential values");
    orc_ball->add_option("--rho0", rho0, "ball density");
    orc_ball->add_option("--R", R, "ball radius");

    std::string mms_case = "trig";
    std::vector<int> resolutions = {16, 32};
    double t_final = 0.25;
    CLI::App* orc_mms =
        cmd_orc->add_subcommand("mms", "manufactured-solution convergence table");
    orc_mms->add_option("--case", mms_case, "case id: trig or discrete-stationary");
    orc_mms->add_option("--resolutions", resolutions, "grid sizes, e.g. 16,32,64")
        ->delimiter(',');
    orc_mms->add_option("--t-final", t_final, "final time of the convergence runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    int env_threads = 0;
    if (const char* env = std::getenv("CLOUDLAB_THREADS"))
        env_threads = std::atoi(env);

    if (cmd_run->parsed()) {
        set_threads(env_threads);
        return run_command(config_path);
    }
    if (cmd_cmp->parsed()) {
        set_threads(1);
        return compare_command(dir_a, dir_b);
    }
    if (orc_gd->parsed()) {
        set_threads(env_threads);
        return oracle_gravity_direct(gd_in, gd_out);
    }
    set_threads(1);
    if (orc_col->parsed())
        return oracle_collapse(M, r0, v0);
    if (orc_ball->parsed())
        return oracle_ball_potential(rho0, R);
    if (orc_mms->parsed())
        return oracle_mms(mms_case, resolutions, t_final);
    return 2;
}
