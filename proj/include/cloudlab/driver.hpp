#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cloudlab {

inline constexpr const char* kVersion = "0.3.0";

// Batch run driven by a JSON config file.  Writes diagnostics.csv,
// markers.csv, snapshots and manifest.json into the configured output
// directory.  Exit codes: 0 completed, 10 blowup suspected (criterion
// divergence or step-size underflow), 2 configuration error, 3 corrupted
// state.  The manifest is written for every verdict-bearing run (codes
// 0/10/3).
int run_command(const std::string& config_path);

// Relative-entropy comparison of two run directories: matches snapshots by
// time, coarsens a 2x-finer grid by cell averaging, and returns (t, total
// eta*) rows.  Throws std::invalid_argument on grid/eos mismatch or disjoint
// snapshot times, and propagates I/O failures.
std::vector<std::pair<double, double>> compare_runs(const std::string& dir_a,
                                                    const std::string& dir_b);

// CLI wrapper around compare_runs: prints a CSV of eta*(t) plus a trailing
// "# max_eta_total,<v>" line.  Exit 2 on any comparison error.
int compare_command(const std::string& dir_a, const std::string& dir_b);

// Oracle subcommands (reference data emitters).
int oracle_gravity_direct(const std::string& in_path, const std::string& out_path);
int oracle_collapse(double total_mass, double r0, double v0);
int oracle_ball_potential(double rho0, double radius);
int oracle_mms(const std::string& case_id, const std::vector<int>& resolutions,
               double t_final);

}  // namespace cloudlab
