#pragma once

#include "cloudlab/diagnostics.hpp"
#include "cloudlab/hyper.hpp"
#include "cloudlab/scenarios.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cloudlab {

// Configuration problems (bad file, unknown key, invariant violation)
// surface as this type; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DiagnosticsConfig {
    int cadence = 5;                                   // sampling cadence in steps
    std::vector<double> epsilon_factors{2.0, 3.0, 5.0}; // strip widths, cell units
    BlowupThresholds thresholds{50.0, 50.0, 1.0};
    int window = 8;            // trailing fit window (samples)
    int boundary_markers = 64;
    int interior_markers = 64;
    std::uint64_t seed = 1;
};

struct OutputConfig {
    std::string directory = "out";
    double snapshot_dt = 0.0;  // time between snapshots; <= 0 writes t=0 and t_end only
};

struct RunConfig {
    CartesianGrid grid;
    EquationOfState eos;
    ScenarioConfig scenario;
    StepControl control;
    DiagnosticsConfig diagnostics;
    OutputConfig output;
};

// Parses and validates a JSON run configuration.  Unknown keys anywhere in
// the document are rejected.  Throws ConfigError.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

// Serialized config echo (normalized JSON) for the run manifest.
std::string config_echo(const RunConfig& cfg);

}  // namespace cloudlab
