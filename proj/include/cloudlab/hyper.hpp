#pragma once

#include "cloudlab/eos.hpp"
#include "cloudlab/gravity.hpp"
#include "cloudlab/grid.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace cloudlab {

enum class BoundaryMode {
    vacuum,  // zero-extension for alpha/rho, linear extrapolation for w
    periodic // wrap-around test mode (self-gravity must stay off)
};

// Full dynamical state.  alpha is the rescaled sound-speed variable (it stays
// regular across the vacuum boundary); w is the velocity, defined on the
// whole box.
struct SystemState {
    double time = 0.0;
    ScalarField alpha;
    VectorField w;
    EquationOfState eos;
    BoundaryMode boundary = BoundaryMode::vacuum;
};

struct StepControl {
    double cfl = 0.4;    // in (0, 1]
    double t_end = 1.0;
    double dt_min = 0.0; // abort threshold; <= 0 means 1e-10 * the first step
    double floor = 0.0;  // vacuum clip threshold for alpha

    void validate() const
    {
        if (!(cfl > 0.0 && cfl <= 1.0))
            throw std::invalid_argument("StepControl: cfl must lie in (0, 1]");
        if (!(t_end >= 0.0))
            throw std::invalid_argument("StepControl: t_end must be non-negative");
        if (floor < 0.0)
            throw std::invalid_argument("StepControl: floor must be non-negative");
    }
};

enum class Verdict { completed, blowup_suspected, corrupted_state };

std::string verdict_name(Verdict v);

// thrown by the step-size control when the admissible step undercuts dt_min,
// i.e. the characteristic speeds have run away
struct BlowupSuspectedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// thrown when a state holds non-finite values
struct CorruptedStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepStats {
    double dt = 0.0;
    double clipped_mass = 0.0;     // sum over fixed cells of |mass changed|
    double clipped_mass_net = 0.0; // signed net mass added by the fixup
};

// Semi-discrete time derivative of (alpha, w):
//   d alpha/dt = -div(alpha w) + (3-gamma)/2 alpha div w        - dissipation
//   d w^k /dt  = -w.grad w^k - (gamma-1)/4 grad_k(alpha^2) + g^k - dissipation
// Second-order central differences plus a fourth-difference face dissipation
// scaled by the local characteristic speed |w^a| + (gamma-1) alpha / 2.
// `gvec` may be null (self-gravity off).  Requires ghost >= 2.
std::pair<ScalarField, VectorField> rhs(const SystemState& state, const VectorField* gvec);

// Stage derivative of the production update in (density, velocity) variables:
// the continuity part advances rho = rho(alpha) in conservative flux form, the
// velocity part is identical to rhs().  Exposed so manufactured-solution
// sources can be built against the exact discrete operator.
std::pair<ScalarField, VectorField> stage_derivative(const SystemState& state,
                                                     const VectorField* gvec);

// cfl / sum_a(max_i lambda_i^a / h_a) over interior cells.  Throws
// BlowupSuspectedError if the raw step undercuts ctrl.dt_min (when positive)
// and CorruptedStateError on non-finite speeds.  The returned step is capped
// so time never passes ctrl.t_end.
double stable_dt(const SystemState& state, const StepControl& ctrl);

// Run-loop variant: additionally caps the step by the cell free-fall time
// cfl * sqrt(h_a / max|g^a|) and by the gravitational contraction time
// 0.1 * cfl / sqrt(max rho), which the characteristic bound misses in cold
// collapse regimes.  dt_min is checked against the capped (pre-t_end) value.
double stable_dt_full(const SystemState& state, const StepControl& ctrl, const VectorField* gvec);

// optional manufactured source, evaluated at cell centers and stage times;
// rho() feeds the continuity update, w[k]() the velocity update
struct SourceTerm {
    std::function<double(const Vec3&, double)> rho;
    std::array<std::function<double(const Vec3&, double)>, 3> w;
};

// One strong-stability-preserving RK3 step of size dt.  The continuity update
// runs in conservative mass form (alpha is mapped to rho and back), so total
// mass changes only through the vacuum fixup reported in StepStats; the
// velocity update keeps the regular alpha-form pressure coupling.  When
// `gravity` is non-null the potential is re-solved at every stage; a caller
// that already solved it for the incoming state may pass that solution as
// `pot0` to skip the first stage solve.
StepStats step(SystemState& state, double dt, const StepControl& ctrl,
               const FftPoissonSolver* gravity, const SourceTerm* src = nullptr,
               const PotentialSolution* pot0 = nullptr);

struct HookContext {
    const SystemState& state;
    const PotentialSolution* potential; // fresh solve at the hook time; null if gravity off
    StepStats last_step;
    long step_index = 0;
    bool at_mark = false; // state.time coincides with a requested mark time
};

enum class HookAction { proceed, halt_blowup, halt_completed };

using Hook = std::function<HookAction(const HookContext&)>;

struct RunResult {
    SystemState state; // final state (last finite state on corruption)
    Verdict verdict = Verdict::completed;
    std::string detail;
    long steps = 0;
    double total_clipped_mass = 0.0; // accumulated |mass changed| by fixups
    double total_clipped_net = 0.0;  // accumulated signed net mass added
};

// Advance until t_end or a verdict: step-size underflow or a hook vote ends
// the run as blowup_suspected; a non-finite state ends it as corrupted_state
// with the last finite state returned.  The hook fires at t = 0, every
// `cadence` steps, at every mark time (dt is capped so marks are hit
// exactly), and at the final time.
RunResult run(SystemState state, const StepControl& ctrl, bool gravity_on, const Hook& hook,
              long cadence, const std::vector<double>& marks = {});

// pointwise map of the whole extended alpha array to density
ScalarField density_field(const SystemState& state);

double total_mass(const SystemState& state);
bool state_finite(const SystemState& state);

} // namespace cloudlab
