#pragma once

#include "cloudlab/grid.hpp"
#include "cloudlab/hyper.hpp"
#include "cloudlab/regions.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cloudlab {

// ---------------------------------------------------------------------------
// Kinematic decomposition of the velocity gradient on a masked region.
// ---------------------------------------------------------------------------

// Per-cell velocity gradient W_jk = d_j w_k evaluated on a region mask.
// Tensor components are stored in interior layout (dims^3, x-fastest),
// flattened as W[j*3+k].  `valid` flags cells where all three derivative
// stencils stay inside the region (central where both neighbors belong to
// the region, second-order one-sided at the region edge, invalid when fewer
// than two same-side cells are available).
struct VelocityGradient {
  CartesianGrid grid;
  std::array<std::vector<double>, 9> W{};
  std::vector<std::uint8_t> valid;

  std::size_t n_valid() const;
};

// Symmetric/antisymmetric split of W:
//   theta_jk = (W_jk + W_kj)/2   (deformation)
//   omega_jk = (W_kj - W_jk)/2   (rotation)
//   theta    = trace(theta_jk) = div w
struct KinematicDecomposition {
  CartesianGrid grid;
  std::array<std::vector<double>, 9> theta_jk{};
  std::array<std::vector<double>, 9> omega_jk{};
  std::vector<double> theta;
  std::vector<std::uint8_t> valid;
};

std::pair<VelocityGradient, KinematicDecomposition> decompose(const VectorField& w,
                                                              const Mask& region);

// Region-aware gradient of a scalar field using the same stencil rules as
// decompose (one-sided at the region edge; never reads outside the region).
struct RegionGradient {
  CartesianGrid grid;
  std::array<std::vector<double>, 3> d{};
  std::vector<std::uint8_t> valid;
};

RegionGradient region_gradient(const ScalarField& f, const Mask& region);

// ---------------------------------------------------------------------------
// Continuation-criterion record
// ---------------------------------------------------------------------------

// One time sample of the region-split sup norms that enter the continuation
// criteria.  |W| and |Omega| are Frobenius norms, the interior expansion is
// the absolute trace |div w|, and the gradients use the Euclidean norm
// (Frobenius for the full velocity gradient).
struct ContinuationSample {
  double t = 0.0;
  double sup_w_strip = 0.0;         // sup over the strip of |W|
  double sup_theta_interior = 0.0;  // sup over the interior of |div w|
  double sup_omega_interior = 0.0;  // sup over the interior of |Omega|
  double sup_grad_alpha = 0.0;      // sup over the support of |grad alpha|
  double sup_grad_w = 0.0;          // sup over the support of |grad w|
  double alpha_max = 0.0;           // sup over the support of alpha (monitor)
};

// Number of integrated sup-norm terms tracked per sample.
inline constexpr int kContinuationTerms = 5;

// Names of the integrated terms, indexed as in ContinuationRecord::integrals.
const char* continuation_term_name(int term);

// Running record of the continuation-criterion quantities.
//
//   integrals[i][k] = trapezoidal integral of term k up to sample i, where
//     k=0: strip |W|, k=1: interior expansion, k=2: interior rotation,
//     k=3: support |grad alpha|, k=4: support |grad w|.
//   weak_value   = integral of (sup|grad w| + sup|grad alpha|)
//   strong_value = integral of (strip |W| + interior expansion
//                               + interior rotation + support |grad alpha|)
struct ContinuationRecord {
  double epsilon = 0.0;  // strip width used to build the region masks
  std::vector<ContinuationSample> samples;
  std::vector<std::array<double, kContinuationTerms>> integrals;
  std::vector<double> weak_series;
  std::vector<double> strong_series;
  double weak_value = 0.0;
  double strong_value = 0.0;
};

// Precomputed kinematic fields over the support mask, shareable between
// several records (different strip widths) for the same state.
struct KinematicCache {
  VelocityGradient grad_w;
  KinematicDecomposition kin;
  RegionGradient grad_alpha;
};

KinematicCache kinematic_cache(const SystemState& state, const Mask& support);

// Appends one sample to the record and advances all running integrals by the
// trapezoid rule.  `dt` is the time elapsed since the previous sample and is
// ignored for the first sample.
void continuation_update(ContinuationRecord& record, const SystemState& state,
                         const RegionDecomposition& decomp, double dt);
void continuation_update(ContinuationRecord& record, const SystemState& state,
                         const RegionDecomposition& decomp, double dt,
                         const KinematicCache& cache);

// ---------------------------------------------------------------------------
// Blowup classification
// ---------------------------------------------------------------------------

enum class BlowupVerdict { none, weak_divergence, strong_divergence };

const char* blowup_verdict_name(BlowupVerdict v);

struct BlowupThresholds {
  double weak = 0.0;
  double strong = 0.0;
  double growth_rate = 0.0;  // minimal trailing log-growth rate of strong_value
};

struct BlowupClassification {
  BlowupVerdict verdict = BlowupVerdict::none;
  std::string culprit;            // fastest-growing term, empty when none
  double growth_exponent = 0.0;   // fitted log-linear rate over the window
};

// Classifies the record.  Fewer than `window` samples yields verdict none.
// Strong divergence requires strong_value above its threshold AND a trailing
// log-linear growth rate above thresholds.growth_rate; otherwise weak
// divergence when weak_value exceeds its threshold.  Non-positive thresholds
// or window < 2 are configuration errors.
BlowupClassification blowup_classify(const ContinuationRecord& record,
                                     const BlowupThresholds& thresholds, int window);

// ---------------------------------------------------------------------------
// Relative entropy
// ---------------------------------------------------------------------------

// Pointwise relative entropy between two states on the same grid and eos:
//   eta* = (rho2^g - rho1^g - g rho1^(g-1) (rho2 - rho1))/(g-1)
//          + rho2 |w2 - w1|^2 / 2
// Returns the field (interior values; ghosts zero) and its volume integral.
std::pair<ScalarField, double> relative_entropy(const SystemState& s1,
                                                const SystemState& s2);

// ---------------------------------------------------------------------------
// Diffuse-boundary residual
// ---------------------------------------------------------------------------

// sup over the strip of |grad(rho^(gamma-1))|, computed through the identity
// grad(rho^(gamma-1)) = (gamma-1)^2/(2 K gamma) * alpha grad(alpha), plus a
// profile of the same sup binned by distance to the support boundary
// (bin width = one cell).
struct DiffuseResidual {
  double sup = 0.0;
  std::vector<double> bin_distance;  // bin-center distances
  std::vector<double> bin_sup;       // sup of the residual within each bin
};

DiffuseResidual diffuse_residual(const SystemState& state,
                                 const RegionDecomposition& decomp);

// ---------------------------------------------------------------------------
// Conservation ledger
// ---------------------------------------------------------------------------

struct ConservationRecord {
  double mass = 0.0;
  std::array<double, 3> momentum{0.0, 0.0, 0.0};
  double energy = 0.0;        // kinetic + internal (+ gravitational when phi given)
  double clipped_mass = 0.0;  // filled by the caller from the integrator ledger
};

// Midpoint-rule volume integrals over the box.  When `phi` is non-null the
// energy includes the gravitational term (1/2) * integral of rho*phi.
ConservationRecord conservation(const SystemState& state,
                                const ScalarField* phi = nullptr);

// ---------------------------------------------------------------------------
// Discrete Sobolev monitor
// ---------------------------------------------------------------------------

// sqrt( sum over support cells of sum_{|beta| <= order} (D^beta U)^2 * V )
// for U = (alpha, w), with compact central difference stencils per axis.
// Support = cells with alpha > floor.  order must be 1..4.
double discrete_sobolev(const SystemState& state, int order, double floor = 0.0);

// ---------------------------------------------------------------------------
// Proportional fit through the origin (a-priori estimate shape check)
// ---------------------------------------------------------------------------

struct ProportionalFit {
  double C = 0.0;
  double r2 = 0.0;
};

ProportionalFit fit_apriori(const std::vector<double>& x, const std::vector<double>& y);

// Default strip widths, in units of the cell spacing, reported by the driver.
inline constexpr double kDefaultEpsilonFactors[3] = {2.0, 3.0, 5.0};

}  // namespace cloudlab
