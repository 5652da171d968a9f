#pragma once
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qf/channels.hpp"
#include "qf/grid.hpp"
#include "qf/lindblad.hpp"
#include "qf/operators.hpp"

namespace qf {

/// Finite-dimensional monitored system: Hamiltonian, measurement channels,
/// initial state.
struct FilterModel {
  Mat H;
  std::vector<MeasurementChannel> channels;
  Mat rho0;
};

/// Raw keeps the linear (unnormalized) state and leaves log_likelihood at 0;
/// Normalized rescales to unit trace each step and accumulates the log trace
/// ratio.  The two runs of the same path are exactly proportional.
enum class StepMode { normalized, raw };

/// Where the increments fed to the stepper come from.
enum class DriveMode { reference_measure, simulate_physical, replay_given };

struct FilterState {
  Mat varsigma;                       // posterior state, unnormalized in raw mode
  double log_likelihood = 0.0;        // ln of accumulated trace ratios
  double t = 0.0;
  std::optional<Mat> pure_propagator; // solution of the linear wave equation

  /// Total observation density exp(log_likelihood) * tr(varsigma).
  double likelihood() const { return std::exp(log_likelihood) * varsigma.trace().real(); }
};

struct StepOptions {
  StepMode mode = StepMode::normalized;
  /// Steps between eigenvalue tripwire checks (<=0 disables; symmetrization
  /// still runs every step).
  int psd_check_interval = 1;
  /// Abort when min eig / trace falls below this.  Euler steps from a pure
  /// state dip negative by O(sum Lambda ||Lbar psi||^2 dt) on noise spikes,
  /// so the floor must sit well below that scale, not at rounding level.
  double psd_floor = -1e-2;
  double trace_floor = 1e-300;  // abort when the step trace falls below this
};

/// Precomputed stepping data for one FilterModel.  The dissipative part uses
/// every fine channel; detector terms use the coarse-grained couplings.  When
/// a model has many more channels than Hilbert-space dimensions the jump sum
/// is cached as a dim^2 x dim^2 superoperator.
class FilterContext {
 public:
  explicit FilterContext(FilterModel model);

  const FilterModel& model() const { return model_; }
  const std::vector<ObservedChannel>& observed() const { return observed_; }
  int dim() const { return static_cast<int>(model_.H.rows()); }
  bool complete_observation() const { return complete_; }
  Detection detection_kind() const;

  /// Reference-measure weights for the raw Gaussian noise columns: one column
  /// of weight Lambda_i per homodyne detector, two per heterodyne detector.
  std::vector<double> noise_column_weights() const;

  /// Full Lindblad drift G_*(rho) including the Hamiltonian.
  Mat dissipator(const Mat& rho) const;

  const Mat& K_eff() const { return K_eff_; }
  FilterState initial_state(bool with_propagator = false) const;

 private:
  FilterModel model_;
  std::vector<ObservedChannel> observed_;
  Mat K_eff_;        // iH + 1/2 sum_j w_j L_j^* L_j
  bool complete_ = false;
  bool use_jump_superop_ = false;
  Mat jump_superop_;  // vec form of rho -> sum_j w_j L_j rho L_j^*
  friend Mat jump_sum(const FilterContext&, const Mat&);
};

/// One Euler step of the linear filtering equation with homodyne readout:
///   d varsigma = G_*(varsigma) dt + sum_i (Lbar_i varsigma + varsigma Lbar_i^*) dY_i.
/// dY holds one increment per observed group (group-id order).  step_index is
/// only used for the tripwire cadence and error messages.
void step_unnormalized(FilterState& state, const FilterContext& ctx,
                       std::span<const double> dY, double dt,
                       const StepOptions& opt = {}, int step_index = 0);

/// Heterodyne variant:
///   d varsigma = G_*(varsigma) dt + sum_i (Lbar_i varsigma dZ_i^* + varsigma Lbar_i^* dZ_i).
void step_heterodyne(FilterState& state, const FilterContext& ctx,
                     std::span<const cplx> dZ, double dt,
                     const StepOptions& opt = {}, int step_index = 0);

/// Detector increments in simulate_physical mode, from the current normalized
/// posterior plus the raw reference noise for this step:
///   homodyne:   dY_i = Lambda_i tr(rho (Lbar_i + Lbar_i^*)) dt + dw_i
///   heterodyne: dZ_i = Lambda_i tr(rho Lbar_i) dt + (dw_+ + i dw_-)/sqrt(2)
std::vector<double> simulate_output_homodyne(const FilterState& state,
                                             const FilterContext& ctx,
                                             std::span<const double> noise_row, double dt);
std::vector<cplx> simulate_output_heterodyne(const FilterState& state,
                                             const FilterContext& ctx,
                                             std::span<const double> noise_row, double dt);

/// Reference-measure increments are the raw noise columns themselves.
std::vector<double> reference_increments_homodyne(const FilterContext& ctx,
                                                  std::span<const double> noise_row);
std::vector<cplx> reference_increments_heterodyne(const FilterContext& ctx,
                                                  std::span<const double> noise_row);

struct NormalizedPosterior {
  DensityMatrix rho;
  double likelihood = 0.0;  // exp(log_likelihood) * trace
};

/// Trace-normalizes the state; refuses states with non-positive trace.
NormalizedPosterior normalize(const FilterState& state);

double expectation(const Mat& rho, const Mat& X);
double purity(const Mat& rho);

/// Log of the exponential martingale weight exp(int g dY - 1/2 int g^2 dLambda)
/// accumulated step by step; g is one value per observed group.
class MartingaleWeight {
 public:
  void accumulate(const FilterContext& ctx, std::span<const double> g,
                  std::span<const double> dY, double dt);
  double log_weight() const { return log_w_; }
  double weight() const { return std::exp(log_w_); }

 private:
  double log_w_ = 0.0;
};

/// Deterministic oracle for weighted reference-measure moments: integrates
///   dPhi/dt = G_*(Phi) + sum_i g_i(t) Lambda_i (Lbar_i Phi + Phi Lbar_i^*)
/// from rho0 with RK4 on the given grid and returns tr(X Phi(t1)).
double weighted_moment_ode(const FilterModel& model, const Mat& X,
                           const std::function<double(double, int)>& g,
                           const TimeGrid& grid);

}  // namespace qf
