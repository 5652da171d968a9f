#include "qf/filter.hpp"

#include "qf/numerics.hpp"

namespace qf {

namespace {

std::vector<Coupling> to_couplings(const std::vector<MeasurementChannel>& channels) {
  std::vector<Coupling> out;
  out.reserve(channels.size());
  for (const auto& ch : channels) out.push_back({ch.L, ch.weight});
  return out;
}

void check_finite(const Mat& m, const char* what, int step) {
  if (!m.allFinite())
    throw std::runtime_error(std::string(what) + ": non-finite state at step " +
                             std::to_string(step));
}

void psd_tripwire(const Mat& varsigma, const StepOptions& opt, int step) {
  if (opt.psd_check_interval <= 0 || step % opt.psd_check_interval != 0) return;
  double tr = varsigma.trace().real();
  if (!(tr > 0.0)) return;  // trace guard reports separately
  double lo = min_eigenvalue(varsigma) / tr;
  if (lo < opt.psd_floor)
    throw std::runtime_error("posterior eigenvalue " + std::to_string(lo) +
                             " below floor at step " + std::to_string(step) +
                             "; decrease dt");
}

void finish_step(FilterState& state, Mat&& next, const FilterContext&,
                 const StepOptions& opt, double dt, int step) {
  next = symmetrize_hermitian(next);
  check_finite(next, "filter step", step);
  psd_tripwire(next, opt, step);
  if (opt.mode == StepMode::normalized) {
    double tr = next.trace().real();
    if (!(tr > opt.trace_floor))
      throw std::runtime_error("trace underflow (" + std::to_string(tr) +
                               ") at step " + std::to_string(step));
    state.log_likelihood += std::log(tr);
    next /= tr;
  }
  state.varsigma = std::move(next);
  state.t += dt;
}

}  // namespace

FilterContext::FilterContext(FilterModel model) : model_(std::move(model)) {
  require_square_finite(model_.H, "FilterContext: H");
  require_square_finite(model_.rho0, "FilterContext: rho0");
  if (model_.rho0.rows() != model_.H.rows())
    throw std::invalid_argument("FilterContext: rho0/H dimension mismatch");
  const int d = dim();
  for (const auto& ch : model_.channels)
    if (ch.L.rows() != d)
      throw std::invalid_argument("FilterContext: channel dimension mismatch");
  observed_ = coarse_grain(model_.channels);

  K_eff_ = I1 * model_.H;
  for (const auto& ch : model_.channels)
    K_eff_ += 0.5 * ch.weight * (ch.L.adjoint() * ch.L);

  complete_ = !model_.channels.empty();
  for (const auto& ch : model_.channels)
    if (!ch.group_id) complete_ = false;
  for (const auto& g : observed_)
    if (g.members.size() != 1) complete_ = false;

  // Crossover: many narrow channels are cheaper as one cached superoperator.
  use_jump_superop_ = static_cast<int>(model_.channels.size()) > 2 * d;
  if (use_jump_superop_) {
    jump_superop_ = Mat::Zero(static_cast<long>(d) * d, static_cast<long>(d) * d);
    for (const auto& ch : model_.channels)
      jump_superop_ += ch.weight * kron(ch.L.conjugate(), ch.L);
  }
}

Detection FilterContext::detection_kind() const {
  if (observed_.empty())
    throw std::logic_error("detection_kind: model has no observed channels");
  Detection k = observed_.front().kind;
  for (const auto& g : observed_)
    if (g.kind != k)
      throw std::logic_error("detection_kind: detectors mix homodyne and heterodyne");
  return k;
}

std::vector<double> FilterContext::noise_column_weights() const {
  std::vector<double> w;
  for (const auto& g : observed_) {
    w.push_back(g.Lambda);
    if (g.kind == Detection::heterodyne) w.push_back(g.Lambda);
  }
  return w;
}

Mat jump_sum(const FilterContext& ctx, const Mat& rho) {
  if (ctx.use_jump_superop_)
    return unvec(ctx.jump_superop_ * vec(rho), ctx.dim());
  Mat out = Mat::Zero(rho.rows(), rho.cols());
  for (const auto& ch : ctx.model_.channels)
    out += ch.weight * (ch.L * rho * ch.L.adjoint());
  return out;
}

Mat FilterContext::dissipator(const Mat& rho) const {
  Mat Krho = K_eff_ * rho;
  return -(Krho + Krho.adjoint()) + jump_sum(*this, rho);
}

FilterState FilterContext::initial_state(bool with_propagator) const {
  FilterState st;
  st.varsigma = model_.rho0;
  st.t = 0.0;
  if (with_propagator) {
    if (!complete_)
      throw std::invalid_argument(
          "pure propagator requires complete observation (every channel its own detector)");
    st.pure_propagator = Mat::Identity(dim(), dim());
  }
  return st;
}

void step_unnormalized(FilterState& state, const FilterContext& ctx,
                       std::span<const double> dY, double dt,
                       const StepOptions& opt, int step_index) {
  const auto& obs = ctx.observed();
  if (dY.size() != obs.size())
    throw std::invalid_argument("step_unnormalized: expected " +
                                std::to_string(obs.size()) + " increments, got " +
                                std::to_string(dY.size()));
  Mat next = state.varsigma + dt * ctx.dissipator(state.varsigma);
  for (size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].kind != Detection::homodyne)
      throw std::invalid_argument("step_unnormalized: detector " +
                                  std::to_string(obs[i].group_id) + " is heterodyne");
    Mat Ls = obs[i].Lbar * state.varsigma;
    next += dY[i] * (Ls + Ls.adjoint());
  }
  if (state.pure_propagator) {
    Mat& F = *state.pure_propagator;
    Mat Fn = F - dt * (ctx.K_eff() * F);
    for (size_t i = 0; i < obs.size(); ++i) Fn += dY[i] * (obs[i].Lbar * F);
    check_finite(Fn, "pure propagator", step_index);
    F = std::move(Fn);
  }
  finish_step(state, std::move(next), ctx, opt, dt, step_index);
}

void step_heterodyne(FilterState& state, const FilterContext& ctx,
                     std::span<const cplx> dZ, double dt,
                     const StepOptions& opt, int step_index) {
  const auto& obs = ctx.observed();
  if (dZ.size() != obs.size())
    throw std::invalid_argument("step_heterodyne: expected " +
                                std::to_string(obs.size()) + " increments, got " +
                                std::to_string(dZ.size()));
  Mat next = state.varsigma + dt * ctx.dissipator(state.varsigma);
  for (size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].kind != Detection::heterodyne)
      throw std::invalid_argument("step_heterodyne: detector " +
                                  std::to_string(obs[i].group_id) + " is homodyne");
    Mat Ls = obs[i].Lbar * state.varsigma;
    next += std::conj(dZ[i]) * Ls + dZ[i] * Ls.adjoint();
  }
  if (state.pure_propagator) {
    Mat& F = *state.pure_propagator;
    Mat Fn = F - dt * (ctx.K_eff() * F);
    for (size_t i = 0; i < obs.size(); ++i)
      Fn += std::conj(dZ[i]) * (obs[i].Lbar * F);
    check_finite(Fn, "pure propagator", step_index);
    F = std::move(Fn);
  }
  finish_step(state, std::move(next), ctx, opt, dt, step_index);
}

namespace {

Mat normalized_rho(const FilterState& state, const char* what) {
  double tr = state.varsigma.trace().real();
  if (!(tr > 0.0))
    throw std::runtime_error(std::string(what) + ": state trace " + std::to_string(tr) +
                             " is not positive");
  return state.varsigma / tr;
}

}  // namespace

std::vector<double> simulate_output_homodyne(const FilterState& state,
                                             const FilterContext& ctx,
                                             std::span<const double> noise_row, double dt) {
  const auto& obs = ctx.observed();
  if (noise_row.size() != obs.size())
    throw std::invalid_argument("simulate_output_homodyne: noise row size mismatch");
  Mat rho = normalized_rho(state, "simulate_output_homodyne");
  std::vector<double> dY(obs.size());
  for (size_t i = 0; i < obs.size(); ++i) {
    double drift = obs[i].Lambda * ((obs[i].Lbar + obs[i].Lbar.adjoint()) * rho).trace().real();
    dY[i] = drift * dt + noise_row[i];
  }
  return dY;
}

std::vector<cplx> simulate_output_heterodyne(const FilterState& state,
                                             const FilterContext& ctx,
                                             std::span<const double> noise_row, double dt) {
  const auto& obs = ctx.observed();
  if (noise_row.size() != 2 * obs.size())
    throw std::invalid_argument("simulate_output_heterodyne: noise row size mismatch");
  Mat rho = normalized_rho(state, "simulate_output_heterodyne");
  const double inv_sqrt2 = 0.7071067811865475244;
  std::vector<cplx> dZ(obs.size());
  for (size_t i = 0; i < obs.size(); ++i) {
    cplx drift = obs[i].Lambda * (obs[i].Lbar * rho).trace();
    dZ[i] = drift * dt + inv_sqrt2 * cplx(noise_row[2 * i], noise_row[2 * i + 1]);
  }
  return dZ;
}

std::vector<double> reference_increments_homodyne(const FilterContext& ctx,
                                                  std::span<const double> noise_row) {
  if (noise_row.size() != ctx.observed().size())
    throw std::invalid_argument("reference_increments_homodyne: noise row size mismatch");
  return {noise_row.begin(), noise_row.end()};
}

std::vector<cplx> reference_increments_heterodyne(const FilterContext& ctx,
                                                  std::span<const double> noise_row) {
  const auto& obs = ctx.observed();
  if (noise_row.size() != 2 * obs.size())
    throw std::invalid_argument("reference_increments_heterodyne: noise row size mismatch");
  const double inv_sqrt2 = 0.7071067811865475244;
  std::vector<cplx> dZ(obs.size());
  for (size_t i = 0; i < obs.size(); ++i)
    dZ[i] = inv_sqrt2 * cplx(noise_row[2 * i], noise_row[2 * i + 1]);
  return dZ;
}

NormalizedPosterior normalize(const FilterState& state) {
  double tr = state.varsigma.trace().real();
  if (!(tr > 0.0))
    throw std::runtime_error("normalize: state trace " + std::to_string(tr) +
                             " is not positive");
  NormalizedPosterior out;
  out.rho = DensityMatrix(symmetrize_hermitian(state.varsigma / tr), false);
  out.likelihood = std::exp(state.log_likelihood) * tr;
  return out;
}

double expectation(const Mat& rho, const Mat& X) { return (X * rho).trace().real(); }

double purity(const Mat& rho) { return (rho * rho).trace().real(); }

void MartingaleWeight::accumulate(const FilterContext& ctx, std::span<const double> g,
                                  std::span<const double> dY, double dt) {
  const auto& obs = ctx.observed();
  if (g.size() != obs.size() || dY.size() != obs.size())
    throw std::invalid_argument("MartingaleWeight: size mismatch");
  for (size_t i = 0; i < obs.size(); ++i)
    log_w_ += g[i] * dY[i] - 0.5 * g[i] * g[i] * obs[i].Lambda * dt;
}

double weighted_moment_ode(const FilterModel& model, const Mat& X,
                           const std::function<double(double, int)>& g,
                           const TimeGrid& grid) {
  FilterContext ctx(model);
  const auto& obs = ctx.observed();
  auto rhs = [&](double t, const Mat& phi) -> Mat {
    Mat out = ctx.dissipator(phi);
    for (size_t i = 0; i < obs.size(); ++i) {
      Mat Ls = obs[i].Lbar * phi;
      out += g(t, static_cast<int>(i)) * obs[i].Lambda * (Ls + Ls.adjoint());
    }
    return out;
  };
  Mat phi = model.rho0;
  double dt = grid.dt();
  for (int k = 0; k < grid.n_steps; ++k)
    phi = rk4_step(phi, grid.time(k), dt, rhs);
  return (X * phi).trace().real();
}

}  // namespace qf
