#include "gpcond/markov_sde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gpcond/batch.hpp"
#include "gpcond/rng.hpp"

namespace gpcond {

namespace {

using Index = Eigen::Index;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

bool charges_past(const Condition& c, double s) {
  for (const auto& a : c.atoms())
    if (a.t <= s) return true;
  for (const auto& d : c.density())
    if (d.lo < s) return true;
  return false;
}

}  // namespace

DriftEvaluator::DriftEvaluator(const ConditionedModel& m, DriftOptions opts) : model_(&m), opts_(std::move(opts)) {
  if (!m.kernel().is_markov()) throw std::invalid_argument("drift evaluation needs a Markov kernel");
  if (!(opts_.deriv_step > 0.0 && opts_.deriv_step < 0.1)) throw std::invalid_argument("deriv_step must lie in (0, 0.1)");
  if (!opts_.closed_form) return;

  const double T = m.horizon();
  const auto n = m.basis().size();
  Engine rng(0x5EEDULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int q = 1; q <= 9; ++q) {
    const double s = 0.1 * q * T;
    const Eigen::VectorXd closed = opts_.closed_form(s);
    const Eigen::VectorXd generic = generic_coefficients(s);
    if (closed.size() != generic.size())
      throw std::invalid_argument("closed-form drift '" + opts_.closed_form_name + "' has the wrong arity");
    for (int k = 0; k < 100; ++k) {
      Eigen::VectorXd v(static_cast<Index>(n + 1));
      for (Index i = 0; i < v.size(); ++i) v(i) = unit(rng);
      closed_form_gap_ = std::max(closed_form_gap_, std::abs(closed.dot(v) - generic.dot(v)));
    }
  }
  if (!(closed_form_gap_ < 1e-8))
    throw std::logic_error("closed-form drift '" + opts_.closed_form_name + "' disagrees with the generic drift by " +
                           fmt(closed_form_gap_));
}

std::vector<double> DriftEvaluator::phi(double t) const {
  const auto& basis = model_->basis();
  std::vector<double> out{model_->kernel().g(t)};
  for (std::size_t i = 0; i < basis.rank(); ++i) out.push_back(basis.ue(i, t));
  return out;
}

Eigen::MatrixXd DriftEvaluator::D(double s) const {
  const auto& basis = model_->basis();
  const Kernel& k = model_->kernel();
  const double T = k.horizon();
  const auto r = static_cast<Index>(basis.rank());
  Eigen::MatrixXd d(r + 1, r + 1);
  const auto row0 = phi(s);
  for (Index i = 0; i <= r; ++i) d(0, i) = row0[static_cast<std::size_t>(i)];
  const PiecewisePoly* gp = k.factors().g.as_poly();
  for (Index j = 0; j < r; ++j) {
    const Condition& a = basis.conditions()[basis.kept()[static_cast<std::size_t>(j)]];
    d(j + 1, 0) = gp ? apply_poly(a, *gp, s, T)
                     : apply_fn(a, [&](double x) { return k.g(x); }, s, T, basis.breakpoints());
    for (Index i = 0; i < r; ++i) d(j + 1, i + 1) = apply_ue(basis, static_cast<std::size_t>(i), a, s, T);
  }
  return d;
}

Eigen::VectorXd DriftEvaluator::d_vector(const AugmentedState& st) const {
  const auto& kept = model_->basis().kept();
  if (st.ivals.size() != model_->basis().size())
    throw std::invalid_argument("state carries " + std::to_string(st.ivals.size()) + " integrals, model has " +
                                std::to_string(model_->basis().size()) + " conditions");
  Eigen::VectorXd d(static_cast<Index>(kept.size() + 1));
  d(0) = st.x;
  for (std::size_t j = 0; j < kept.size(); ++j) d(static_cast<Index>(j + 1)) = -st.ivals[kept[j]];
  return d;
}

Eigen::VectorXd DriftEvaluator::solve(const AugmentedState& st) const {
  const Eigen::MatrixXd d = D(st.s);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(d);
  const double rc = lu.rcond();
  if (!(rc > 1e-15)) throw NumericError("D_s is numerically singular at s = " + fmt(st.s) + " (condition number ~ " + fmt(1.0 / rc) + ")");
  return lu.solve(d_vector(st));
}

double DriftEvaluator::expected_future(const AugmentedState& st, double t) const {
  if (t < st.s || t > model_->horizon()) throw std::domain_error("expected_future needs s <= t <= T");
  const Eigen::VectorXd xi = solve(st);
  const auto p = phi(t);
  return Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size())).dot(xi);
}

Eigen::VectorXd DriftEvaluator::phi_derivative(double s) const {
  const double T = model_->horizon();
  const auto& breaks = model_->basis().breakpoints();
  double h = opts_.deriv_step * (T - s);
  auto eval = [&](double t) {
    const auto p = phi(t);
    return Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size())).eval();
  };
  bool kink_near = s - h < 0.0;
  for (double b : breaks)
    if (b > s - h && b < s + h && b != s) kink_near = true;
  const bool on_break = std::find(breaks.begin(), breaks.end(), s) != breaks.end() && s > 0.0;

  if (!kink_near && !on_break) {
    auto central = [&](double step) { return ((eval(s + step) - eval(s - step)) / (2.0 * step)).eval(); };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
  }
  // Right derivative from one-sided differences on a kink-free window.
  for (double b : breaks)
    if (b > s) h = std::min(h, 0.45 * (b - s));
  const Eigen::VectorXd f0 = eval(s);
  auto forward = [&](double step) {
    return ((-3.0 * f0 + 4.0 * eval(s + step) - eval(s + 2.0 * step)) / (2.0 * step)).eval();
  };
  return (4.0 * forward(0.5 * h) - forward(h)) / 3.0;
}

Eigen::VectorXd DriftEvaluator::generic_coefficients(double s) const {
  const double T = model_->horizon();
  if (!(s >= 0.0 && s < T)) throw std::domain_error("drift needs 0 <= s < T");
  const auto& kept = model_->basis().kept();
  const Eigen::MatrixXd d = D(s);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(d.transpose());
  const double rc = lu.rcond();
  if (!(rc > 1e-15)) throw NumericError("D_s is numerically singular at s = " + fmt(s) + " (condition number ~ " + fmt(1.0 / rc) + ")");
  const Eigen::VectorXd kappa = lu.solve(phi_derivative(s));
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Index>(model_->basis().size() + 1));
  c(0) = kappa(0);
  // An integral over a condition with no mass on [0, s] is zero in every
  // reachable state; its coefficient is reported as zero.
  const auto& conds = model_->basis().conditions();
  for (std::size_t j = 0; j < kept.size(); ++j)
    if (charges_past(conds[kept[j]], s)) c(static_cast<Index>(kept[j] + 1)) = -kappa(static_cast<Index>(j + 1));
  return c;
}

Eigen::VectorXd DriftEvaluator::coefficients(double s) const {
  Eigen::VectorXd c = opts_.closed_form ? opts_.closed_form(s) : generic_coefficients(s);
  if (opts_.negate) c = -c;
  return c;
}

namespace {

Eigen::VectorXd state_vector(const AugmentedState& st) {
  Eigen::VectorXd v(static_cast<Index>(st.ivals.size() + 1));
  v(0) = st.x;
  for (std::size_t j = 0; j < st.ivals.size(); ++j) v(static_cast<Index>(j + 1)) = st.ivals[j];
  return v;
}

}  // namespace

double DriftEvaluator::drift(const AugmentedState& st) const {
  const Eigen::VectorXd c = coefficients(st.s);
  if (c.size() != static_cast<Index>(st.ivals.size() + 1)) throw std::invalid_argument("state size mismatch");
  return c.dot(state_vector(st));
}

double DriftEvaluator::generic_drift(const AugmentedState& st) const {
  const Eigen::VectorXd c = generic_coefficients(st.s);
  if (c.size() != static_cast<Index>(st.ivals.size() + 1)) throw std::invalid_argument("state size mismatch");
  return c.dot(state_vector(st));
}

DriftCoefficients zabb_drift() {
  return [](double s) {
    Eigen::VectorXd c(3);
    c << -4.0 / (1.0 - s), 0.0, -6.0 / ((1.0 - s) * (1.0 - s));
    return c;
  };
}

DriftCoefficients bridge_drift() {
  return [](double s) {
    Eigen::VectorXd c(2);
    c << -1.0 / (1.0 - s), 0.0;
    return c;
  };
}

// ---------------------------------------------------------------------------
// Euler-Maruyama

std::vector<double> sde_grid(double horizon, double dt, double eps_end) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(eps_end > 0.0 && eps_end < horizon / 10.0)) throw std::invalid_argument("eps_end must lie in (0, T/10)");
  const double end = horizon - eps_end;
  const auto steps = static_cast<std::size_t>(std::ceil(end / dt - 1e-9));
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) grid[k] = static_cast<double>(k) * dt;
  grid[steps] = end;
  return grid;
}

SdePlan make_sde_plan(const DriftEvaluator& de, std::span<const double> grid, bool zero_noise) {
  SdePlan plan;
  plan.grid.assign(grid.begin(), grid.end());
  validate(Path{plan.grid, std::vector<double>(plan.grid.size(), 0.0)});
  const auto n = de.model().basis().size();
  const std::size_t steps = plan.grid.size() - 1;
  plan.coeffs.resize(static_cast<Index>(steps), static_cast<Index>(n + 1));
  for (std::size_t k = 0; k < steps; ++k) {
    const Eigen::VectorXd c = de.coefficients(plan.grid[k]);
    if (!c.allFinite()) throw std::runtime_error("non-finite drift at s = " + fmt(plan.grid[k]));
    plan.coeffs.row(static_cast<Index>(k)) = c.transpose();
  }
  for (const auto& c : de.model().basis().conditions())
    plan.cells.push_back(cell_weights(restrict_upto(c, plan.grid.back()), plan.grid));
  plan.alpha = zero_noise ? 0.0 : de.alpha();
  plan.initial_sd = zero_noise ? 0.0 : std::sqrt(std::max(0.0, de.model().cond_cov(0.0, 0.0)));
  return plan;
}

SdeState sde_initial(const SdePlan& plan, double z0) {
  SdeState st;
  st.x = plan.initial_sd * z0;
  for (const auto& cw : plan.cells) st.ivals.push_back(cw.initial * st.x);
  return st;
}

void sde_step(const SdePlan& plan, std::size_t k, double dw, SdeState& st) {
  const auto row = plan.coeffs.row(static_cast<Index>(k));
  double drift = row(0) * st.x;
  for (std::size_t j = 0; j < st.ivals.size(); ++j) drift += row(static_cast<Index>(j + 1)) * st.ivals[j];
  const double x_new = st.x + drift * (plan.grid[k + 1] - plan.grid[k]) + plan.alpha * dw;
  for (std::size_t j = 0; j < st.ivals.size(); ++j)
    st.ivals[j] += plan.cells[j].left[k] * st.x + plan.cells[j].right[k] * x_new;
  st.x = x_new;
}

AugmentedPath integrate_sde(const DriftEvaluator& de, double dt, std::uint64_t seed, double eps_end, bool zero_noise) {
  const auto grid = sde_grid(de.model().horizon(), dt, eps_end);
  const SdePlan plan = make_sde_plan(de, grid, zero_noise);
  Engine rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SdeState st = sde_initial(plan, plan.initial_sd > 0.0 ? normal(rng) : 0.0);

  AugmentedPath out;
  out.grid = grid;
  out.x.reserve(grid.size());
  out.ivals.assign(st.ivals.size(), {});
  auto record = [&] {
    out.x.push_back(st.x);
    for (std::size_t j = 0; j < st.ivals.size(); ++j) out.ivals[j].push_back(st.ivals[j]);
  };
  record();
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double dw = std::sqrt(grid[k + 1] - grid[k]) * normal(rng);
    sde_step(plan, k, dw, st);
    if (!std::isfinite(st.x)) throw std::runtime_error("non-finite state at s = " + fmt(grid[k + 1]));
    record();
  }
  return out;
}

// ---------------------------------------------------------------------------

MarkovCheckReport markov_consistency_check(const DriftEvaluator& de, const MarkovCheckConfig& cfg) {
  const ConditionedModel& m = de.model();
  const double T = m.horizon();
  if (cfg.grid_points < 3) throw std::invalid_argument("markov check needs at least 3 grid points");
  if (cfg.n_paths < 100) throw std::invalid_argument("markov check needs at least 100 paths");
  const auto grid = uniform_grid(T, cfg.grid_points);
  auto snap = [&](double t) {
    const auto k = static_cast<std::size_t>(std::llround(t / T * static_cast<double>(cfg.grid_points - 1)));
    return std::min(k, cfg.grid_points - 1);
  };
  const std::size_t is = snap(cfg.s);
  const std::size_t it = snap(cfg.t);
  if (!(it > is)) throw std::invalid_argument("markov check needs s < t");

  MarkovCheckReport rep;
  rep.s = grid[is];
  rep.t = grid[it];
  rep.n_paths = cfg.n_paths;

  GridTransform gt(m, grid);
  gt.add_point(is);
  gt.add_point(it);
  for (double u : cfg.us) {
    const std::size_t iu = snap(u);
    if (!(iu < is)) throw std::invalid_argument("markov check needs u < s");
    rep.us.push_back(grid[iu]);
    gt.add_point(iu);
  }
  const auto& conds = m.basis().conditions();
  for (const auto& c : conds) gt.add_partial_integral(c, rep.s);

  const Readouts r = run_anticipative(gt, cfg.n_paths, cfg.seed, cfg.parallel ? Exec::Parallel : Exec::Serial);

  // E[X_t | state] = w . d_s with w = D_s^-T phi(t).
  const Eigen::MatrixXd d = de.D(rep.s);
  const auto p = de.phi(rep.t);
  const Eigen::VectorXd w =
      d.transpose().partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size())));
  const auto& kept = m.basis().kept();
  const auto nu = static_cast<Index>(cfg.us.size());
  const auto n = static_cast<Index>(cfg.n_paths);

  Eigen::VectorXd resid(n);
  for (Index i = 0; i < n; ++i) {
    double ef = w(0) * r.values(i, 0);
    for (std::size_t j = 0; j < kept.size(); ++j)
      ef -= w(static_cast<Index>(j + 1)) * r.values(i, 2 + nu + static_cast<Index>(kept[j]));
    resid(i) = r.values(i, 1) - ef;
  }
  const double mean = resid.mean();
  const Eigen::VectorXd rc = resid.array() - mean;
  const double sd = std::sqrt(rc.squaredNorm() / static_cast<double>(n - 1));
  rep.mean_residual = mean;
  rep.mean_z = sd > 0.0 ? mean / (sd / std::sqrt(static_cast<double>(n))) : 0.0;
  rep.max_abs_z = std::abs(rep.mean_z);
  for (Index u = 0; u < nu; ++u) {
    const Eigen::VectorXd xu = r.values.col(2 + u);
    const Eigen::VectorXd xc = xu.array() - xu.mean();
    const double denom = std::sqrt(rc.squaredNorm() * xc.squaredNorm());
    const double corr = denom > 0.0 ? rc.dot(xc) / denom : 0.0;
    rep.corr.push_back(corr);
    rep.corr_z.push_back(corr * std::sqrt(static_cast<double>(n)));
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(rep.corr_z.back()));
  }
  rep.pass = rep.max_abs_z < 4.0;
  return rep;
}

}  // namespace gpcond
