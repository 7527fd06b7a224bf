#include "gpcond/batch.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

#include <omp.h>

#include "gpcond/rng.hpp"

namespace gpcond {

namespace {

using Index = Eigen::Index;

// Paths per series block; each block is one GEMM.
constexpr std::size_t kSeriesBlock = 128;

std::size_t nearest_index(std::span<const double> grid, double t) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), t);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return grid.size() - 1;
  const auto k = static_cast<std::size_t>(it - grid.begin());
  return (t - grid[k - 1] <= grid[k] - t) ? k - 1 : k;
}

void fold_max(Eigen::VectorXd& acc, const Eigen::VectorXd& r) { acc = acc.cwiseMax(r.cwiseAbs()); }

// Exceptions must not escape an OpenMP region; keep the first and rethrow.
class ErrorSlot {
 public:
  template <class Fn>
  void run(Fn&& fn) {
    try {
      fn();
    } catch (...) {
#pragma omp critical(gpcond_error_slot)
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

}  // namespace

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

Readouts run_anticipative(const GridTransform& gt, std::size_t n_paths, std::uint64_t seed, Exec exec) {
  const Kernel& k = gt.model().kernel();
  const auto m = static_cast<Index>(gt.readouts());
  const auto nc = static_cast<Index>(gt.model().basis().size());
  Readouts out;
  out.values.resize(static_cast<Index>(n_paths), m);
  out.max_abs_residual = Eigen::VectorXd::Zero(nc);
  const auto grid = gt.grid();
  const auto n = static_cast<std::int64_t>(n_paths);

  auto body = [&](std::int64_t i, Eigen::VectorXd& xi, Eigen::VectorXd& read, Eigen::VectorXd& res,
                  Eigen::VectorXd& worst) {
    const Path p = sample_base_path(k, grid, derive_seed(seed, static_cast<std::uint64_t>(i)));
    gt.apply(p.values, xi, read, res);
    out.values.row(i) = read.transpose();
    fold_max(worst, res);
  };

  if (exec == Exec::Serial) {
    Eigen::VectorXd xi, read(m), res(nc);
    for (std::int64_t i = 0; i < n; ++i) body(i, xi, read, res, out.max_abs_residual);
    return out;
  }
  ErrorSlot errors;
#pragma omp parallel
  {
    Eigen::VectorXd xi, read(m), res(nc);
    Eigen::VectorXd worst = Eigen::VectorXd::Zero(nc);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) errors.run([&] { body(i, xi, read, res, worst); });
#pragma omp critical
    fold_max(out.max_abs_residual, worst);
  }
  errors.rethrow();
  return out;
}

Readouts run_series(const SeriesBasis& sb, const Eigen::MatrixXd& rows, std::size_t n_paths, std::uint64_t seed,
                    Exec exec) {
  const auto K = static_cast<Index>(sb.n_terms());
  if (rows.cols() != K) throw std::invalid_argument("series readout rows do not match n_terms");
  const Eigen::MatrixXd& e = sb.deflated_functionals();
  Readouts out;
  out.values.resize(static_cast<Index>(n_paths), rows.rows());
  out.max_abs_residual = Eigen::VectorXd::Zero(e.rows());
  const auto blocks = static_cast<std::int64_t>((n_paths + kSeriesBlock - 1) / kSeriesBlock);

  auto body = [&](std::int64_t b, Eigen::MatrixXd& omega, Eigen::VectorXd& worst) {
    const std::size_t first = static_cast<std::size_t>(b) * kSeriesBlock;
    const std::size_t count = std::min(kSeriesBlock, n_paths - first);
    omega.resize(K, static_cast<Index>(count));
    for (std::size_t c = 0; c < count; ++c) {
      Engine rng(derive_seed(seed, first + c));
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index j = 0; j < K; ++j) omega(j, static_cast<Index>(c)) = normal(rng);
    }
    out.values.middleRows(static_cast<Index>(first), static_cast<Index>(count)).noalias() =
        (rows * omega).transpose();
    if (e.rows() > 0) {
      const Eigen::MatrixXd res = e * omega;
      worst = worst.cwiseMax(res.cwiseAbs().rowwise().maxCoeff());
    }
  };

  if (exec == Exec::Serial) {
    Eigen::MatrixXd omega;
    for (std::int64_t b = 0; b < blocks; ++b) body(b, omega, out.max_abs_residual);
    return out;
  }
  ErrorSlot errors;
#pragma omp parallel
  {
    Eigen::MatrixXd omega;
    Eigen::VectorXd worst = Eigen::VectorXd::Zero(e.rows());
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t b = 0; b < blocks; ++b) errors.run([&] { body(b, omega, worst); });
#pragma omp critical
    fold_max(out.max_abs_residual, worst);
  }
  errors.rethrow();
  return out;
}

Eigen::MatrixXd run_base(const Kernel& k, std::span<const double> grid, std::span<const std::size_t> record,
                         std::size_t n_paths, std::uint64_t seed, Exec exec) {
  Eigen::MatrixXd out(static_cast<Index>(n_paths), static_cast<Index>(record.size()));
  const auto n = static_cast<std::int64_t>(n_paths);
  auto body = [&](std::int64_t i) {
    const Path p = sample_base_path(k, grid, derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (std::size_t r = 0; r < record.size(); ++r) out(i, static_cast<Index>(r)) = p.values[record[r]];
  };
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return out;
  }
  ErrorSlot errors;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) errors.run([&] { body(i); });
  errors.rethrow();
  return out;
}

SdeBatch run_sde_coupled(const DriftEvaluator& de, double dt, double eps_end, std::span<const double> record_times,
                         std::size_t n_paths, std::uint64_t seed, Exec exec) {
  const double T = de.model().horizon();
  const auto fine_grid = sde_grid(T, dt, eps_end);
  std::vector<double> coarse_grid;
  std::vector<std::size_t> fine_of_coarse;  // fine index of each coarse point
  for (std::size_t k = 0; k < fine_grid.size(); k += 2) {
    coarse_grid.push_back(fine_grid[k]);
    fine_of_coarse.push_back(k);
  }
  if (fine_of_coarse.back() + 1 != fine_grid.size()) {
    coarse_grid.push_back(fine_grid.back());
    fine_of_coarse.push_back(fine_grid.size() - 1);
  }
  const SdePlan fine = make_sde_plan(de, fine_grid);
  const SdePlan coarse = make_sde_plan(de, coarse_grid);

  SdeBatch out;
  std::vector<std::size_t> rec_coarse;
  for (double t : record_times) {
    const std::size_t c = nearest_index(coarse_grid, t);
    rec_coarse.push_back(c);
    out.times.push_back(coarse_grid[c]);
  }
  // readout slots filled at each coarse index
  std::vector<std::vector<Index>> slots(coarse_grid.size());
  for (std::size_t r = 0; r < rec_coarse.size(); ++r) slots[rec_coarse[r]].push_back(static_cast<Index>(r));

  const auto m = static_cast<Index>(record_times.size());
  const auto nc = de.model().basis().size();
  out.fine.resize(static_cast<Index>(n_paths), m);
  out.coarse.resize(static_cast<Index>(n_paths), m);
  Eigen::MatrixXd ends(static_cast<Index>(n_paths), static_cast<Index>(nc + 1));

  auto body = [&](std::int64_t i) {
    Engine rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double z0 = fine.initial_sd > 0.0 ? normal(rng) : 0.0;
    SdeState sf = sde_initial(fine, z0);
    SdeState sc = sde_initial(coarse, z0);
    for (Index r : slots[0]) {
      out.fine(i, r) = sf.x;
      out.coarse(i, r) = sc.x;
    }
    double acc = 0.0;
    std::size_t next_coarse = 1;
    for (std::size_t k = 0; k + 1 < fine_grid.size(); ++k) {
      const double dw = std::sqrt(fine_grid[k + 1] - fine_grid[k]) * normal(rng);
      sde_step(fine, k, dw, sf);
      acc += dw;
      if (k + 1 == fine_of_coarse[next_coarse]) {
        sde_step(coarse, next_coarse - 1, acc, sc);
        acc = 0.0;
        for (Index r : slots[next_coarse]) {
          out.fine(i, r) = sf.x;
          out.coarse(i, r) = sc.x;
        }
        ++next_coarse;
      }
    }
    ends(i, 0) = std::abs(sf.x);
    for (std::size_t j = 0; j < nc; ++j) ends(i, static_cast<Index>(j + 1)) = std::abs(sf.ivals[j]);
  };

  const auto n = static_cast<std::int64_t>(n_paths);
  if (exec == Exec::Serial) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
  } else {
    ErrorSlot errors;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) errors.run([&] { body(i); });
    errors.rethrow();
  }
  out.mean_abs_end = ends.colwise().mean().transpose();
  return out;
}

}  // namespace gpcond
