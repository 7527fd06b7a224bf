// gpcond: sample and check Gaussian processes conditioned on vanishing linear
// functionals.
//
//   gpcond --preset zabb sample --method sde --n-paths 4 --out paths.csv --long
//   gpcond --config model.json covariance --s 0.1,0.5 --t 0.5,0.9
//   gpcond --preset bridge verify
//
// Exit codes: 0 ok, 1 usage or runtime error, 2 verification failure.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpcond/batch.hpp"
#include "gpcond/conditioning.hpp"
#include "gpcond/markov_sde.hpp"
#include "gpcond/model_spec.hpp"
#include "gpcond/rng.hpp"
#include "gpcond/series.hpp"
#include "gpcond/verify.hpp"

namespace {

using namespace gpcond;

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string numbered(const std::string& path, std::size_t i) {
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + "_" + std::to_string(i) + p.extension().string())).string();
}

// Cumulative integrals of the piecewise-linear path against each condition.
std::vector<std::vector<double>> running_integrals(const ConditionedModel& m, const std::vector<double>& grid,
                                                   const std::vector<double>& x) {
  std::vector<std::vector<double>> out;
  for (const auto& c : m.basis().conditions()) {
    const CellWeights cw = cell_weights(c, grid);
    std::vector<double> acc{cw.initial * x[0]};
    for (std::size_t k = 0; k + 1 < grid.size(); ++k)
      acc.push_back(acc.back() + cw.left[k] * x[k] + cw.right[k] * x[k + 1]);
    out.push_back(std::move(acc));
  }
  return out;
}

struct Global {
  std::string config;
  std::string preset;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;
  std::string dump_spec;
};

struct SampleOpts {
  std::string method = "anticipative";
  std::size_t n_paths = 1;
  std::size_t grid = 512;
  std::size_t terms = 1024;
  double dt = 1e-3;
  double eps_end = 0.0;
  bool long_format = false;
  bool augmented = false;
};

ModelSpec load_spec(const Global& g) {
  if (!g.config.empty() && !g.preset.empty()) throw CLI::ValidationError("--config and --preset are exclusive");
  if (!g.preset.empty()) return preset(g.preset);
  if (g.config.empty()) throw CLI::ValidationError("one of --config or --preset is required");
  std::ifstream in(g.config);
  if (!in) throw std::runtime_error("cannot read config '" + g.config + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config '" + g.config + "' is not valid JSON: " + e.what());
  }
  return parse_model(j);
}

void write_path(std::ostream& os, const ConditionedModel& m, const std::vector<double>& grid,
                const std::vector<double>& x, const std::vector<std::vector<double>>& ivals, bool augmented,
                bool with_id, std::size_t id) {
  const std::size_t n = m.basis().size();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (with_id) os << id << ',';
    os << num(grid[k]) << ',' << num(x[k]);
    if (augmented)
      for (std::size_t j = 0; j < n; ++j) os << ',' << num(ivals[j][k]);
    os << '\n';
  }
}

void write_header(std::ostream& os, std::size_t n, bool augmented, bool with_id) {
  if (with_id) os << "path_id,";
  os << "s,x";
  if (augmented)
    for (std::size_t j = 0; j < n; ++j) os << ",i" << j + 1;
  os << '\n';
}

int cmd_sample(const Global& g, const SampleOpts& o, const CLI::App& sub) {
  if (o.method != "anticipative" && o.method != "series" && o.method != "sde")
    throw std::invalid_argument("method must be anticipative, series or sde");
  if (o.method != "sde" && (sub.count("--dt") || sub.count("--eps-end")))
    throw std::invalid_argument("--dt and --eps-end apply to --method sde only");
  if (o.method != "series" && sub.count("--terms")) throw std::invalid_argument("--terms applies to --method series only");
  if (o.method == "sde" && sub.count("--grid")) throw std::invalid_argument("--grid does not apply to --method sde");
  if (o.n_paths == 0) throw std::invalid_argument("n-paths must be positive");
  if (o.grid < 2) throw std::invalid_argument("grid must have at least 2 points");

  const ModelSpec spec = load_spec(g);
  const ConditionedModel m(build_kernel(spec), spec.conditions);
  const double T = m.horizon();
  const std::size_t n = m.basis().size();

  std::unique_ptr<DriftEvaluator> de;
  std::unique_ptr<SeriesBasis> sb;
  std::vector<double> grid;
  Eigen::MatrixXd deflated;
  if (o.method == "sde") {
    if (!(o.dt > 0.0)) throw std::invalid_argument("dt must be positive");
    de = std::make_unique<DriftEvaluator>(m, drift_options(spec));
  } else {
    grid = uniform_grid(T, o.grid);
  }
  if (o.method == "series") {
    sb = std::make_unique<SeriesBasis>(m, o.terms);
    deflated = sb->deflated(grid);
  }
  const double eps_end = o.eps_end > 0.0 ? o.eps_end : 1e-3 * T;
  if (sub.count("--eps-end") && !(o.eps_end > 0.0)) throw std::invalid_argument("eps-end must be positive");

  const bool single_file = o.long_format || o.n_paths == 1 || g.out.empty() || g.out == "-";
  std::unique_ptr<Output> shared;
  if (single_file) {
    shared = std::make_unique<Output>(g.out);
    write_header(shared->stream(), n, o.augmented, o.long_format);
  }

  for (std::size_t i = 0; i < o.n_paths; ++i) {
    const std::uint64_t seed = derive_seed(g.seed, i);
    std::vector<double> ts;
    std::vector<double> xs;
    std::vector<std::vector<double>> iv;
    if (o.method == "anticipative") {
      const auto cp = anticipative_transform(m, sample_base_path(m.kernel(), grid, seed));
      ts = cp.path.grid;
      xs = cp.path.values;
    } else if (o.method == "series") {
      Engine rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::VectorXd omega(static_cast<Eigen::Index>(o.terms));
      for (Eigen::Index j = 0; j < omega.size(); ++j) omega(j) = normal(rng);
      const auto cp = series_path(*sb, deflated, grid, omega);
      ts = cp.path.grid;
      xs = cp.path.values;
    } else {
      auto ap = integrate_sde(*de, o.dt, seed, eps_end);
      ts = std::move(ap.grid);
      xs = std::move(ap.x);
      iv = std::move(ap.ivals);
    }
    if (o.augmented && iv.empty()) iv = running_integrals(m, ts, xs);

    if (single_file) {
      write_path(shared->stream(), m, ts, xs, iv, o.augmented, o.long_format, i);
    } else {
      Output out(numbered(g.out, i));
      write_header(out.stream(), n, o.augmented, false);
      write_path(out.stream(), m, ts, xs, iv, o.augmented, false, i);
    }
  }
  return 0;
}

std::vector<double> default_lattice(double T) {
  std::vector<double> v;
  for (int i = 1; i <= 9; ++i) v.push_back(0.1 * i * T);
  return v;
}

int cmd_covariance(const Global& g, std::vector<double> s, std::vector<double> t, bool zip) {
  const ModelSpec spec = load_spec(g);
  const ConditionedModel m(build_kernel(spec), spec.conditions);
  if (s.empty()) s = default_lattice(m.horizon());
  if (t.empty()) t = s;
  for (double v : s)
    if (v < 0.0 || v > m.horizon()) throw std::invalid_argument("s values must lie in [0, T]");
  for (double v : t)
    if (v < 0.0 || v > m.horizon()) throw std::invalid_argument("t values must lie in [0, T]");
  if (zip && s.size() != t.size()) throw std::invalid_argument("--zip needs equally long --s and --t lists");
  Output out(g.out);
  auto& os = out.stream();
  os << "s,t,cov\n";
  if (zip) {
    for (std::size_t i = 0; i < s.size(); ++i) os << num(s[i]) << ',' << num(t[i]) << ',' << num(m.cond_cov(s[i], t[i])) << '\n';
  } else {
    for (double a : s)
      for (double b : t) os << num(a) << ',' << num(b) << ',' << num(m.cond_cov(a, b)) << '\n';
  }
  return 0;
}

int cmd_drift_table(const Global& g, std::vector<double> s_grid, std::vector<double> state, bool generic) {
  const ModelSpec spec = load_spec(g);
  const ConditionedModel m(build_kernel(spec), spec.conditions);
  const DriftEvaluator de(m, drift_options(spec));
  if (s_grid.empty()) s_grid = default_lattice(m.horizon());
  const std::size_t n = m.basis().size();
  if (state.empty()) state.assign(n + 1, 0.0);
  if (state.size() != n + 1)
    throw std::invalid_argument("--state needs " + std::to_string(n + 1) + " values (x, i1..i" + std::to_string(n) + ")");
  Output out(g.out);
  auto& os = out.stream();
  os << "s,drift\n";
  for (double s : s_grid) {
    const AugmentedState st{s, state[0], std::vector<double>(state.begin() + 1, state.end())};
    os << num(s) << ',' << num(generic ? de.generic_drift(st) : de.drift(st)) << '\n';
  }
  return 0;
}

int cmd_verify(const Global& g, const VerifyConfig& base, bool negate) {
  const ModelSpec spec = load_spec(g);
  const ConditionedModel m(build_kernel(spec), spec.conditions);
  DriftOptions opts = drift_options(spec);
  opts.negate = negate;
  const DriftEvaluator de(m, opts);
  VerifyConfig cfg = base;
  cfg.seed = g.seed;
  const CrossMethodReport rep = cross_method_report(m, de, cfg);
  Output out(g.out);
  out.stream() << to_json(rep).dump(2) << '\n';
  std::cerr << "verify: " << (rep.pass ? "PASS" : "FAIL") << " (anticipative max|z| " << rep.anticipative.max_abs_z
            << ", series max|z| " << rep.series.max_abs_z << ", sde max|z| " << rep.sde.max_abs_z << ", sde rmse "
            << rep.sde.rmse << " vs " << rep.sde_coarse.rmse << " at 2dt)\n";
  return rep.pass ? 0 : 2;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& a) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(row);
  }
  return rows;
}

int cmd_dump_geometry(const Global& g) {
  const ModelSpec spec = load_spec(g);
  const ConditionedModel m(build_kernel(spec), spec.conditions);
  nlohmann::json j;
  j["kernel"] = m.kernel().name();
  j["T"] = m.horizon();
  j["gram"] = matrix_json(m.basis().gram());
  j["coeffs"] = matrix_json(m.basis().coeffs());
  j["rank"] = m.rank();
  j["kept"] = m.basis().kept();
  j["dropped"] = m.basis().dropped();
  j["B"] = matrix_json(m.B());
  j["B_condition_number"] = m.B_condition_number();
  j["orthonormality_residual"] = residual_check(m.basis());
  Output out(g.out);
  out.stream() << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample Gaussian processes conditioned on vanishing linear functionals"};
  app.require_subcommand(0, 1);
  Global g;
  app.add_option("--config", g.config, "JSON model file");
  app.add_option("--preset", g.preset, "Built-in model")->check(CLI::IsMember({"zabb", "bridge"}));
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--threads", g.threads, "Worker thread cap (falls back to GPCOND_THREADS)");
  app.add_option("--out", g.out, "Output file (default stdout)");
  app.add_option("--dump-spec", g.dump_spec, "Write the resolved model as JSON to this file ('-' for stdout)");

  SampleOpts so;
  auto* sample = app.add_subcommand("sample", "Write conditioned paths as CSV");
  sample->add_option("--method", so.method, "anticipative, series or sde");
  sample->add_option("--n-paths", so.n_paths, "Number of paths");
  sample->add_option("--grid", so.grid, "Grid points on [0, T] (anticipative, series)");
  sample->add_option("--terms", so.terms, "Series terms (series)");
  sample->add_option("--dt", so.dt, "Euler-Maruyama step (sde)");
  sample->add_option("--eps-end", so.eps_end, "Stop at T - eps-end (sde; default 1e-3 T)");
  sample->add_flag("--long", so.long_format, "One file with a path_id column");
  sample->add_flag("--augmented", so.augmented, "Add the integrals i1..iN as columns");

  std::vector<double> cov_s, cov_t;
  bool zip = false;
  auto* cov = app.add_subcommand("covariance", "Conditioned covariance table");
  cov->add_option("--s", cov_s, "s values")->delimiter(',');
  cov->add_option("--t", cov_t, "t values (default: the s values)")->delimiter(',');
  cov->add_flag("--zip", zip, "Pair s and t elementwise instead of the full product");

  std::vector<double> s_grid, state;
  bool generic = false;
  auto* drift = app.add_subcommand("drift-table", "Drift at fixed state over a list of times");
  drift->add_option("--s-grid", s_grid, "Times")->delimiter(',');
  drift->add_option("--state", state, "x,i1,..,iN (default zeros)")->delimiter(',');
  drift->add_flag("--generic", generic, "Ignore any closed-form drift");

  VerifyConfig vc;
  bool negate = false;
  auto* verify = app.add_subcommand("verify", "Cross-check the three samplers against the analytic covariance");
  verify->add_option("--paths", vc.anticipative_paths, "Anticipative paths");
  verify->add_option("--series-paths", vc.series_paths, "Series paths");
  verify->add_option("--terms", vc.series_terms, "Series terms");
  verify->add_option("--sde-paths", vc.sde_paths, "SDE paths");
  verify->add_option("--dt", vc.sde_dt, "SDE step as a fraction of T");
  verify->add_option("--grid", vc.grid_points, "Anticipative grid points");
  verify->add_flag("--serial", [&](std::int64_t) { vc.parallel = false; }, "Run single-threaded");
  verify->add_flag("--negate-drift", negate)->group("");

  auto* geometry = app.add_subcommand("dump-geometry", "Gram matrix, coefficients and B as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (g.threads <= 0) {
      if (const char* env = std::getenv("GPCOND_THREADS")) g.threads = std::atoi(env);
    }
    set_threads(g.threads);

    if (!g.dump_spec.empty()) {
      Output out(g.dump_spec);
      out.stream() << dump_model(load_spec(g)).dump(2) << '\n';
    }
    if (*sample) return cmd_sample(g, so, *sample);
    if (*cov) return cmd_covariance(g, cov_s, cov_t, zip);
    if (*drift) return cmd_drift_table(g, s_grid, state, generic);
    if (*verify) return cmd_verify(g, vc, negate);
    if (*geometry) return cmd_dump_geometry(g);
    if (g.dump_spec.empty()) {
      std::cerr << app.help();
      return 1;
    }
    return 0;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
