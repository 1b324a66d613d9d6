// mrdtool: simulation grids, decisions on data files, Dunnett calibration
// and the oracle verification suite.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mrd/config.hpp"
#include "mrd/errors.hpp"
#include "mrd/io.hpp"
#include "mrd/procedures.hpp"
#include "mrd/residuals.hpp"
#include "mrd/simulation.hpp"
#include "mrd/verify.hpp"

namespace {

using namespace mrd;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot write " + path);
  os << text;
}

Sidedness parse_sided(const std::string& s) {
  if (s == "two_sided" || s == "two") return Sidedness::two_sided;
  if (s == "one_sided" || s == "one") return Sidedness::one_sided;
  throw ValidationError("sidedness '" + s + "' is not one of {two_sided, one_sided}");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0) throw ValidationError("--values: '" + cell + "' is not a number");
    out.push_back(v);
  }
  return out;
}

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iterations;
  std::optional<int> workers;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::string trace;
};

int run_simulate(const SimulateArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  RunOverrides o;
  o.seed = a.seed;
  o.iterations = a.iterations;
  o.workers = a.workers;
  if (a.format) o.format = parse_output_format(*a.format);
  o.out = a.out;
  apply_overrides(cfg, o);

  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace, std::ios::trunc);
    if (!trace) throw ValidationError("cannot write " + a.trace);
    trace << "iteration,procedure,V,R,type2\n";
    cfg.grid.options.trace = &trace;
  }
  std::cerr << "simulate: " << cfg.grid.rows.size() << " rows x " << cfg.grid.procedures.size()
            << " procedures, " << cfg.grid.options.iterations << " iterations, "
            << cfg.grid.options.workers << " workers\n";
  const ResultTable table = compare_procedures(cfg.grid);
  write_output(cfg.out, render(table, cfg.format));
  return 0;
}

struct TestDataArgs {
  std::string data;
  std::string model = "identity";
  double rho = 0.5;
  double scale = 1.0;
  std::string matrix;
  std::string procedure = "mrd";
  std::string sided = "two_sided";
  std::string schedule = "mrd_two_sided";
  double alpha = 0.05;
  double factor = 0.71;
  std::string values;
  std::string constants = "raw";
  std::int64_t tail_draws = 20000;
  std::uint64_t tail_seed = 4099;
  double level = 0.05;
  std::int64_t draws = 1000000;
  std::uint64_t calibration_seed = 20240101;
  std::string out;
};

CovarianceModel build_model(const TestDataArgs& a, Index m) {
  if (a.model == "identity") return CovarianceModel::identity(m, a.scale);
  if (a.model == "intraclass") return CovarianceModel::intraclass(m, a.rho, a.scale);
  if (a.model == "change_point") return CovarianceModel::change_point(m, a.scale);
  if (a.model == "successive") return CovarianceModel::successive(m, a.rho, a.scale);
  if (a.model == "dense") {
    if (a.matrix.empty()) throw ValidationError("--model dense needs --matrix");
    Eigen::MatrixXd s = read_matrix_csv(a.matrix);
    if (s.rows() != m || s.cols() != m) {
      throw ValidationError("--matrix is " + std::to_string(s.rows()) + "x" +
                            std::to_string(s.cols()) + " but the data file has " +
                            std::to_string(m) + " values");
    }
    return CovarianceModel::dense(std::move(s), a.scale);
  }
  throw ValidationError("model '" + a.model +
                        "' is not one of {identity, intraclass, change_point, successive, dense}");
}

int run_test_data(const TestDataArgs& a) {
  const DataFile data = read_data_csv(a.data);
  const Index m = data.x.size();
  const CovarianceModel model = build_model(a, m);
  const Sidedness sided = parse_sided(a.sided);

  ScheduleSpec spec;
  spec.alpha = a.alpha;
  spec.factor = a.factor;
  if (a.constants == "raw") spec.scale = ScheduleSpec::Scale::raw;
  else if (a.constants == "squared") spec.scale = ScheduleSpec::Scale::squared;
  else if (a.constants == "lrt_tail") spec.scale = ScheduleSpec::Scale::lrt_tail;
  else throw ValidationError("constants '" + a.constants + "' is not one of {raw, squared, lrt_tail}");
  spec.tail_draws = a.tail_draws;
  spec.tail_seed = a.tail_seed;
  if (a.schedule == "mrd_two_sided") spec.family = ScheduleSpec::Family::mrd_two_sided;
  else if (a.schedule == "one_sided_mrd") spec.family = ScheduleSpec::Family::one_sided_mrd;
  else if (a.schedule == "one_sided_lrsd") spec.family = ScheduleSpec::Family::one_sided_lrsd;
  else if (a.schedule == "one_sided_sd") spec.family = ScheduleSpec::Family::one_sided_sd;
  else if (a.schedule == "explicit") {
    spec.family = ScheduleSpec::Family::explicit_values;
    spec.values = parse_list(a.values);
  } else {
    throw ValidationError("schedule '" + a.schedule + "' is not a known family");
  }

  DecisionVector d;
  if (a.procedure == "mrd") {
    d = mrd::mrd(data.x, model, spec.build(model, sided), sided, data.variance);
  } else if (a.procedure == "lrsd") {
    if (data.variance) throw ValidationError("lrsd supports known variance only");
    d = lrsd(data.x, model, spec.build(model, sided), sided);
  } else if (a.procedure == "step_up") {
    d = bh_step_up(marginal_pvalues(data.x, model, sided, data.variance), a.level);
  } else if (a.procedure == "step_down") {
    d = holm_step_down_marginal(marginal_pvalues(data.x, model, sided, data.variance), a.level);
  } else if (a.procedure == "dunnett") {
    if (data.variance) throw ValidationError("dunnett supports known variance only");
    if (model.kind() != ModelKind::intraclass) {
      throw ValidationError("dunnett needs --model intraclass");
    }
    const DunnettCalibrator calib(model.rho(), a.level, a.calibration_seed, a.draws, sided);
    d = dunnett_step_down(data.x, model, calib);
  } else {
    throw ValidationError("procedure '" + a.procedure +
                          "' is not one of {mrd, lrsd, step_up, step_down, dunnett}");
  }
  std::ostringstream os;
  write_decision_csv(os, d);
  write_output(a.out, os.str());
  return 0;
}

struct VerifyArgs {
  std::uint64_t seed = 7;
  int trials = 100;
  bool flip = false;
  std::string matrix;
  std::string dump;
};

int run_verify(const VerifyArgs& a) {
  VerifyOptions opt;
  opt.seed = a.seed;
  opt.trials = a.trials;
  opt.flip_changepoint_sign = a.flip;
  std::vector<CheckResult> results = run_verification(opt);

  if (!a.matrix.empty()) {
    CheckResult r;
    r.name = "dense matrix file: solve matches LU inverse";
    r.tolerance = 1e-10;
    const Eigen::MatrixXd s = read_matrix_csv(a.matrix);
    const CovarianceModel model = CovarianceModel::dense(s);
    const ActiveSet all = ActiveSet::full(model.size());
    const Eigen::MatrixXd inv = s.fullPivLu().inverse();
    for (Index j = 0; j < model.size(); ++j) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(model.size(), j);
      const Eigen::VectorXd col = principal_submatrix_solve(model, all, e);
      r.max_error = std::max(r.max_error, (col - inv.col(j)).cwiseAbs().maxCoeff());
    }
    r.passed = r.max_error <= r.tolerance;
    results.push_back(r);
    if (!a.dump.empty()) {
      std::ofstream os(a.dump, std::ios::trunc);
      if (!os) throw ValidationError("cannot write " + a.dump);
      write_matrix_csv(os, model.dense());
    }
  }

  bool all_passed = true;
  std::cout << std::setprecision(3);
  for (const auto& r : results) {
    all_passed = all_passed && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  (max error " << r.max_error
              << ", tolerance " << r.tolerance << ")";
    if (!r.detail.empty()) std::cout << "  " << r.detail;
    std::cout << '\n';
  }
  return all_passed ? 0 : 1;
}

struct CalibrateArgs {
  double rho = 0.5;
  double alpha = 0.05;
  Index k_max = 10;
  std::int64_t draws = 1000000;
  std::uint64_t seed = 20240101;
  std::string sided = "one_sided";
  int workers = 1;
  std::string cache;
  std::string out;
};

int run_calibrate(const CalibrateArgs& a) {
  DunnettCalibrator calib(a.rho, a.alpha, a.seed, a.draws, parse_sided(a.sided), a.workers);
  if (!a.cache.empty()) calib.load(a.cache);
  calib.prepare(a.k_max);
  if (!a.cache.empty()) calib.save(a.cache);
  std::ostringstream os;
  os << std::setprecision(17) << "k,threshold,se,draws\n";
  for (Index k = 1; k <= a.k_max; ++k) {
    const McQuantile q = calib.quantile(k);
    os << k << ',' << q.threshold << ',' << q.standard_error << ',' << q.draws << '\n';
  }
  write_output(a.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum residual down multiple testing toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation grid from a JSON config");
  simulate->add_option("config", sim.config, "Config file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", sim.seed, "Override run.seed");
  simulate->add_option("--iterations", sim.iterations, "Override run.iterations");
  simulate->add_option("--workers", sim.workers, "Override run.workers");
  simulate->add_option("--format", sim.format, "csv or md")->check(CLI::IsMember({"csv", "md"}));
  simulate->add_option("--out", sim.out, "Output path (default stdout)");
  simulate->add_option("--trace", sim.trace, "Per-iteration counts CSV");

  TestDataArgs td;
  auto* test_data = app.add_subcommand("test-data", "Apply a procedure to a data file");
  test_data->add_option("data", td.data, "One value per line, optional s2=,nu= header")
      ->required()
      ->check(CLI::ExistingFile);
  test_data->add_option("--model", td.model,
                        "identity, intraclass, change_point, successive or dense");
  test_data->add_option("--rho", td.rho, "Correlation for intraclass/successive");
  test_data->add_option("--scale", td.scale, "Covariance scale");
  test_data->add_option("--matrix", td.matrix, "Dense covariance CSV (row-major)");
  test_data->add_option("--procedure", td.procedure,
                        "mrd, lrsd, step_up, step_down or dunnett");
  test_data->add_option("--sided", td.sided, "two_sided or one_sided");
  test_data->add_option("--schedule", td.schedule,
                        "mrd_two_sided, one_sided_mrd, one_sided_lrsd, one_sided_sd or explicit");
  test_data->add_option("--alpha", td.alpha, "Schedule level");
  test_data->add_option("--factor", td.factor, "Schedule shrink factor");
  test_data->add_option("--values", td.values, "Explicit constants, comma separated");
  test_data->add_option("--constants", td.constants,
                        "raw, squared or lrt_tail (constants carried to the LRT scale)");
  test_data->add_option("--tail-draws", td.tail_draws, "Draws for the lrt_tail weights");
  test_data->add_option("--tail-seed", td.tail_seed, "Seed for the lrt_tail weights");
  test_data->add_option("--level", td.level, "q for step_up, alpha for step_down/dunnett");
  test_data->add_option("--draws", td.draws, "Monte Carlo draws for dunnett");
  test_data->add_option("--calibration-seed", td.calibration_seed, "Seed for dunnett");
  test_data->add_option("--out", td.out, "Output path (default stdout)");

  VerifyArgs vf;
  auto* verify = app.add_subcommand("verify", "Run the closed-form versus oracle checks");
  verify->add_option("--seed", vf.seed, "Seed for random instances");
  verify->add_option("--trials", vf.trials, "Random instances per check");
  verify->add_flag("--flip-changepoint-sign", vf.flip, "Mutation check: negate the closed form");
  verify->add_option("--matrix", vf.matrix, "Also check a dense covariance CSV");
  verify->add_option("--dump", vf.dump, "Write the parsed --matrix back out as CSV");

  CalibrateArgs cb;
  auto* calibrate = app.add_subcommand("calibrate", "Monte Carlo Dunnett step-down constants");
  calibrate->add_option("--rho", cb.rho, "Equicorrelation");
  calibrate->add_option("--alpha", cb.alpha, "Level");
  calibrate->add_option("--k-max", cb.k_max, "Largest k")->check(CLI::PositiveNumber);
  calibrate->add_option("--draws", cb.draws, "Monte Carlo draws");
  calibrate->add_option("--seed", cb.seed, "Seed");
  calibrate->add_option("--sided", cb.sided, "one_sided or two_sided");
  calibrate->add_option("--workers", cb.workers, "Threads");
  calibrate->add_option("--cache", cb.cache, "JSON sidecar to reuse and update");
  calibrate->add_option("--out", cb.out, "Output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(sim);
    if (*test_data) return run_test_data(td);
    if (*verify) return run_verify(vf);
    if (*calibrate) return run_calibrate(cb);
  } catch (const std::exception& e) {
    std::cerr << "mrdtool: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
