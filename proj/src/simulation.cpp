#include "mrd/simulation.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <tuple>

#include "mrd/errors.hpp"
#include "mrd/parallel.hpp"

namespace mrd {

namespace {

// Iterations are gathered this many at a time, then reduced in order.
constexpr std::int64_t kBlock = 4096;

struct Counts {
  std::int32_t v = 0;      // rejected true nulls
  std::int32_t r = 0;      // rejections
  std::int32_t type2 = 0;  // accepted true alternatives
};

// Welford accumulator; fed in iteration order only.
struct Moments {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  double se() const {
    if (n < 2) return 0.0;
    return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  }
};

std::optional<VarianceEstimate> variance_of(const Dataset& d) {
  if (!d.s2) return std::nullopt;
  return VarianceEstimate{*d.s2, d.nu};
}

DecisionVector constant_decision(Index m, bool reject) {
  DecisionVector out(m);
  if (reject) {
    for (Index j = 0; j < m; ++j) {
      out.reject[static_cast<std::size_t>(j)] = true;
      out.order.push_back(j);
    }
  }
  return out;
}

// Calibrators are shared between grid rows with the same key, so each
// (rho, alpha, seed, draws, sidedness) is simulated once per process.
std::shared_ptr<DunnettCalibrator> shared_calibrator(double rho, double alpha, std::uint64_t seed,
                                                     std::int64_t draws, Sidedness sided,
                                                     int workers) {
  using Key = std::tuple<double, double, std::uint64_t, std::int64_t, int>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<DunnettCalibrator>> registry;
  const Key key{rho, alpha, seed, draws, sided == Sidedness::two_sided ? 2 : 1};
  std::lock_guard lock(mutex);
  auto& slot = registry[key];
  if (!slot) slot = std::make_shared<DunnettCalibrator>(rho, alpha, seed, draws, sided, workers);
  return slot;
}

}  // namespace

double combined_se(const SimulationSummary& a, const SimulationSummary& b) {
  return std::hypot(a.se_total, b.se_total);
}

CriticalSchedule ScheduleSpec::build(Index m) const {
  std::optional<CriticalSchedule> base;
  switch (family) {
    case Family::mrd_two_sided:
      base = schedule_mrd_two_sided(m, alpha, factor);
      break;
    case Family::one_sided_mrd:
      base = schedule_one_sided(m, alpha, OneSidedFamily::mrd, factor);
      break;
    case Family::one_sided_lrsd:
      base = schedule_one_sided(m, alpha, OneSidedFamily::lrsd);
      break;
    case Family::one_sided_sd:
      base = schedule_one_sided(m, alpha, OneSidedFamily::sd);
      break;
    case Family::explicit_values: {
      if (static_cast<Index>(values.size()) != m) {
        throw ValidationError("schedule: " + std::to_string(values.size()) +
                              " explicit values for M = " + std::to_string(m));
      }
      base = CriticalSchedule(Eigen::Map<const Eigen::VectorXd>(values.data(), m), "explicit");
      break;
    }
  }
  switch (scale) {
    case Scale::raw: return *base;
    case Scale::squared: return base->squared();
    case Scale::lrt_tail: break;
  }
  throw ValidationError("schedule: the lrt_tail scale needs the covariance model");
}

CriticalSchedule ScheduleSpec::build(const CovarianceModel& model, Sidedness sided) const {
  if (scale != Scale::lrt_tail) return build(model.size());
  if (model.kind() != ModelKind::intraclass) {
    throw ValidationError("schedule: the lrt_tail scale needs an intraclass model");
  }
  ScheduleSpec plain = *this;
  plain.scale = Scale::raw;
  return lrt_tail_matched(plain.build(model.size()), model.rho(), sided, tail_draws, tail_seed);
}

const char* to_string(ProcedureKind kind) {
  switch (kind) {
    case ProcedureKind::mrd: return "mrd";
    case ProcedureKind::lrsd: return "lrsd";
    case ProcedureKind::step_up: return "step_up";
    case ProcedureKind::step_down: return "step_down";
    case ProcedureKind::dunnett: return "dunnett";
    case ProcedureKind::always_accept: return "always_accept";
    case ProcedureKind::always_reject: return "always_reject";
  }
  return "?";
}

std::string ProcedureSpec::label() const { return name.empty() ? to_string(kind) : name; }

NamedProcedure bind_procedure(const ProcedureSpec& spec, const Scenario& scenario, int workers) {
  const CovarianceModel model = scenario.covariance();
  const Index m = scenario.m;
  NamedProcedure out{spec.label(), {}};
  const Sidedness sided = spec.sided;

  switch (spec.kind) {
    case ProcedureKind::mrd: {
      const CriticalSchedule schedule = spec.schedule.build(model, sided);
      const Studentization mode = spec.studentization;
      out.apply = [model, schedule, sided, mode](const Dataset& d) {
        return mrd(d.x, model, schedule, sided, variance_of(d), mode);
      };
      break;
    }
    case ProcedureKind::lrsd: {
      const CriticalSchedule schedule = spec.schedule.build(model, sided);
      out.apply = [model, schedule, sided](const Dataset& d) {
        if (d.s2) throw ValidationError("lrsd supports known variance only");
        return lrsd(d.x, model, schedule, sided);
      };
      break;
    }
    case ProcedureKind::step_up: {
      const double q = spec.level;
      out.apply = [model, sided, q](const Dataset& d) {
        return bh_step_up(marginal_pvalues(d.x, model, sided, variance_of(d)), q);
      };
      break;
    }
    case ProcedureKind::step_down: {
      const double alpha = spec.level;
      out.apply = [model, sided, alpha](const Dataset& d) {
        return holm_step_down_marginal(marginal_pvalues(d.x, model, sided, variance_of(d)), alpha);
      };
      break;
    }
    case ProcedureKind::dunnett: {
      if (model.kind() != ModelKind::intraclass) {
        throw ValidationError("procedure " + out.name + ": dunnett needs an intraclass model");
      }
      auto calib = shared_calibrator(model.rho(), spec.level, spec.calibration_seed,
                                     spec.calibration_draws, sided, workers);
      if (!spec.calibration_cache.empty()) calib->load(spec.calibration_cache);
      calib->prepare(m);
      if (!spec.calibration_cache.empty()) calib->save(spec.calibration_cache);
      out.apply = [model, calib](const Dataset& d) {
        if (d.s2) throw ValidationError("dunnett supports known variance only");
        return dunnett_step_down(d.x, model, *calib);
      };
      break;
    }
    case ProcedureKind::always_accept:
      out.apply = [m](const Dataset&) { return constant_decision(m, false); };
      break;
    case ProcedureKind::always_reject:
      out.apply = [m](const Dataset&) { return constant_decision(m, true); };
      break;
  }
  return out;
}

std::vector<SimulationSummary> run_simulation(const Scenario& scenario,
                                              const std::vector<NamedProcedure>& procedures,
                                              const RunOptions& options) {
  scenario.validate();
  if (options.iterations < 1) throw ValidationError("iterations must be at least 1");
  const std::size_t np = procedures.size();
  const auto& is_null = scenario.means.is_null;
  const Index nulls = scenario.means.nulls();
  const Index alternatives = scenario.m - nulls;

  std::vector<Moments> t1(np), t2(np), fdr(np), tot(np);
  std::vector<Counts> block;

  for (std::int64_t start = 0; start < options.iterations; start += kBlock) {
    const std::int64_t len = std::min(kBlock, options.iterations - start);
    block.assign(static_cast<std::size_t>(len) * np, Counts{});
    parallel_for(len, options.workers, [&](std::int64_t begin, std::int64_t end) {
      for (std::int64_t b = begin; b < end; ++b) {
        const std::int64_t it = start + b;
        std::size_t p = 0;
        try {
          const Dataset d = generate(scenario, static_cast<std::uint64_t>(it));
          for (; p < np; ++p) {
            const DecisionVector dv = procedures[p].apply(d);
            if (dv.size() != scenario.m) throw ValidationError("decision has the wrong length");
            Counts c;
            for (Index j = 0; j < scenario.m; ++j) {
              const bool rej = dv.reject[static_cast<std::size_t>(j)];
              const bool null = is_null[static_cast<std::size_t>(j)];
              c.r += rej;
              c.v += rej && null;
              c.type2 += !rej && !null;
            }
            block[static_cast<std::size_t>(b) * np + p] = c;
          }
        } catch (const std::exception& e) {
          std::ostringstream os;
          os << "iteration " << it;
          if (p < np) os << ", procedure " << procedures[p].name;
          os << ", scenario " << scenario.fingerprint() << ": " << e.what();
          throw NumericalFailure(os.str());
        }
      }
    });

    for (std::int64_t b = 0; b < len; ++b) {
      for (std::size_t p = 0; p < np; ++p) {
        const Counts& c = block[static_cast<std::size_t>(b) * np + p];
        t1[p].add(c.v);
        t2[p].add(c.type2);
        tot[p].add(c.v + c.type2);
        fdr[p].add(static_cast<double>(c.v) / static_cast<double>(std::max(c.r, 1)));
        if (options.trace != nullptr) {
          *options.trace << start + b << ',' << procedures[p].name << ',' << c.v << ',' << c.r
                         << ',' << c.type2 << '\n';
        }
      }
    }
  }

  std::vector<SimulationSummary> out(np);
  for (std::size_t p = 0; p < np; ++p) {
    SimulationSummary& s = out[p];
    s.procedure = procedures[p].name;
    s.iterations = options.iterations;
    s.nulls = nulls;
    s.alternatives = alternatives;
    s.e_type1 = t1[p].mean;
    s.e_type2 = t2[p].mean;
    s.fdr = fdr[p].mean;
    s.total = s.e_type1 + s.e_type2;
    s.se_type1 = t1[p].se();
    s.se_type2 = t2[p].se();
    s.se_fdr = fdr[p].se();
    s.se_total = tot[p].se();
  }
  return out;
}

std::vector<SimulationSummary> run_simulation(const Scenario& scenario,
                                              const std::vector<ProcedureSpec>& procedures,
                                              const RunOptions& options) {
  scenario.validate();
  std::vector<NamedProcedure> bound;
  bound.reserve(procedures.size());
  for (const auto& spec : procedures) bound.push_back(bind_procedure(spec, scenario, options.workers));
  return run_simulation(scenario, bound, options);
}

ResultTable compare_procedures(const ExperimentGrid& grid) {
  ResultTable table;
  for (const auto& spec : grid.procedures) table.procedures.push_back(spec.label());
  // Everything is validated and bound before the first iteration runs.
  std::vector<std::vector<NamedProcedure>> bound;
  for (const auto& row : grid.rows) {
    row.scenario.validate();
    std::vector<NamedProcedure> procs;
    for (const auto& spec : grid.procedures) {
      procs.push_back(bind_procedure(spec, row.scenario, grid.options.workers));
    }
    bound.push_back(std::move(procs));
  }
  for (std::size_t r = 0; r < grid.rows.size(); ++r) {
    const auto& row = grid.rows[r];
    ResultRow out;
    out.label = row.label;
    out.nulls = row.scenario.means.nulls();
    out.alternatives = row.scenario.m - out.nulls;
    out.summaries = run_simulation(row.scenario, bound[r], grid.options);
    table.rows.push_back(std::move(out));
  }
  return table;
}

std::string ResultTable::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "row,nulls,alternatives,procedure,iterations,e_type1,e_type2,fdr,total,"
        "se_type1,se_type2,se_fdr,se_total\n";
  for (const auto& row : rows) {
    for (const auto& s : row.summaries) {
      os << row.label << ',' << row.nulls << ',' << row.alternatives << ',' << s.procedure << ','
         << s.iterations << ',' << s.e_type1 << ',' << s.e_type2 << ',' << s.fdr << ','
         << s.total << ',' << s.se_type1 << ',' << s.se_type2 << ',' << s.se_fdr << ','
         << s.se_total << '\n';
    }
  }
  return os.str();
}

std::string ResultTable::to_markdown() const {
  std::ostringstream os;
  os << "| row | nulls | alternatives |";
  for (const auto& p : procedures) {
    os << ' ' << p << " type I | " << p << " type II | " << p << " FDR | " << p << " total |";
  }
  os << "\n|---|---:|---:|";
  for (std::size_t i = 0; i < procedures.size(); ++i) os << "---:|---:|---:|---:|";
  os << '\n';
  os << std::fixed << std::setprecision(2);
  for (const auto& row : rows) {
    os << "| " << row.label << " | " << row.nulls << " | " << row.alternatives << " |";
    for (const auto& s : row.summaries) {
      os << ' ' << s.e_type1 << " | " << s.e_type2 << " | " << s.fdr << " | " << s.total << " |";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace mrd
