#ifndef MRD_SIMULATION_HPP
#define MRD_SIMULATION_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mrd/critical_values.hpp"
#include "mrd/procedures.hpp"
#include "mrd/scenarios.hpp"

namespace mrd {

// Error accounting for one procedure over a run. Means are over iterations;
// se_* are sample standard deviations over sqrt(iterations).
struct SimulationSummary {
  std::string procedure;
  std::int64_t iterations = 0;
  Index nulls = 0;
  Index alternatives = 0;
  double e_type1 = 0.0;
  double e_type2 = 0.0;
  double fdr = 0.0;
  double total = 0.0;
  double se_type1 = 0.0;
  double se_type2 = 0.0;
  double se_fdr = 0.0;
  double se_total = 0.0;
};

/// sqrt(a.se_total^2 + b.se_total^2), the yardstick for comparing totals of
/// two procedures.
double combined_se(const SimulationSummary& a, const SimulationSummary& b);

// Recipe for a critical schedule, resolved once M is known.
struct ScheduleSpec {
  enum class Family { mrd_two_sided, one_sided_mrd, one_sided_lrsd, one_sided_sd, explicit_values };
  Family family = Family::mrd_two_sided;
  double alpha = 0.05;
  double factor = 0.71;
  std::vector<double> values;  // explicit_values only

  // How the constants meet the statistic: as listed, squared, or carried to
  // the LRT scale by equal null tail probability (equicorrelated models).
  enum class Scale { raw, squared, lrt_tail };
  Scale scale = Scale::raw;
  std::int64_t tail_draws = 20000;
  std::uint64_t tail_seed = 4099;

  /// lrt_tail needs the intraclass model the schedule will be used with.
  CriticalSchedule build(Index m) const;
  CriticalSchedule build(const CovarianceModel& model, Sidedness sided) const;
};

enum class ProcedureKind {
  mrd,
  lrsd,
  step_up,          // Benjamini-Hochberg on marginal p-values
  step_down,        // Holm on marginal p-values
  dunnett,          // step-down with Monte Carlo max-quantiles
  always_accept,
  always_reject,
};

struct ProcedureSpec {
  ProcedureKind kind = ProcedureKind::mrd;
  std::string name;  // column label; defaults to the kind
  Sidedness sided = Sidedness::two_sided;
  ScheduleSpec schedule;  // mrd, lrsd
  double level = 0.05;    // q for step_up, alpha for step_down and dunnett
  Studentization studentization = Studentization::pooled_sd;
  std::int64_t calibration_draws = 1000000;
  std::uint64_t calibration_seed = 20240101;
  std::string calibration_cache;  // optional sidecar path for dunnett

  std::string label() const;
};

const char* to_string(ProcedureKind kind);

// A procedure bound to one scenario, ready to apply to its datasets.
struct NamedProcedure {
  std::string name;
  std::function<DecisionVector(const Dataset&)> apply;
};

/// Resolves schedules against scenario.m and the model; dunnett specs
/// calibrate c(1..M) here, so the returned closure is cheap and thread-safe.
NamedProcedure bind_procedure(const ProcedureSpec& spec, const Scenario& scenario,
                              int workers = 1);

struct RunOptions {
  std::int64_t iterations = 1000;
  int workers = 1;
  std::ostream* trace = nullptr;  // per-iteration counts, CSV; off when null
};

/// Applies every procedure to the same dataset at each iteration (iteration i
/// draws from stream (seed, i)). Per-iteration counts are gathered in
/// fixed-size blocks and reduced in iteration order, so results do not depend
/// on the worker count. A procedure failure is rethrown as NumericalFailure
/// carrying the iteration index and the scenario fingerprint.
std::vector<SimulationSummary> run_simulation(const Scenario& scenario,
                                              const std::vector<NamedProcedure>& procedures,
                                              const RunOptions& options);

std::vector<SimulationSummary> run_simulation(const Scenario& scenario,
                                              const std::vector<ProcedureSpec>& procedures,
                                              const RunOptions& options);

struct GridRow {
  std::string label;
  Scenario scenario;
};

struct ExperimentGrid {
  std::vector<GridRow> rows;
  std::vector<ProcedureSpec> procedures;
  RunOptions options;
};

struct ResultRow {
  std::string label;
  Index nulls = 0;
  Index alternatives = 0;
  std::vector<SimulationSummary> summaries;  // one per procedure, grid order
};

struct ResultTable {
  std::vector<std::string> procedures;
  std::vector<ResultRow> rows;

  /// Long format: one line per (row, procedure), full round-trip precision.
  std::string to_csv() const;
  /// Wide format: one line per row, four columns per procedure, rounded to 2 places.
  std::string to_markdown() const;
};

ResultTable compare_procedures(const ExperimentGrid& grid);

}  // namespace mrd

#endif  // MRD_SIMULATION_HPP
