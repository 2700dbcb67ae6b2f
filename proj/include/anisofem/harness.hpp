#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "anisofem/analysis.hpp"
#include "anisofem/assembly.hpp"
#include "anisofem/field.hpp"
#include "anisofem/problems.hpp"
#include "anisofem/solver.hpp"

#include "json.hpp"

namespace anisofem {

enum class ExperimentKind {
    solve,
    sweep_eps,
    sweep_h_uniform,
    check_decomp,
    check_h2,
    validate,
};

const char* to_string(ExperimentKind kind);

struct MeshConfig {
    std::vector<int> uniform_cells;           // one entry per axis (single entry replicates)
    std::vector<std::vector<double>> points;  // explicit per-axis point lists

    bool has_points() const { return !points.empty(); }
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::solve;
    int dim = 2;
    int split = 1;

    std::string diffusion = "identity";
    DiffusionParams diffusion_params;
    std::string source = "sine-product";

    MeshConfig mesh;
    double eps = 1.0;    // solve only
    bool limit = false;  // solve only: use the limit scheme

    std::vector<double> eps_list;   // sweep-eps, sweep-h-uniform, check-h2
    std::vector<int> cells_list;    // sweep-h-uniform, ascending
    std::vector<double> delta_list; // check-decomp, descending
    int fine_cells = 0;             // check-decomp sampling mesh; 0 picks 1024 (2D) or 128 (3D)

    LoadMode load_mode = LoadMode::interpolated;
    int quad_points = 2;
    double solver_tol = 1e-10;
    int threads = 1;

    std::string out_dir;
    bool dump_fields = false;

    bool assert_enabled = true;
    // NaN means "use the default for this experiment and source".
    double slope_min = NAN;
    double slope_max = NAN;
    double ratio_max = NAN;
    double target_tol = NAN;
};

ExperimentConfig parse_config(const nlohmann::json& j,
                              std::optional<ExperimentKind> kind_override = {});
ExperimentConfig load_config_file(const std::string& path,
                                  std::optional<ExperimentKind> kind_override = {});

struct CaseRow {
    double param = 0.0;
    std::vector<double> values;
    bool at_floor = false;
    bool asserted = true;
    SolveStats stats;
};

struct ColumnFit {
    std::string column;
    bool fitted = false;
    RateFit fit;
    bool asserted = false;
    double slope_min = NAN;  // bound applied (NaN: none)
    double slope_max = NAN;
    bool pass = true;
};

struct RateReport {
    ExperimentKind kind = ExperimentKind::solve;
    std::string param_name;
    std::vector<std::string> columns;
    std::vector<CaseRow> rows;
    std::vector<ColumnFit> fits;
    double ratio = NAN;  // check-h2: max/min of the combined indicator
    bool pass = true;
    std::vector<std::string> notes;
};

RateReport run_case(const ExperimentConfig& config);
RateReport run_eps_sweep(const ExperimentConfig& config);
RateReport run_h_sweep_uniform(const ExperimentConfig& config);
RateReport run_decomp_check(const ExperimentConfig& config);
RateReport run_h2_indicator_sweep(const ExperimentConfig& config);
RateReport run_validation(const ExperimentConfig& config);

/// Dispatch on config.kind; writes the CSV report, the plain-text summary and
/// any requested field dumps under config.out_dir when it is set.
RateReport run_experiment(const ExperimentConfig& config);

/// Report CSV: header "kind,param_name,param,<columns...>,at_floor,asserted,
/// cg_iterations,cg_relres", one row per case, footer rows "slope,...",
/// "r2,...", "pass,...". All floats carry 17 significant digits, so reruns
/// are byte-identical.
void write_report_csv(const RateReport& report, std::ostream& out);
void write_summary(const RateReport& report, std::ostream& out);

std::string fmt17(double v);

/// Command-line entry point (subcommands solve, sweep-eps, sweep-h,
/// check-decomp, check-h2, validate). Returns 0 on pass, 2 when an asserted
/// check fails, 1 on errors.
int run_cli(int argc, const char* const* argv);

}  // namespace anisofem
