#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"

#include "anisofem/errors.hpp"
#include "anisofem/harness.hpp"
#include "oracle.hpp"

using namespace anisofem;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "anisofem-harness-tests";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string write_config(const std::string& name, const std::string& text) {
    const auto path = scratch_dir() / name;
    std::ofstream out(path);
    out << text;
    return path.string();
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    REQUIRE(bool(in));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_binary(const std::string& args) {
    const std::string cmd =
        std::string(ANISOFEM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string csv_of(const RateReport& report) {
    std::ostringstream out;
    write_report_csv(report, out);
    return out.str();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config defaults") {
    const ExperimentConfig cfg = parse_config(json::parse(R"({"experiment":"solve"})"));
    CHECK(cfg.kind == ExperimentKind::solve);
    CHECK(cfg.dim == 2);
    CHECK(cfg.split == 1);
    CHECK(cfg.diffusion == "identity");
    CHECK(cfg.source == "sine-product");
    CHECK(cfg.eps == 1.0);
    CHECK_FALSE(cfg.limit);
    CHECK(cfg.mesh.uniform_cells.empty());
    CHECK_FALSE(cfg.mesh.has_points());
    CHECK(cfg.load_mode == LoadMode::interpolated);
    CHECK(cfg.quad_points == 2);
    CHECK(cfg.solver_tol == 1e-10);
    CHECK(cfg.threads == 1);
    CHECK(cfg.out_dir.empty());
    CHECK_FALSE(cfg.dump_fields);
    CHECK(cfg.assert_enabled);
    CHECK(std::isnan(cfg.slope_min));
    CHECK(std::isnan(cfg.slope_max));
    CHECK(std::isnan(cfg.ratio_max));
    CHECK(std::isnan(cfg.target_tol));
}

TEST_CASE("config full round trip") {
    const char* text = R"({
        "experiment": "sweep-eps",
        "dim": 3,
        "q": 2,
        "diffusion": "variable-offdiag",
        "diffusion_params": {"beta": 0.25, "a11": 0.9},
        "source": "one",
        "mesh": {"uniform": [4, 4, 8]},
        "eps_list": [0.5, 0.25],
        "load_mode": "quadrature",
        "quad_points": 3,
        "solver_tol": 1e-12,
        "threads": 2,
        "out": "somewhere",
        "dump_fields": true,
        "assert": false,
        "slope_min": 0.8,
        "slope_max": 1.2
    })";
    const ExperimentConfig cfg = parse_config(json::parse(text));
    CHECK(cfg.kind == ExperimentKind::sweep_eps);
    CHECK(cfg.dim == 3);
    CHECK(cfg.split == 2);
    CHECK(cfg.diffusion == "variable-offdiag");
    CHECK(cfg.diffusion_params.beta == 0.25);
    CHECK(cfg.diffusion_params.a11 == 0.9);
    CHECK(cfg.source == "one");
    CHECK(cfg.mesh.uniform_cells == std::vector<int>{4, 4, 8});
    CHECK(cfg.eps_list == std::vector<double>{0.5, 0.25});
    CHECK(cfg.load_mode == LoadMode::quadrature);
    CHECK(cfg.quad_points == 3);
    CHECK(cfg.solver_tol == 1e-12);
    CHECK(cfg.threads == 2);
    CHECK(cfg.out_dir == "somewhere");
    CHECK(cfg.dump_fields);
    CHECK_FALSE(cfg.assert_enabled);
    CHECK(cfg.slope_min == 0.8);
    CHECK(cfg.slope_max == 1.2);
}

TEST_CASE("config kind override") {
    const json j = json::parse(R"({"mesh":{"uniform":[4]}})");
    const ExperimentConfig cfg = parse_config(j, ExperimentKind::validate);
    CHECK(cfg.kind == ExperimentKind::validate);

    CHECK(oracle::error_code_of([&] { parse_config(j); }) == ErrorCode::invalid_config);
    CHECK(oracle::error_code_of([] {
        parse_config(json::parse(R"({"experiment":"solve"})"), ExperimentKind::sweep_eps);
    }) == ErrorCode::invalid_config);
}

TEST_CASE("config rejections") {
    const auto code = [](const char* text) {
        return oracle::error_code_of([&] { parse_config(json::parse(text)); });
    };
    CHECK(code(R"({"experiment":"collect"})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","bogus":1})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":5})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","dim":4})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","q":0})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","q":2})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","eps":0.0})") == ErrorCode::invalid_epsilon);
    CHECK(code(R"({"experiment":"solve","eps":1.5})") == ErrorCode::invalid_epsilon);
    CHECK(code(R"({"experiment":"sweep-eps","eps_list":[0.25,0.5]})") ==
          ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"sweep-eps","eps_list":[0.5,0.0]})") ==
          ErrorCode::invalid_epsilon);
    CHECK(code(R"({"experiment":"check-decomp","delta_list":[1.0,0.5]})") ==
          ErrorCode::invalid_delta);
    CHECK(code(R"({"experiment":"sweep-h-uniform","cells_list":[8,4]})") ==
          ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"sweep-h-uniform","cells_list":[1,4]})") ==
          ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","threads":0})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","load_mode":"exact"})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","quad_points":4})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","solver_tol":0.0})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","mesh":{}})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","mesh":{"uniform":[4],"points":[[0,1]]}})") ==
          ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","mesh":{"cells":4}})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","mesh":{"uniform":[1]}})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","diffusion_params":{"gamma":1}})") ==
          ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","fine_cells":1})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","ratio_max":-1})") == ErrorCode::invalid_config);
    CHECK(code(R"({"experiment":"solve","target_tol":0})") == ErrorCode::invalid_config);
}

TEST_CASE("single case report on the smallest mesh") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::solve;
    cfg.source = "one";
    cfg.mesh.uniform_cells = {2};

    const RateReport report = run_case(cfg);
    CHECK(report.kind == ExperimentKind::solve);
    CHECK(report.param_name == "eps");
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].param == 1.0);
    REQUIRE(report.columns.size() == 4);
    // u is 3/32 times the center hat, whose l2 norm is 1/3
    CHECK(report.rows[0].values[0] == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
    const double g = report.rows[0].values[1];
    const double g1 = report.rows[0].values[2];
    const double g2 = report.rows[0].values[3];
    CHECK(g * g == doctest::Approx(g1 * g1 + g2 * g2).epsilon(1e-12));
    CHECK(report.rows[0].stats.converged);
    CHECK(report.pass);

    cfg.limit = true;
    const RateReport limit = run_case(cfg);
    CHECK(limit.rows[0].param == 0.0);
    CHECK(limit.rows[0].values[0] == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
    CHECK_FALSE(limit.notes.empty());
}

TEST_CASE("eps sweep against the limit solution") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::sweep_eps;
    cfg.mesh.uniform_cells = {8};
    cfg.eps_list = {0.5, 0.25, 0.125};
    cfg.assert_enabled = false;

    const RateReport report = run_eps_sweep(cfg);
    REQUIRE(report.rows.size() == 3);
    for (const CaseRow& row : report.rows) {
        CHECK(row.values[0] > 0.0);
        CHECK_FALSE(row.at_floor);
    }
    // errors shrink monotonically as the perturbation vanishes
    CHECK(report.rows[1].values[0] < report.rows[0].values[0]);
    CHECK(report.rows[2].values[0] < report.rows[1].values[0]);

    REQUIRE(report.fits.size() == 1);
    REQUIRE(report.fits[0].fitted);
    // a purely diagonal coefficient couples the scales only at second order,
    // so the distance to the limit solution decays like eps^2
    CHECK(report.fits[0].fit.slope >= 1.7);
    CHECK(report.fits[0].fit.slope <= 2.3);
    CHECK_FALSE(report.fits[0].asserted);
    CHECK(report.pass);
}

TEST_CASE("errors at the solver floor are flagged and dropped") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::sweep_eps;
    cfg.mesh.uniform_cells = {8};
    cfg.eps_list = {0.5, 0.25};
    cfg.solver_tol = 0.01;  // the floor sits at 100x tol and swallows every error
    const RateReport report = run_eps_sweep(cfg);
    REQUIRE(report.rows.size() == 2);
    for (const CaseRow& row : report.rows) {
        CHECK(row.at_floor);
        CHECK_FALSE(row.asserted);
    }
    REQUIRE(report.fits.size() == 1);
    CHECK_FALSE(report.fits[0].fitted);
    bool noted = false;
    for (const std::string& note : report.notes)
        noted = noted || note.find("solver floor") != std::string::npos;
    CHECK(noted);
}

TEST_CASE("eps sweep without the zero-trace tag reports only") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::sweep_eps;
    cfg.source = "one";
    cfg.mesh.uniform_cells = {8};
    cfg.eps_list = {0.5, 0.25};

    const RateReport report = run_eps_sweep(cfg);
    CHECK(report.pass);
    REQUIRE(report.fits.size() == 1);
    CHECK_FALSE(report.fits[0].asserted);
    bool found = false;
    for (const std::string& note : report.notes)
        found = found || note.find("not tagged zero-trace H2") != std::string::npos;
    CHECK(found);
}

TEST_CASE("h sweep smoke") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::sweep_h_uniform;
    cfg.cells_list = {4, 8};
    cfg.eps_list = {1.0, 0.1};
    cfg.assert_enabled = false;

    const RateReport report = run_h_sweep_uniform(cfg);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].param == 0.25);
    CHECK(report.rows[1].param == 0.125);
    for (const CaseRow& row : report.rows) {
        CHECK(row.values[0] > 0.0);
        const double worst_eps = row.values[1];
        CHECK((worst_eps == 1.0 || worst_eps == 0.1));
    }
    CHECK(report.pass);

    ExperimentConfig with_mesh = cfg;
    with_mesh.mesh.uniform_cells = {8};
    CHECK(oracle::error_code_of([&] { run_h_sweep_uniform(with_mesh); }) ==
          ErrorCode::invalid_config);
}

TEST_CASE("decomposition check on the zero-trace source") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::check_decomp;
    cfg.fine_cells = 128;
    cfg.delta_list = {0.25, 0.125, 0.0625};

    const RateReport report = run_decomp_check(cfg);
    REQUIRE(report.rows.size() == 3);
    REQUIRE(report.columns.size() == 3);
    // the boundary strip shrinks: its mass drops, the curvature of the inner
    // part grows
    CHECK(report.rows[2].values[1] > report.rows[0].values[1]);
    CHECK(report.rows[2].values[2] < report.rows[0].values[2]);
    bool one_sided = false;
    for (const std::string& note : report.notes)
        one_sided = one_sided || note.find("one-sided") != std::string::npos;
    CHECK(one_sided);
    CHECK(report.pass);
}

TEST_CASE("curvature indicator sweep smoke") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::check_h2;
    cfg.mesh.uniform_cells = {8};
    cfg.eps_list = {1.0, 0.5};

    const RateReport report = run_h2_indicator_sweep(cfg);
    REQUIRE(report.rows.size() == 2);
    REQUIRE(report.columns.size() == 4);
    for (const CaseRow& row : report.rows) {
        CHECK(row.asserted);
        CHECK(row.values[3] > 0.0);
    }
    CHECK_FALSE(std::isnan(report.ratio));
    CHECK(report.ratio >= 1.0);
    CHECK(report.ratio <= 10.0);
    CHECK(report.pass);
}

TEST_CASE("validation experiment lists every declared check") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::validate;
    cfg.mesh.uniform_cells = {4};

    const RateReport report = run_validation(cfg);
    CHECK(report.param_name == "check");
    REQUIRE(report.rows.size() == 4);  // ellipticity + three declared flags
    for (const CaseRow& row : report.rows) CHECK(row.values[1] == 1.0);
    CHECK(report.rows[0].values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.pass);
}

TEST_CASE("report csv golden format") {
    RateReport report;
    report.kind = ExperimentKind::sweep_eps;
    report.param_name = "eps";
    report.columns = {"error_gradX2"};
    CaseRow row1;
    row1.param = 1.0;
    row1.values = {2.0};
    CaseRow row2;
    row2.param = 0.5;
    row2.values = {1.0};
    report.rows = {row1, row2};
    ColumnFit fit;
    fit.column = "error_gradX2";
    fit.fitted = true;
    fit.fit.slope = 1.0;
    fit.fit.r2 = 1.0;
    report.fits = {fit};

    CHECK(csv_of(report) ==
          "kind,param_name,param,error_gradX2,at_floor,asserted,cg_iterations,cg_relres\n"
          "sweep-eps,eps,1,2,0,1,0,0\n"
          "sweep-eps,eps,0.5,1,0,1,0,0\n"
          "slope,1\n"
          "r2,1\n"
          "pass,true\n");

    RateReport empty;
    empty.kind = ExperimentKind::sweep_eps;
    empty.param_name = "eps";
    empty.columns = {"error_gradX2"};
    CHECK(csv_of(empty) ==
          "kind,param_name,param,error_gradX2,at_floor,asserted,cg_iterations,cg_relres\n"
          "pass,skipped\n");
}

TEST_CASE("summary format") {
    RateReport report;
    report.kind = ExperimentKind::sweep_eps;
    report.param_name = "eps";
    report.columns = {"error_gradX2"};
    CaseRow row;
    row.param = 0.5;
    row.values = {1.0};
    report.rows = {row};
    ColumnFit fit;
    fit.column = "error_gradX2";
    fit.fitted = true;
    fit.fit.slope = 1.0;
    fit.fit.intercept = 0.0;
    fit.fit.r2 = 1.0;
    fit.asserted = true;
    fit.slope_min = 0.5;
    fit.slope_max = 1.5;
    report.fits = {fit};
    report.notes = {"sample note"};

    std::ostringstream out;
    write_summary(report, out);
    const std::string text = out.str();
    CHECK(text.find("experiment: sweep-eps\n") != std::string::npos);
    CHECK(text.find("fit error_gradX2: slope 1, intercept 0, r2 1") != std::string::npos);
    CHECK(text.find("assert 0.5 <= slope <= 1.5: pass") != std::string::npos);
    CHECK(text.find("note: sample note\n") != std::string::npos);
    CHECK(text.find("result: PASS\n") != std::string::npos);
}

TEST_CASE("fixed float formatting") {
    CHECK(fmt17(0.5) == "0.5");
    CHECK(fmt17(2.0) == "2");
    CHECK(fmt17(0.0) == "0");
    CHECK(fmt17(1.0 / 3.0) == "0.33333333333333331");
    // the printed value parses back to the same double
    CHECK(std::strtod(fmt17(8.0 / 3.0).c_str(), nullptr) == 8.0 / 3.0);
}

TEST_CASE("reports are byte-identical across reruns") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::sweep_eps;
    cfg.mesh.uniform_cells = {8};
    cfg.eps_list = {0.5, 0.25};
    cfg.assert_enabled = false;

    const std::string first = csv_of(run_eps_sweep(cfg));
    const std::string second = csv_of(run_eps_sweep(cfg));
    CHECK(first == second);

    cfg.threads = 2;
    const std::string parallel_a = csv_of(run_eps_sweep(cfg));
    const std::string parallel_b = csv_of(run_eps_sweep(cfg));
    CHECK(parallel_a == parallel_b);
}

TEST_CASE("experiment output files") {
    const auto dir = scratch_dir() / "validate-out";
    std::filesystem::remove_all(dir);

    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::validate;
    cfg.mesh.uniform_cells = {4};
    cfg.out_dir = dir.string();
    const RateReport report = run_experiment(cfg);
    CHECK(report.pass);
    CHECK(std::filesystem::exists(dir / "validate.csv"));
    CHECK(std::filesystem::exists(dir / "summary.txt"));
    CHECK(slurp(dir / "summary.txt").find("result: PASS") != std::string::npos);
}

TEST_CASE("config file loading") {
    CHECK(oracle::error_code_of([] { load_config_file("/nonexistent/config.json"); }) ==
          ErrorCode::io_error);
    const std::string broken = write_config("broken.json", "{nope");
    CHECK(oracle::error_code_of([&] { load_config_file(broken); }) == ErrorCode::invalid_config);
    const std::string good =
        write_config("good.json", R"({"experiment":"solve","mesh":{"uniform":[4]}})");
    const ExperimentConfig cfg = load_config_file(good);
    CHECK(cfg.kind == ExperimentKind::solve);
    CHECK(cfg.mesh.uniform_cells == std::vector<int>{4});
}

TEST_CASE("cli end to end") {
    const auto out_dir = scratch_dir() / "cli-out";
    std::filesystem::remove_all(out_dir);

    const std::string solve_cfg =
        write_config("cli-solve.json", R"({"experiment":"solve","mesh":{"uniform":[4]}})");
    CHECK(run_binary("solve --config " + solve_cfg + " --out " + out_dir.string()) == 0);
    CHECK(std::filesystem::exists(out_dir / "solve.csv"));
    CHECK(std::filesystem::exists(out_dir / "summary.txt"));
    const std::string first = slurp(out_dir / "solve.csv");
    CHECK(run_binary("solve --config " + solve_cfg + " --out " + out_dir.string()) == 0);
    CHECK(slurp(out_dir / "solve.csv") == first);

    // the diagonal coefficient decays quadratically, far outside the
    // asserted unit-slope band, so the sweep must fail with exit code 2
    const std::string sweep_cfg = write_config(
        "cli-sweep.json",
        R"({"experiment":"sweep-eps","mesh":{"uniform":[8]},"eps_list":[0.5,0.25,0.125]})");
    CHECK(run_binary("sweep-eps --config " + sweep_cfg) == 2);

    const std::string bad_cfg = write_config("cli-bad.json", R"({"experiment":"solve","bogus":1})");
    CHECK(run_binary("solve --config " + bad_cfg) == 1);
    CHECK(run_binary("solve --config /nonexistent/nope.json") == 1);
    CHECK(run_binary("sweep-eps --config " + solve_cfg) == 1);  // kind mismatch
    CHECK(run_binary("--help") == 0);
    CHECK(run_binary("") == 1);  // a subcommand is required

    const std::string validate_cfg =
        write_config("cli-validate.json", R"({"experiment":"validate","mesh":{"uniform":[4]}})");
    CHECK(run_binary("validate --config " + validate_cfg) == 0);
}

}  // TEST_SUITE
