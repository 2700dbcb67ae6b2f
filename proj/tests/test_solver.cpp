#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"

#include "anisofem/assembly.hpp"
#include "anisofem/errors.hpp"
#include "anisofem/mesh.hpp"
#include "anisofem/problems.hpp"
#include "anisofem/quadrature.hpp"
#include "anisofem/solver.hpp"
#include "oracle.hpp"

using namespace anisofem;

namespace {

SparseMatrix make_csr(std::size_t n, const std::vector<double>& dense) {
    SparseMatrix m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (dense[i * n + j] == 0.0) continue;
            m.col.push_back(j);
            m.val.push_back(dense[i * n + j]);
        }
        m.row_ptr[i + 1] = m.col.size();
    }
    return m;
}

double rel_l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

struct Assembled {
    SparseMatrix k;
    std::vector<double> b;
};

Assembled poisson_2d(int cells, const DiffusionSpec& spec, double eps) {
    const MeshPtr mesh = build_uniform_mesh_ptr(2, cells, 1);
    const QuadratureRule quad = gauss_rule(2);
    Assembled sys;
    sys.k = assemble_stiffness_eps(*mesh, spec, eps, quad);
    sys.b = assemble_load(*mesh, make_source("sine-product", 2, 1), LoadMode::interpolated, quad);
    return sys;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("identity system converges in one step") {
    const std::size_t n = 5;
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) dense[i * n + i] = 1.0;
    const SparseMatrix m = make_csr(n, dense);
    const std::vector<double> b = {3.0, -1.0, 0.5, 2.0, 7.0};

    const CgResult result = cg_solve(m, b);
    CHECK(result.stats.converged);
    CHECK(result.stats.iterations == 1);
    CHECK(result.stats.rel_residual == 0.0);
    for (std::size_t i = 0; i < n; ++i) CHECK(result.x[i] == b[i]);
}

TEST_CASE("zero right side returns the zero solution") {
    const Assembled sys = poisson_2d(4, make_diffusion("identity", 2), 1.0);
    const std::vector<double> zero(sys.b.size(), 0.0);
    const CgResult result = cg_solve(sys.k, zero);
    CHECK(result.stats.converged);
    CHECK(result.stats.iterations == 0);
    for (double v : result.x) CHECK(v == 0.0);
}

TEST_CASE("cg and the dense reference agree") {
    CgOptions opts;
    opts.tol = 1e-12;

    SUBCASE("identity coefficient") {
        const Assembled sys = poisson_2d(4, make_diffusion("identity", 2), 1.0);
        const CgResult cg = cg_solve(sys.k, sys.b, opts);
        const std::vector<double> ref = dense_solve(sys.k, sys.b);
        CHECK(rel_l2_diff(cg.x, ref) <= 1e-8);
    }
    SUBCASE("coupled coefficient deep in the perturbation") {
        DiffusionParams params;
        params.beta = 0.4;
        const Assembled sys = poisson_2d(4, make_diffusion("variable-offdiag", 2, params), 0.1);
        const CgResult cg = cg_solve(sys.k, sys.b, opts);
        const std::vector<double> ref = dense_solve(sys.k, sys.b);
        CHECK(rel_l2_diff(cg.x, ref) <= 1e-8);
    }
}

TEST_CASE("iterates decrease the energy functional") {
    const Assembled sys = poisson_2d(8, make_diffusion("identity", 2), 0.5);
    const std::size_t n = sys.b.size();
    const std::vector<double> exact = dense_solve(sys.k, sys.b);

    std::vector<double> energies;
    std::vector<double> distances;
    std::vector<double> tmp(n);
    std::vector<double> err(n);
    CgOptions opts;
    opts.tol = 1e-12;
    opts.observer = [&](int, std::span<const double> x) {
        sys.k.matvec(x, tmp);
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e += 0.5 * x[i] * tmp[i] - sys.b[i] * x[i];
        energies.push_back(e);

        for (std::size_t i = 0; i < n; ++i) err[i] = x[i] - exact[i];
        sys.k.matvec(err, tmp);
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += err[i] * tmp[i];
        distances.push_back(std::sqrt(std::max(d, 0.0)));
    };
    const CgResult result = cg_solve(sys.k, sys.b, opts);
    REQUIRE(int(energies.size()) == result.stats.iterations);
    for (std::size_t i = 1; i < energies.size(); ++i)
        CHECK(energies[i] <= energies[i - 1] + 1e-12 * (1.0 + std::abs(energies[i - 1])));
    // in the operator norm the distance to the true solution never grows
    for (std::size_t i = 1; i < distances.size(); ++i)
        CHECK(distances[i] <= distances[i - 1] + 1e-12 * (1.0 + distances[i - 1]));
    CHECK(distances.back() <= 1e-8 * (1.0 + distances.front()));
}

TEST_CASE("solutions combine linearly in the right side") {
    const Assembled sys = poisson_2d(4, make_diffusion("identity", 2), 1.0);
    std::vector<double> b2(sys.b.size());
    for (std::size_t i = 0; i < b2.size(); ++i) b2[i] = 0.3 + 0.1 * double(i);
    std::vector<double> combined(sys.b.size());
    for (std::size_t i = 0; i < b2.size(); ++i) combined[i] = sys.b[i] + b2[i];

    CgOptions opts;
    opts.tol = 1e-13;
    const CgResult xa = cg_solve(sys.k, sys.b, opts);
    const CgResult xb = cg_solve(sys.k, b2, opts);
    const CgResult xc = cg_solve(sys.k, combined, opts);
    std::vector<double> sum(xa.x.size());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = xa.x[i] + xb.x[i];
    CHECK(rel_l2_diff(sum, xc.x) <= 1e-8);
}

TEST_CASE("iteration budget exhaustion carries the stats") {
    // a variable coefficient, so the right side is far from an eigenvector
    // and two iterations cannot reach the tolerance
    const Assembled sys = poisson_2d(16, make_diffusion("variable-offdiag", 2), 1.0);
    CgOptions opts;
    opts.tol = 1e-14;
    opts.max_iterations = 2;
    int observed = 0;
    opts.observer = [&](int, std::span<const double>) { ++observed; };
    try {
        cg_solve(sys.k, sys.b, opts);
        FAIL("expected the iteration budget to run out");
    } catch (const NonConvergence& e) {
        CHECK(e.code() == ErrorCode::non_convergence);
        CHECK(e.stats.iterations == 2);
        CHECK_FALSE(e.stats.converged);
        CHECK(e.stats.rel_residual > opts.tol);
    }
    CHECK(observed == 2);
}

TEST_CASE("non spd systems are rejected") {
    const std::vector<double> b = {1.0, -1.0};

    const SparseMatrix neg_diag = make_csr(2, {-1.0, 0.0, 0.0, 1.0});
    CHECK(oracle::error_code_of([&] { cg_solve(neg_diag, b); }) == ErrorCode::not_spd);

    // positive diagonal but indefinite: the first search direction already
    // has negative curvature for this right side
    const SparseMatrix indefinite = make_csr(2, {1.0, 2.0, 2.0, 1.0});
    CHECK(oracle::error_code_of([&] { cg_solve(indefinite, b); }) == ErrorCode::not_spd);
}

TEST_CASE("dense solve guards") {
    const std::vector<double> b = {1.0, 2.0};

    const SparseMatrix singular = make_csr(2, {1.0, 1.0, 1.0, 1.0});
    CHECK(oracle::error_code_of([&] { dense_solve(singular, b); }) ==
          ErrorCode::singular_matrix);

    const SparseMatrix good = make_csr(2, {2.0, 1.0, 1.0, 2.0});
    const std::vector<double> x = dense_solve(good, b);
    // inverse of [[2,1],[1,2]] is [[2,-1],[-1,2]]/3
    CHECK(x[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-14));

    SparseMatrix oversized;
    oversized.n = 10001;
    oversized.row_ptr.assign(10002, 0);
    const std::vector<double> big_b(10001, 1.0);
    CHECK(oracle::error_code_of([&] { dense_solve(oversized, big_b); }) ==
          ErrorCode::invalid_config);

    CHECK(oracle::error_code_of([&] { dense_solve(good, big_b); }) == ErrorCode::invalid_config);
    CHECK(oracle::error_code_of([&] { cg_solve(good, big_b); }) == ErrorCode::invalid_config);
}

TEST_CASE("single unknown pipelines hit the closed forms") {
    const QuadratureRule quad = gauss_rule(2);
    CgOptions opts;
    opts.tol = 1e-13;

    SUBCASE("2d") {
        const MeshPtr mesh = build_uniform_mesh_ptr(2, 2, 1);
        const DiffusionSpec spec = make_diffusion("identity", 2);
        const auto b = assemble_load(*mesh, make_source("one", 2, 1), LoadMode::interpolated, quad);

        const SparseMatrix k = assemble_stiffness_eps(*mesh, spec, 1.0, quad);
        const CgResult u = cg_solve(k, b, opts);
        CHECK(u.x[0] == doctest::Approx(3.0 / 32.0).epsilon(1e-12));
        CHECK(dense_solve(k, b)[0] == doctest::Approx(3.0 / 32.0).epsilon(1e-12));

        const SparseMatrix k_lim = assemble_limit_stiffness(*mesh, spec, quad);
        CHECK(cg_solve(k_lim, b, opts).x[0] == doctest::Approx(3.0 / 16.0).epsilon(1e-12));
    }
    SUBCASE("3d at both splits") {
        const DiffusionSpec spec = make_diffusion("identity", 3);
        const MeshPtr mesh = build_uniform_mesh_ptr(3, 2, 1);
        const auto b = assemble_load(*mesh, make_source("one", 3, 1), LoadMode::interpolated, quad);

        const SparseMatrix k = assemble_stiffness_eps(*mesh, spec, 1.0, quad);
        CHECK(cg_solve(k, b, opts).x[0] == doctest::Approx(3.0 / 32.0).epsilon(1e-12));

        const SparseMatrix k_lim1 = assemble_limit_stiffness(*mesh, spec, quad);
        CHECK(cg_solve(k_lim1, b, opts).x[0] == doctest::Approx(9.0 / 64.0).epsilon(1e-12));

        const MeshPtr mesh_q2 = build_uniform_mesh_ptr(3, 2, 2);
        const SparseMatrix k_lim2 = assemble_limit_stiffness(*mesh_q2, spec, quad);
        const auto b2 =
            assemble_load(*mesh_q2, make_source("one", 3, 2), LoadMode::interpolated, quad);
        CHECK(cg_solve(k_lim2, b2, opts).x[0] == doctest::Approx(9.0 / 32.0).epsilon(1e-12));
    }
}

}  // TEST_SUITE
