#pragma once

#include <functional>
#include <span>
#include <vector>

#include "anisofem/errors.hpp"
#include "anisofem/sparse.hpp"

namespace anisofem {

struct SolveStats {
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

struct CgOptions {
    double tol = 1e-10;  // on ||b - Mx|| / ||b||
    int max_iterations = 0;  // 0 picks 20*sqrt(n) + 1000
    int threads = 1;
    // called with the iterate after each step; for diagnostics and tests
    std::function<void(int, std::span<const double>)> observer;
};

class NonConvergence : public Error {
public:
    NonConvergence(const SolveStats& stats, const std::string& detail)
        : Error(ErrorCode::non_convergence, detail), stats(stats) {}

    SolveStats stats;
};

struct CgResult {
    std::vector<double> x;
    SolveStats stats;
};

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// systems. Throws not-spd on a nonpositive diagonal and non-convergence
/// (carrying the stats) when the iteration budget runs out.
CgResult cg_solve(const SparseMatrix& m, std::span<const double> b, const CgOptions& opts = {});

/// Dense Gaussian elimination with partial pivoting, as an independent
/// reference for small systems (n <= 10^4).
std::vector<double> dense_solve(const SparseMatrix& m, std::span<const double> b);

}  // namespace anisofem
