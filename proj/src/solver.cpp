#include "anisofem/solver.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace anisofem {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

CgResult cg_solve(const SparseMatrix& m, std::span<const double> b, const CgOptions& opts) {
    const std::size_t n = m.n;
    if (b.size() != n) throw Error(ErrorCode::invalid_config, "right side size mismatch");

    CgResult result;
    result.x.assign(n, 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        result.stats.converged = true;
        return result;
    }

    std::vector<double> inv_diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = m.entry(i, i);
        if (!(d > 0.0))
            throw Error(ErrorCode::not_spd, "nonpositive diagonal entry");
        inv_diag[i] = 1.0 / d;
    }

    const int maxit =
        opts.max_iterations > 0 ? opts.max_iterations : int(20.0 * std::sqrt(double(n))) + 1000;

    std::vector<double> r(b.begin(), b.end());  // r = b - A*0
    std::vector<double> z(n), p(n), ap(n);
    auto& x = result.x;

    int it = 0;
    double true_rel = 1.0;
    // a handful of restarts guards against drift of the recursion residual
    for (int restart = 0; restart < 4 && it < maxit; ++restart) {
        m.matvec(x, ap, opts.threads);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
        true_rel = norm2(r) / bnorm;
        if (true_rel <= opts.tol) break;

        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];  // z = P r
        p = z;
        double rz = dot(r, z);
        while (it < maxit) {
            m.matvec(p, ap, opts.threads);
            const double pap = dot(p, ap);
            if (!(pap > 0.0)) throw Error(ErrorCode::not_spd, "nonpositive curvature direction");
            const double alpha = rz / pap;
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
            for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * ap[i];
            ++it;
            if (opts.observer) opts.observer(it, x);
            if (norm2(r) / bnorm <= opts.tol) break;
            for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        }
        // verify with the true residual before accepting
        m.matvec(x, ap, opts.threads);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
        true_rel = norm2(r) / bnorm;
        if (true_rel <= opts.tol) break;
    }

    result.stats.iterations = it;
    result.stats.rel_residual = true_rel;
    result.stats.converged = true_rel <= opts.tol;
    if (!result.stats.converged)
        throw NonConvergence(result.stats,
                             "cg stalled at relative residual " + std::to_string(true_rel) +
                                 " after " + std::to_string(it) + " iterations");
    return result;
}

std::vector<double> dense_solve(const SparseMatrix& m, std::span<const double> b) {
    const std::size_t n = m.n;
    if (b.size() != n) throw Error(ErrorCode::invalid_config, "right side size mismatch");
    if (n > 10000)
        throw Error(ErrorCode::invalid_config, "dense reference solve limited to n <= 10000");

    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p)
            a[i * n + m.col[p]] = m.val[p];
    std::vector<double> rhs(b.begin(), b.end());

    // Gaussian elimination with partial pivoting
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(a[perm[k] * n + k]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double cand = std::abs(a[perm[i] * n + k]);
            if (cand > best) {
                best = cand;
                piv = i;
            }
        }
        if (best == 0.0) throw Error(ErrorCode::singular_matrix, "zero pivot in elimination");
        std::swap(perm[k], perm[piv]);
        const double pivval = a[perm[k] * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const double factor = a[perm[i] * n + k] / pivval;
            if (factor == 0.0) continue;
            a[perm[i] * n + k] = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) a[perm[i] * n + j] -= factor * a[perm[k] * n + j];
            rhs[perm[i]] -= factor * rhs[perm[k]];
        }
    }
    std::vector<double> x(n);
    for (std::size_t k = n; k-- > 0;) {
        double s = rhs[perm[k]];
        for (std::size_t j = k + 1; j < n; ++j) s -= a[perm[k] * n + j] * x[j];
        x[k] = s / a[perm[k] * n + k];
    }

    // sanity: the factorization must actually solve the system
    std::vector<double> check(n);
    m.matvec(x, check);
    double rnorm = 0.0;
    double bnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rnorm += (b[i] - check[i]) * (b[i] - check[i]);
        bnorm += b[i] * b[i];
    }
    if (bnorm > 0.0 && std::sqrt(rnorm) > 1e-10 * std::sqrt(bnorm))
        throw Error(ErrorCode::singular_matrix, "dense solve residual too large");
    return x;
}

}  // namespace anisofem
