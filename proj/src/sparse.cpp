#include "anisofem/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "anisofem/errors.hpp"

namespace anisofem {

double SparseMatrix::entry(std::size_t i, std::size_t j) const {
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
        if (col[p] == j) return val[p];
    return 0.0;
}

double* SparseMatrix::find(std::size_t i, std::size_t j) {
    auto begin = col.begin() + row_ptr[i];
    auto end = col.begin() + row_ptr[i + 1];
    auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return nullptr;
    return &val[it - col.begin()];
}

void SparseMatrix::matvec(std::span<const double> x, std::span<double> y, int threads) const {
    auto rows = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double s = 0.0;
            for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += val[p] * x[col[p]];
            y[i] = s;
        }
    };
    if (threads <= 1 || n < 4096) {
        rows(0, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::size_t lo = std::min(n, t * chunk);
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo < hi) pool.emplace_back(rows, lo, hi);
    }
    for (auto& th : pool) th.join();
}

double SparseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : val) m = std::max(m, std::abs(v));
    return m;
}

double SparseMatrix::max_asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            worst = std::max(worst, std::abs(val[p] - entry(col[p], i)));
    return worst;
}

void write_matrix_market(const SparseMatrix& m, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.n << " " << m.n << " " << m.nnz() << "\n";
    char buf[32];
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) {
            std::snprintf(buf, sizeof(buf), "%.17g", m.val[p]);
            out << (i + 1) << " " << (m.col[p] + 1) << " " << buf << "\n";
        }
}

}  // namespace anisofem
