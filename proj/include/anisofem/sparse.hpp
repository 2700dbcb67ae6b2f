#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

namespace anisofem {

/// Square CSR matrix with sorted column indices per row.
struct SparseMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::size_t> col;
    std::vector<double> val;

    std::size_t nnz() const { return val.size(); }

    /// Stored value at (i,j), 0 if the entry is not in the pattern.
    double entry(std::size_t i, std::size_t j) const;
    /// Pointer into val for (i,j), nullptr if not in the pattern.
    double* find(std::size_t i, std::size_t j);

    /// y = M x. Row-parallel, so the result is identical for every thread
    /// count.
    void matvec(std::span<const double> x, std::span<double> y, int threads = 1) const;

    double max_abs() const;
    /// max_ij |M_ij - M_ji|, for symmetry checks.
    double max_asymmetry() const;
};

/// Coordinate-format Matrix Market output (1-based indices, 17 significant
/// digits, row-major order).
void write_matrix_market(const SparseMatrix& m, std::ostream& out);

}  // namespace anisofem
