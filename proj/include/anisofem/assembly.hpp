#pragma once

#include <vector>

#include "anisofem/field.hpp"
#include "anisofem/mesh.hpp"
#include "anisofem/problems.hpp"
#include "anisofem/quadrature.hpp"
#include "anisofem/sparse.hpp"

namespace anisofem {

/// Stiffness matrix of the perturbed operator on the zero-trace space:
/// entries int_Omega (A_eps grad N_j) . grad N_i over interior node pairs.
/// Rows are gathered independently, so results are identical for every
/// thread count.
SparseMatrix assemble_stiffness_eps(const TensorMesh& mesh, const DiffusionSpec& a, double eps,
                                    const QuadratureRule& quad, int threads = 1);

/// Stiffness matrix of the limit operator: only the X2/X2 block of A enters.
/// Requires the a22-depends-on-X2-only flag.
SparseMatrix assemble_limit_stiffness(const TensorMesh& mesh, const DiffusionSpec& a,
                                      const QuadratureRule& quad, int threads = 1);

/// Mass matrix int N_i N_j over all nodes (boundary included).
SparseMatrix assemble_mass(const TensorMesh& mesh, int threads = 1);

enum class LoadMode {
    interpolated,  // right side int I_h(f) v, evaluated exactly via the mass matrix
    quadrature,    // right side int f v by the given rule
};

std::vector<double> assemble_load(const TensorMesh& mesh, const SourceSpec& f, LoadMode mode,
                                  const QuadratureRule& quad, int threads = 1);

}  // namespace anisofem
