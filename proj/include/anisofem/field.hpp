#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "anisofem/mesh.hpp"

namespace anisofem {

using ScalarFn = std::function<double(std::span<const double>)>;

/// Q1 function given by one value per mesh node, in lexicographic node order.
/// Boundary values are stored; membership in the zero-trace subspace is a
/// predicate on the values, not a property of the container.
struct NodalField {
    MeshPtr mesh;
    std::vector<double> values;
};

/// Maps interior nodes to consecutive unknown ids (lexicographic order).
struct DofMap {
    std::vector<int> node_to_dof;          // -1 for boundary nodes
    std::vector<std::size_t> dof_to_node;

    std::size_t n_dofs() const { return dof_to_node.size(); }
};

DofMap make_dof_map(const TensorMesh& mesh);

NodalField interpolate(const ScalarFn& f, MeshPtr mesh);

double evaluate(const NodalField& field, std::span<const double> x);

/// Gradient of the Q1 field at x. The gradient jumps across cell faces, so a
/// point lying exactly on an interior face needs `cell_hint` to pick a side.
std::array<double, 3> evaluate_gradient(const NodalField& field, std::span<const double> x,
                                        const std::array<int, 3>* cell_hint = nullptr);

/// Exact Q1 embedding of a field into a nested refinement of its mesh.
NodalField prolongate(const NodalField& coarse, MeshPtr fine_mesh);

/// Largest |value| over boundary nodes (0 for zero-trace fields).
double max_boundary_abs(const NodalField& field);

/// Scatter a solution vector over interior unknowns into a full nodal field
/// with zero boundary values.
NodalField field_from_dofs(MeshPtr mesh, const DofMap& dofs, std::span<const double> x);

NodalField subtract(const NodalField& a, const NodalField& b);

/// CSV rows "x1,...,xN,value" in lexicographic node order, 17 significant
/// digits.
void dump_field_csv(const NodalField& field, std::ostream& out);

}  // namespace anisofem
