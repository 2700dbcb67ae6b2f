#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace anisofem {

/// Partition of [0,1] into at least two cells. Points are strictly increasing
/// with endpoints exactly 0 and 1; steps[k] = points[k+1] - points[k].
struct Grid1D {
    std::vector<double> points;
    std::vector<double> steps;

    int cells() const { return static_cast<int>(steps.size()); }
    double max_step() const;
    bool is_uniform(double rel_tol = 1e-12) const;
};

Grid1D make_grid(std::vector<double> points);
Grid1D build_uniform_grid(int cells);

/// Tensor-product mesh of (0,1)^dim, dim in {2,3}, with the coordinate split
/// x = (X1, X2), X1 = first `split` axes. Nodes and cells are indexed
/// lexicographically by multi-index (first axis slowest).
struct TensorMesh {
    int dim = 0;
    int split = 0;  // number of leading axes forming X1, 1 <= split < dim
    std::vector<Grid1D> grids;
    double h_max = 0.0;

    std::size_t n_nodes = 0;
    std::size_t n_cells = 0;
    std::size_t n_interior = 0;

    int points_per_axis(int axis) const { return grids[axis].cells() + 1; }
    int cells_per_axis(int axis) const { return grids[axis].cells(); }

    std::size_t node_index(const std::array<int, 3>& k) const;
    std::array<int, 3> node_multi(std::size_t index) const;
    void node_coords(const std::array<int, 3>& k, double* x) const;
    bool is_boundary_node(const std::array<int, 3>& k) const;

    std::size_t cell_index(const std::array<int, 3>& c) const;
    std::array<int, 3> cell_multi(std::size_t index) const;
    double cell_volume(const std::array<int, 3>& c) const;
};

using MeshPtr = std::shared_ptr<const TensorMesh>;

TensorMesh build_tensor_mesh(std::vector<Grid1D> grids, int split);
MeshPtr build_tensor_mesh_ptr(std::vector<Grid1D> grids, int split);
MeshPtr build_uniform_mesh_ptr(int dim, int cells, int split);

/// Refine every cell by inserting axis midpoints; existing points are kept
/// bit-identical, so the result is an exact nested refinement.
TensorMesh refine_halve(const TensorMesh& mesh);
MeshPtr refine_halve_ptr(const TensorMesh& mesh);

/// True when `fine` refines `coarse`: same dim and split, and every coarse
/// grid point occurs exactly among the fine grid points.
bool is_nested_refinement(const TensorMesh& coarse, const TensorMesh& fine);

}  // namespace anisofem
