#include "anisofem/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "anisofem/errors.hpp"

namespace anisofem {

double Grid1D::max_step() const {
    double h = 0.0;
    for (double s : steps) h = std::max(h, s);
    return h;
}

bool Grid1D::is_uniform(double rel_tol) const {
    const double h0 = steps.front();
    for (double s : steps)
        if (std::abs(s - h0) > rel_tol * h0) return false;
    return true;
}

Grid1D make_grid(std::vector<double> points) {
    if (points.size() < 3)
        throw Error(ErrorCode::invalid_mesh, "grid needs at least 2 cells (3 points)");
    if (points.front() != 0.0 || points.back() != 1.0)
        throw Error(ErrorCode::invalid_mesh, "grid must span [0,1] exactly");
    Grid1D g;
    g.points = std::move(points);
    g.steps.resize(g.points.size() - 1);
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < g.points.size(); ++k) {
        const double s = g.points[k + 1] - g.points[k];
        if (!(s > 0.0))
            throw Error(ErrorCode::invalid_mesh, "grid points must be strictly increasing");
        g.steps[k] = s;
        sum += s;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw Error(ErrorCode::invalid_mesh, "grid steps must sum to 1");
    return g;
}

Grid1D build_uniform_grid(int cells) {
    if (cells < 2)
        throw Error(ErrorCode::invalid_mesh, "uniform grid needs at least 2 cells");
    std::vector<double> pts(cells + 1);
    for (int k = 0; k <= cells; ++k) pts[k] = double(k) / double(cells);
    pts.front() = 0.0;
    pts.back() = 1.0;
    return make_grid(std::move(pts));
}

std::size_t TensorMesh::node_index(const std::array<int, 3>& k) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * points_per_axis(a) + k[a];
    return idx;
}

std::array<int, 3> TensorMesh::node_multi(std::size_t index) const {
    std::array<int, 3> k{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
        const std::size_t p = points_per_axis(a);
        k[a] = int(index % p);
        index /= p;
    }
    return k;
}

void TensorMesh::node_coords(const std::array<int, 3>& k, double* x) const {
    for (int a = 0; a < dim; ++a) x[a] = grids[a].points[k[a]];
}

bool TensorMesh::is_boundary_node(const std::array<int, 3>& k) const {
    for (int a = 0; a < dim; ++a)
        if (k[a] == 0 || k[a] == cells_per_axis(a)) return true;
    return false;
}

std::size_t TensorMesh::cell_index(const std::array<int, 3>& c) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * cells_per_axis(a) + c[a];
    return idx;
}

std::array<int, 3> TensorMesh::cell_multi(std::size_t index) const {
    std::array<int, 3> c{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
        const std::size_t m = cells_per_axis(a);
        c[a] = int(index % m);
        index /= m;
    }
    return c;
}

double TensorMesh::cell_volume(const std::array<int, 3>& c) const {
    double vol = 1.0;
    for (int a = 0; a < dim; ++a) vol *= grids[a].steps[c[a]];
    return vol;
}

TensorMesh build_tensor_mesh(std::vector<Grid1D> grids, int split) {
    const int dim = int(grids.size());
    if (dim < 2 || dim > 3)
        throw Error(ErrorCode::invalid_mesh, "mesh dimension must be 2 or 3");
    if (split < 1 || split >= dim)
        throw Error(ErrorCode::invalid_split, "axis split must satisfy 1 <= split < dim");
    TensorMesh mesh;
    mesh.dim = dim;
    mesh.split = split;
    mesh.grids = std::move(grids);
    mesh.h_max = 0.0;
    mesh.n_nodes = 1;
    mesh.n_cells = 1;
    mesh.n_interior = 1;
    for (int a = 0; a < dim; ++a) {
        const Grid1D& g = mesh.grids[a];
        mesh.h_max = std::max(mesh.h_max, g.max_step());
        mesh.n_nodes *= std::size_t(g.cells() + 1);
        mesh.n_cells *= std::size_t(g.cells());
        mesh.n_interior *= std::size_t(g.cells() - 1);
    }
    return mesh;
}

MeshPtr build_tensor_mesh_ptr(std::vector<Grid1D> grids, int split) {
    return std::make_shared<const TensorMesh>(build_tensor_mesh(std::move(grids), split));
}

MeshPtr build_uniform_mesh_ptr(int dim, int cells, int split) {
    std::vector<Grid1D> grids;
    grids.reserve(dim);
    for (int a = 0; a < dim; ++a) grids.push_back(build_uniform_grid(cells));
    return build_tensor_mesh_ptr(std::move(grids), split);
}

TensorMesh refine_halve(const TensorMesh& mesh) {
    std::vector<Grid1D> fine;
    fine.reserve(mesh.grids.size());
    for (const Grid1D& g : mesh.grids) {
        std::vector<double> pts;
        pts.reserve(2 * g.points.size() - 1);
        for (std::size_t k = 0; k + 1 < g.points.size(); ++k) {
            pts.push_back(g.points[k]);
            pts.push_back(g.points[k] + 0.5 * (g.points[k + 1] - g.points[k]));
        }
        pts.push_back(g.points.back());
        fine.push_back(make_grid(std::move(pts)));
    }
    return build_tensor_mesh(std::move(fine), mesh.split);
}

MeshPtr refine_halve_ptr(const TensorMesh& mesh) {
    return std::make_shared<const TensorMesh>(refine_halve(mesh));
}

bool is_nested_refinement(const TensorMesh& coarse, const TensorMesh& fine) {
    if (coarse.dim != fine.dim || coarse.split != fine.split) return false;
    for (int a = 0; a < coarse.dim; ++a) {
        const auto& cp = coarse.grids[a].points;
        const auto& fp = fine.grids[a].points;
        std::size_t j = 0;
        for (double p : cp) {
            while (j < fp.size() && fp[j] < p) ++j;
            if (j == fp.size() || fp[j] != p) return false;
        }
    }
    return true;
}

}  // namespace anisofem
