#include "anisofem/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "anisofem/errors.hpp"

namespace anisofem {

DofMap make_dof_map(const TensorMesh& mesh) {
    DofMap map;
    map.node_to_dof.assign(mesh.n_nodes, -1);
    map.dof_to_node.reserve(mesh.n_interior);
    for (std::size_t i = 0; i < mesh.n_nodes; ++i) {
        if (mesh.is_boundary_node(mesh.node_multi(i))) continue;
        map.node_to_dof[i] = int(map.dof_to_node.size());
        map.dof_to_node.push_back(i);
    }
    return map;
}

NodalField interpolate(const ScalarFn& f, MeshPtr mesh) {
    NodalField field;
    field.mesh = mesh;
    field.values.resize(mesh->n_nodes);
    double x[3];
    for (std::size_t i = 0; i < mesh->n_nodes; ++i) {
        mesh->node_coords(mesh->node_multi(i), x);
        const double v = f(std::span<const double>(x, mesh->dim));
        if (!std::isfinite(v))
            throw Error(ErrorCode::invalid_source, "source evaluates to a non-finite value");
        field.values[i] = v;
    }
    return field;
}

namespace {

struct AxisHit {
    int cell = 0;
    double t = 0.0;            // local coordinate in [0,1]
    bool on_interior_face = false;  // x coincides with an interior grid point
};

AxisHit locate(const Grid1D& g, double x) {
    AxisHit hit;
    const auto& p = g.points;
    // first point strictly greater than x, minus one; right endpoint owns the
    // last cell
    auto it = std::upper_bound(p.begin(), p.end(), x);
    int k = int(it - p.begin()) - 1;
    k = std::clamp(k, 0, g.cells() - 1);
    hit.cell = k;
    hit.t = (x - p[k]) / g.steps[k];
    hit.on_interior_face = (x == p[k] && k > 0);
    return hit;
}

void check_in_domain(const TensorMesh& mesh, std::span<const double> x) {
    if (int(x.size()) != mesh.dim)
        throw Error(ErrorCode::out_of_domain, "point dimension does not match the mesh");
    for (int a = 0; a < mesh.dim; ++a)
        if (!(x[a] >= 0.0 && x[a] <= 1.0))
            throw Error(ErrorCode::out_of_domain, "point outside the closed unit cube");
}

}  // namespace

double evaluate(const NodalField& field, std::span<const double> x) {
    const TensorMesh& mesh = *field.mesh;
    check_in_domain(mesh, x);
    AxisHit hit[3];
    for (int a = 0; a < mesh.dim; ++a) hit[a] = locate(mesh.grids[a], x[a]);
    std::array<int, 3> base{hit[0].cell, hit[1].cell, mesh.dim > 2 ? hit[2].cell : 0};
    double value = 0.0;
    for (int corner = 0; corner < (1 << mesh.dim); ++corner) {
        std::array<int, 3> k = base;
        double weight = 1.0;
        for (int a = 0; a < mesh.dim; ++a) {
            const bool high = corner & (1 << a);
            k[a] += high ? 1 : 0;
            weight *= high ? hit[a].t : 1.0 - hit[a].t;
        }
        value += weight * field.values[mesh.node_index(k)];
    }
    return value;
}

std::array<double, 3> evaluate_gradient(const NodalField& field, std::span<const double> x,
                                        const std::array<int, 3>* cell_hint) {
    const TensorMesh& mesh = *field.mesh;
    check_in_domain(mesh, x);
    AxisHit hit[3];
    if (cell_hint) {
        for (int a = 0; a < mesh.dim; ++a) {
            const int k = (*cell_hint)[a];
            const Grid1D& g = mesh.grids[a];
            if (k < 0 || k >= g.cells())
                throw Error(ErrorCode::out_of_domain, "cell hint outside the mesh");
            if (x[a] < g.points[k] || x[a] > g.points[k + 1])
                throw Error(ErrorCode::out_of_domain, "point outside the hinted cell");
            hit[a].cell = k;
            hit[a].t = (x[a] - g.points[k]) / g.steps[k];
        }
    } else {
        for (int a = 0; a < mesh.dim; ++a) {
            hit[a] = locate(mesh.grids[a], x[a]);
            if (hit[a].on_interior_face)
                throw Error(ErrorCode::ambiguous_gradient,
                            "point lies on a cell face; pass a cell hint to pick a side");
        }
    }
    std::array<int, 3> base{hit[0].cell, hit[1].cell, mesh.dim > 2 ? hit[2].cell : 0};
    std::array<double, 3> grad{0.0, 0.0, 0.0};
    for (int corner = 0; corner < (1 << mesh.dim); ++corner) {
        std::array<int, 3> k = base;
        double factor[3];
        double dfactor[3];
        for (int a = 0; a < mesh.dim; ++a) {
            const bool high = corner & (1 << a);
            const double ha = mesh.grids[a].steps[hit[a].cell];
            k[a] += high ? 1 : 0;
            factor[a] = high ? hit[a].t : 1.0 - hit[a].t;
            dfactor[a] = (high ? 1.0 : -1.0) / ha;
        }
        const double v = field.values[mesh.node_index(k)];
        for (int a = 0; a < mesh.dim; ++a) {
            double w = dfactor[a];
            for (int b = 0; b < mesh.dim; ++b)
                if (b != a) w *= factor[b];
            grad[a] += w * v;
        }
    }
    return grad;
}

NodalField prolongate(const NodalField& coarse, MeshPtr fine_mesh) {
    if (!is_nested_refinement(*coarse.mesh, *fine_mesh))
        throw Error(ErrorCode::non_nested, "target mesh does not refine the field's mesh");
    NodalField fine;
    fine.mesh = fine_mesh;
    fine.values.resize(fine_mesh->n_nodes);
    double x[3];
    for (std::size_t i = 0; i < fine_mesh->n_nodes; ++i) {
        fine_mesh->node_coords(fine_mesh->node_multi(i), x);
        fine.values[i] = evaluate(coarse, std::span<const double>(x, fine_mesh->dim));
    }
    return fine;
}

double max_boundary_abs(const NodalField& field) {
    const TensorMesh& mesh = *field.mesh;
    double worst = 0.0;
    for (std::size_t i = 0; i < mesh.n_nodes; ++i)
        if (mesh.is_boundary_node(mesh.node_multi(i)))
            worst = std::max(worst, std::abs(field.values[i]));
    return worst;
}

NodalField field_from_dofs(MeshPtr mesh, const DofMap& dofs, std::span<const double> x) {
    if (x.size() != dofs.n_dofs())
        throw Error(ErrorCode::invalid_config, "solution size does not match the unknown count");
    NodalField field;
    field.mesh = mesh;
    field.values.assign(mesh->n_nodes, 0.0);
    for (std::size_t d = 0; d < dofs.n_dofs(); ++d) field.values[dofs.dof_to_node[d]] = x[d];
    return field;
}

NodalField subtract(const NodalField& a, const NodalField& b) {
    if (a.mesh.get() != b.mesh.get() && !(a.mesh->dim == b.mesh->dim && a.values.size() == b.values.size()))
        throw Error(ErrorCode::invalid_config, "fields live on different meshes");
    NodalField out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
    return out;
}

void dump_field_csv(const NodalField& field, std::ostream& out) {
    const TensorMesh& mesh = *field.mesh;
    for (int a = 0; a < mesh.dim; ++a) out << "x" << (a + 1) << ",";
    out << "value\n";
    char buf[32];
    double x[3];
    for (std::size_t i = 0; i < mesh.n_nodes; ++i) {
        mesh.node_coords(mesh.node_multi(i), x);
        for (int a = 0; a < mesh.dim; ++a) {
            std::snprintf(buf, sizeof(buf), "%.17g", x[a]);
            out << buf << ",";
        }
        std::snprintf(buf, sizeof(buf), "%.17g", field.values[i]);
        out << buf << "\n";
    }
}

}  // namespace anisofem
