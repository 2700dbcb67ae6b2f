#include "anisofem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "anisofem/errors.hpp"

namespace anisofem {

namespace {

inline double shape(bool high, double t) { return high ? t : 1.0 - t; }

void run_row_chunks(std::size_t n_rows, int threads,
                    const std::function<void(std::size_t, std::size_t)>& work) {
    if (threads <= 1 || n_rows < 64) {
        work(0, n_rows);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (n_rows + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::size_t lo = std::min(n_rows, t * chunk);
        const std::size_t hi = std::min(n_rows, lo + chunk);
        if (lo >= hi) continue;
        pool.emplace_back([&work, &errors, t, lo, hi] {
            try {
                work(lo, hi);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Rows are gathered one at a time: every cell touching the row's node is
// integrated and scattered into that row only. Each row is owned by exactly
// one thread, so results are bit-identical for every thread count.
SparseMatrix assemble_operator(const TensorMesh& mesh, const MatrixFn& a_eff,
                               const QuadratureRule& quad, int threads) {
    const int dim = mesh.dim;
    const int ncorner = 1 << dim;
    const DofMap dofs = make_dof_map(mesh);
    const std::size_t n = dofs.n_dofs();

    SparseMatrix m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);

    // sparsity pattern: interior neighbors within one cell layer, ascending
    auto for_each_neighbor = [&](const std::array<int, 3>& k, auto&& fn) {
        std::array<int, 3> off{-1, -1, -1};
        std::array<int, 3> nb{0, 0, 0};
        const int last = dim - 1;
        while (true) {
            bool ok = true;
            for (int a = 0; a < dim; ++a) {
                nb[a] = k[a] + off[a];
                if (nb[a] < 1 || nb[a] > mesh.cells_per_axis(a) - 1) ok = false;
            }
            if (ok) fn(nb);
            int a = last;
            while (a >= 0 && ++off[a] > 1) off[a--] = -1;
            if (a < 0) break;
        }
    };

    for (std::size_t d = 0; d < n; ++d) {
        const auto k = mesh.node_multi(dofs.dof_to_node[d]);
        std::size_t count = 0;
        for_each_neighbor(k, [&](const std::array<int, 3>&) { ++count; });
        m.row_ptr[d + 1] = m.row_ptr[d] + count;
    }
    m.col.resize(m.row_ptr[n]);
    m.val.assign(m.row_ptr[n], 0.0);
    for (std::size_t d = 0; d < n; ++d) {
        const auto k = mesh.node_multi(dofs.dof_to_node[d]);
        std::size_t p = m.row_ptr[d];
        for_each_neighbor(k, [&](const std::array<int, 3>& nb) {
            m.col[p++] = std::size_t(dofs.node_to_dof[mesh.node_index(nb)]);
        });
    }

    const int g = quad.points_per_axis;
    auto assemble_rows = [&](std::size_t lo, std::size_t hi) {
        double a[9];
        double x[3];
        double grad[8][3];
        for (std::size_t d = lo; d < hi; ++d) {
            const auto k = mesh.node_multi(dofs.dof_to_node[d]);
            double* row_val = &m.val[m.row_ptr[d]];
            const std::size_t* row_col = &m.col[m.row_ptr[d]];
            const std::size_t row_len = m.row_ptr[d + 1] - m.row_ptr[d];

            for (int own = 0; own < ncorner; ++own) {
                // cell whose `own` corner is this node
                std::array<int, 3> c = k;
                bool ok = true;
                for (int a2 = 0; a2 < dim; ++a2) {
                    c[a2] -= (own >> a2) & 1;
                    if (c[a2] < 0 || c[a2] >= mesh.cells_per_axis(a2)) ok = false;
                }
                if (!ok) continue;

                double h[3];
                double base[3];
                for (int a2 = 0; a2 < dim; ++a2) {
                    h[a2] = mesh.grids[a2].steps[c[a2]];
                    base[a2] = mesh.grids[a2].points[c[a2]];
                }

                std::array<int, 3> qp{0, 0, 0};
                while (true) {
                    double wvol = 1.0;
                    double t[3];
                    for (int a2 = 0; a2 < dim; ++a2) {
                        t[a2] = quad.t[qp[a2]];
                        wvol *= quad.w[qp[a2]] * h[a2];
                        x[a2] = base[a2] + t[a2] * h[a2];
                    }
                    a_eff(std::span<const double>(x, dim), a);

                    for (int corner = 0; corner < ncorner; ++corner) {
                        for (int a2 = 0; a2 < dim; ++a2) {
                            double gprod = ((corner >> a2) & 1 ? 1.0 : -1.0) / h[a2];
                            for (int b2 = 0; b2 < dim; ++b2)
                                if (b2 != a2) gprod *= shape((corner >> b2) & 1, t[b2]);
                            grad[corner][a2] = gprod;
                        }
                    }

                    for (int corner = 0; corner < ncorner; ++corner) {
                        std::array<int, 3> nb = c;
                        for (int a2 = 0; a2 < dim; ++a2) nb[a2] += (corner >> a2) & 1;
                        const int cd = dofs.node_to_dof[mesh.node_index(nb)];
                        if (cd < 0) continue;
                        double contrib = 0.0;
                        for (int i = 0; i < dim; ++i) {
                            double flux = 0.0;
                            for (int j = 0; j < dim; ++j) flux += a[i * dim + j] * grad[corner][j];
                            contrib += flux * grad[own][i];
                        }
                        // row slot for this column (at most 3^dim entries)
                        for (std::size_t p = 0; p < row_len; ++p)
                            if (row_col[p] == std::size_t(cd)) {
                                row_val[p] += wvol * contrib;
                                break;
                            }
                    }

                    int a2 = dim - 1;
                    while (a2 >= 0 && ++qp[a2] >= g) qp[a2--] = 0;
                    if (a2 < 0) break;
                }
            }
        }
    };
    run_row_chunks(n, threads, assemble_rows);
    return m;
}

}  // namespace

SparseMatrix assemble_stiffness_eps(const TensorMesh& mesh, const DiffusionSpec& a, double eps,
                                    const QuadratureRule& quad, int threads) {
    if (a.dim != mesh.dim)
        throw Error(ErrorCode::invalid_config, "coefficient dimension does not match the mesh");
    return assemble_operator(mesh, scale_blocks(a, eps, mesh.split), quad, threads);
}

SparseMatrix assemble_limit_stiffness(const TensorMesh& mesh, const DiffusionSpec& a,
                                      const QuadratureRule& quad, int threads) {
    if (a.dim != mesh.dim)
        throw Error(ErrorCode::invalid_config, "coefficient dimension does not match the mesh");
    if (!a.flags.a22_depends_on_x2_only)
        throw Error(ErrorCode::assumption_violated,
                    "limit operator needs an X2/X2 block independent of X1");
    return assemble_operator(mesh, mask_to_x2_block(a, mesh.split), quad, threads);
}

SparseMatrix assemble_mass(const TensorMesh& mesh, int threads) {
    const int dim = mesh.dim;
    const int ncorner = 1 << dim;
    const std::size_t n = mesh.n_nodes;
    const QuadratureRule quad = gauss_rule(2);  // exact for products of Q1 factors

    SparseMatrix m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);

    auto for_each_neighbor = [&](const std::array<int, 3>& k, auto&& fn) {
        std::array<int, 3> off{-1, -1, -1};
        std::array<int, 3> nb{0, 0, 0};
        while (true) {
            bool ok = true;
            for (int a = 0; a < dim; ++a) {
                nb[a] = k[a] + off[a];
                if (nb[a] < 0 || nb[a] > mesh.cells_per_axis(a)) ok = false;
            }
            if (ok) fn(nb);
            int a = dim - 1;
            while (a >= 0 && ++off[a] > 1) off[a--] = -1;
            if (a < 0) break;
        }
    };

    for (std::size_t i = 0; i < n; ++i) {
        const auto k = mesh.node_multi(i);
        std::size_t count = 0;
        for_each_neighbor(k, [&](const std::array<int, 3>&) { ++count; });
        m.row_ptr[i + 1] = m.row_ptr[i] + count;
    }
    m.col.resize(m.row_ptr[n]);
    m.val.assign(m.row_ptr[n], 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = mesh.node_multi(i);
        std::size_t p = m.row_ptr[i];
        for_each_neighbor(k, [&](const std::array<int, 3>& nb) { m.col[p++] = mesh.node_index(nb); });
    }

    auto assemble_rows = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const auto k = mesh.node_multi(i);
            double* row_val = &m.val[m.row_ptr[i]];
            const std::size_t* row_col = &m.col[m.row_ptr[i]];
            const std::size_t row_len = m.row_ptr[i + 1] - m.row_ptr[i];

            for (int own = 0; own < ncorner; ++own) {
                std::array<int, 3> c = k;
                bool ok = true;
                for (int a2 = 0; a2 < dim; ++a2) {
                    c[a2] -= (own >> a2) & 1;
                    if (c[a2] < 0 || c[a2] >= mesh.cells_per_axis(a2)) ok = false;
                }
                if (!ok) continue;
                double h[3];
                for (int a2 = 0; a2 < dim; ++a2) h[a2] = mesh.grids[a2].steps[c[a2]];

                std::array<int, 3> qp{0, 0, 0};
                while (true) {
                    double wvol = 1.0;
                    double t[3];
                    for (int a2 = 0; a2 < dim; ++a2) {
                        t[a2] = quad.t[qp[a2]];
                        wvol *= quad.w[qp[a2]] * h[a2];
                    }
                    double own_shape = 1.0;
                    for (int a2 = 0; a2 < dim; ++a2) own_shape *= shape((own >> a2) & 1, t[a2]);

                    for (int corner = 0; corner < ncorner; ++corner) {
                        std::array<int, 3> nb = c;
                        double s = own_shape;
                        for (int a2 = 0; a2 < dim; ++a2) {
                            nb[a2] += (corner >> a2) & 1;
                            s *= shape((corner >> a2) & 1, t[a2]);
                        }
                        const std::size_t cj = mesh.node_index(nb);
                        for (std::size_t p = 0; p < row_len; ++p)
                            if (row_col[p] == cj) {
                                row_val[p] += wvol * s;
                                break;
                            }
                    }

                    int a2 = dim - 1;
                    while (a2 >= 0 && ++qp[a2] >= 2) qp[a2--] = 0;
                    if (a2 < 0) break;
                }
            }
        }
    };
    run_row_chunks(n, threads, assemble_rows);
    return m;
}

std::vector<double> assemble_load(const TensorMesh& mesh, const SourceSpec& f, LoadMode mode,
                                  const QuadratureRule& quad, int threads) {
    if (f.dim != mesh.dim)
        throw Error(ErrorCode::invalid_config, "source dimension does not match the mesh");
    const DofMap dofs = make_dof_map(mesh);
    const std::size_t n = dofs.n_dofs();
    std::vector<double> b(n, 0.0);

    if (mode == LoadMode::interpolated) {
        // right side int I_h(f) v is exactly mass * nodal values
        std::vector<double> nodal(mesh.n_nodes);
        double x[3];
        for (std::size_t i = 0; i < mesh.n_nodes; ++i) {
            mesh.node_coords(mesh.node_multi(i), x);
            nodal[i] = f.f(std::span<const double>(x, mesh.dim));
            if (!std::isfinite(nodal[i]))
                throw Error(ErrorCode::invalid_source, "source evaluates to a non-finite value");
        }
        const SparseMatrix mass = assemble_mass(mesh, threads);
        std::vector<double> full(mesh.n_nodes);
        mass.matvec(nodal, full, threads);
        for (std::size_t d = 0; d < n; ++d) b[d] = full[dofs.dof_to_node[d]];
        return b;
    }

    const int dim = mesh.dim;
    const int ncorner = 1 << dim;
    const int g = quad.points_per_axis;
    auto gather = [&](std::size_t lo, std::size_t hi) {
        double x[3];
        for (std::size_t d = lo; d < hi; ++d) {
            const auto k = mesh.node_multi(dofs.dof_to_node[d]);
            double acc = 0.0;
            for (int own = 0; own < ncorner; ++own) {
                std::array<int, 3> c = k;
                bool ok = true;
                for (int a2 = 0; a2 < dim; ++a2) {
                    c[a2] -= (own >> a2) & 1;
                    if (c[a2] < 0 || c[a2] >= mesh.cells_per_axis(a2)) ok = false;
                }
                if (!ok) continue;
                double h[3];
                double base[3];
                for (int a2 = 0; a2 < dim; ++a2) {
                    h[a2] = mesh.grids[a2].steps[c[a2]];
                    base[a2] = mesh.grids[a2].points[c[a2]];
                }
                std::array<int, 3> qp{0, 0, 0};
                while (true) {
                    double wvol = 1.0;
                    double s = 1.0;
                    for (int a2 = 0; a2 < dim; ++a2) {
                        const double t = quad.t[qp[a2]];
                        wvol *= quad.w[qp[a2]] * h[a2];
                        s *= shape((own >> a2) & 1, t);
                        x[a2] = base[a2] + t * h[a2];
                    }
                    const double fx = f.f(std::span<const double>(x, dim));
                    if (!std::isfinite(fx))
                        throw Error(ErrorCode::invalid_source,
                                    "source evaluates to a non-finite value");
                    acc += wvol * s * fx;
                    int a2 = dim - 1;
                    while (a2 >= 0 && ++qp[a2] >= g) qp[a2--] = 0;
                    if (a2 < 0) break;
                }
            }
            b[d] = acc;
        }
    };
    run_row_chunks(n, threads, gather);
    return b;
}

}  // namespace anisofem
