#include "anisofem/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "anisofem/errors.hpp"

namespace anisofem {

namespace {

inline double shape(bool high, double t) { return high ? t : 1.0 - t; }

// Integrates the callback (a squared integrand) over all cells with the
// tensor Gauss rule. The callback sees the cell's corner node ids, steps,
// local coordinates and the global point.
template <typename CellEval>
double integrate_squared(const TensorMesh& mesh, const QuadratureRule& quad, int threads,
                         CellEval&& eval) {
    const int dim = mesh.dim;
    const int ncorner = 1 << dim;
    const int g = quad.points_per_axis;

    auto chunk_sum = [&](std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        std::size_t corner_ids[8];
        for (std::size_t ci = lo; ci < hi; ++ci) {
            const auto c = mesh.cell_multi(ci);
            double h[3];
            double base[3];
            for (int a = 0; a < dim; ++a) {
                h[a] = mesh.grids[a].steps[c[a]];
                base[a] = mesh.grids[a].points[c[a]];
            }
            for (int corner = 0; corner < ncorner; ++corner) {
                std::array<int, 3> k = c;
                for (int a = 0; a < dim; ++a) k[a] += (corner >> a) & 1;
                corner_ids[corner] = mesh.node_index(k);
            }
            std::array<int, 3> qp{0, 0, 0};
            while (true) {
                double t[3];
                double x[3];
                double wvol = 1.0;
                for (int a = 0; a < dim; ++a) {
                    t[a] = quad.t[qp[a]];
                    x[a] = base[a] + t[a] * h[a];
                    wvol *= quad.w[qp[a]] * h[a];
                }
                acc += wvol * eval(corner_ids, h, t, x);
                int a = dim - 1;
                while (a >= 0 && ++qp[a] >= g) qp[a--] = 0;
                if (a < 0) break;
            }
        }
        return acc;
    };

    if (threads <= 1 || mesh.n_cells < 1024) return chunk_sum(0, mesh.n_cells);
    std::vector<double> partial(threads, 0.0);
    std::vector<std::thread> pool;
    const std::size_t chunk = (mesh.n_cells + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::size_t lo = std::min(mesh.n_cells, t * chunk);
        const std::size_t hi = std::min(mesh.n_cells, lo + chunk);
        if (lo < hi)
            pool.emplace_back([&, t, lo, hi] { partial[t] = chunk_sum(lo, hi); });
    }
    for (auto& th : pool) th.join();
    double acc = 0.0;
    for (double p : partial) acc += p;  // fixed order: deterministic per thread count
    return acc;
}

}  // namespace

double seminorm(const NodalField& field, NormKind kind, const QuadratureRule& quad, int threads) {
    const TensorMesh& mesh = *field.mesh;
    const int dim = mesh.dim;
    const int ncorner = 1 << dim;
    const int lo_axis = kind == NormKind::grad_x2 ? mesh.split : 0;
    const int hi_axis = kind == NormKind::grad_x1 ? mesh.split : dim;
    const double* values = field.values.data();

    const double sq = integrate_squared(
        mesh, quad, threads,
        [&](const std::size_t* corner_ids, const double* h, const double* t, const double*) {
            if (kind == NormKind::l2) {
                double v = 0.0;
                for (int corner = 0; corner < ncorner; ++corner) {
                    double w = 1.0;
                    for (int a = 0; a < dim; ++a) w *= shape((corner >> a) & 1, t[a]);
                    v += w * values[corner_ids[corner]];
                }
                return v * v;
            }
            double out = 0.0;
            for (int a = lo_axis; a < hi_axis; ++a) {
                double ga = 0.0;
                for (int corner = 0; corner < ncorner; ++corner) {
                    double w = ((corner >> a) & 1 ? 1.0 : -1.0) / h[a];
                    for (int b = 0; b < dim; ++b)
                        if (b != a) w *= shape((corner >> b) & 1, t[b]);
                    ga += w * values[corner_ids[corner]];
                }
                out += ga * ga;
            }
            return out;
        });
    return std::sqrt(sq);
}

double error_between(const NodalField& coarse, const NodalField& fine, NormKind kind) {
    NodalField diff = prolongate(coarse, fine.mesh);
    for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= fine.values[i];
    return seminorm(diff, kind, gauss_rule(2));
}

double error_vs_exact(const NodalField& field, const VectorFn& exact_gradient, NormKind kind,
                      const QuadratureRule& quad) {
    if (kind == NormKind::l2)
        throw Error(ErrorCode::invalid_config,
                    "exact-gradient errors are defined for gradient seminorms only");
    const TensorMesh& mesh = *field.mesh;
    const int dim = mesh.dim;
    const int ncorner = 1 << dim;
    const int lo_axis = kind == NormKind::grad_x2 ? mesh.split : 0;
    const int hi_axis = kind == NormKind::grad_x1 ? mesh.split : dim;
    const double* values = field.values.data();

    const double sq = integrate_squared(
        mesh, quad, 1,
        [&](const std::size_t* corner_ids, const double* h, const double* t, const double* x) {
            double gexact[3];
            exact_gradient(std::span<const double>(x, dim), gexact);
            double out = 0.0;
            for (int a = lo_axis; a < hi_axis; ++a) {
                double ga = 0.0;
                for (int corner = 0; corner < ncorner; ++corner) {
                    double w = ((corner >> a) & 1 ? 1.0 : -1.0) / h[a];
                    for (int b = 0; b < dim; ++b)
                        if (b != a) w *= shape((corner >> b) & 1, t[b]);
                    ga += w * values[corner_ids[corner]];
                }
                const double diff = ga - gexact[a];
                out += diff * diff;
            }
            return out;
        });
    return std::sqrt(sq);
}

H2Indicators second_difference_indicators(const NodalField& field, double eps) {
    if (!(eps > 0.0) || eps > 1.0)
        throw Error(ErrorCode::invalid_epsilon, "eps must lie in (0,1]");
    const TensorMesh& mesh = *field.mesh;
    const int dim = mesh.dim;
    const int q = mesh.split;
    for (int a = 0; a < dim; ++a)
        if (!mesh.grids[a].is_uniform())
            throw Error(ErrorCode::unsupported_mesh,
                        "second-difference stencils need uniform grids");

    double h[3];
    double vol = 1.0;
    std::size_t stride[3];
    for (int a = 0; a < dim; ++a) {
        h[a] = mesh.grids[a].steps[0];
        vol *= h[a];
        stride[a] = 1;
        for (int e = dim - 1; e > a; --e) stride[a] *= std::size_t(mesh.points_per_axis(e));
    }

    // s[a][b]: mesh-weighted sum of squared second differences over strictly
    // interior nodes, stored unordered (a <= b)
    double s[3][3] = {};
    const auto& v = field.values;

    std::array<int, 3> k{1, 1, 1};
    while (true) {
        const std::size_t idx = mesh.node_index(k);
        for (int a = 0; a < dim; ++a) {
            const double pure =
                (v[idx + stride[a]] - 2.0 * v[idx] + v[idx - stride[a]]) / (h[a] * h[a]);
            s[a][a] += vol * pure * pure;
            for (int b = a + 1; b < dim; ++b) {
                const double cross =
                    (v[idx + stride[a] + stride[b]] - v[idx + stride[a] - stride[b]] -
                     v[idx - stride[a] + stride[b]] + v[idx - stride[a] - stride[b]]) /
                    (4.0 * h[a] * h[b]);
                s[a][b] += vol * cross * cross;
            }
        }
        int a = dim - 1;
        while (a >= 0 && ++k[a] > mesh.cells_per_axis(a) - 1) k[a--] = 1;
        if (a < 0) break;
    }

    // block sums over ordered index pairs: within-block mixed terms count
    // twice, the X1/X2 coupling block is taken one-sided
    auto block = [&](int alo, int ahi, int blo, int bhi) {
        double sum = 0.0;
        for (int a = alo; a < ahi; ++a)
            for (int b = blo; b < bhi; ++b) sum += s[std::min(a, b)][std::max(a, b)];
        return sum;
    };

    H2Indicators ind;
    ind.d2x1 = std::sqrt(block(0, q, 0, q));
    ind.d2x1x2 = std::sqrt(block(0, q, q, dim));
    ind.d2x2 = std::sqrt(block(q, dim, q, dim));
    ind.combined = eps * eps * ind.d2x1 + eps * ind.d2x1x2 + ind.d2x2;
    return ind;
}

double poincare_ratio(const NodalField& field) {
    double max_abs = 0.0;
    for (double v : field.values) max_abs = std::max(max_abs, std::abs(v));
    if (max_boundary_abs(field) > 1e-12 * (1.0 + max_abs))
        throw Error(ErrorCode::assumption_violated, "field does not vanish on the boundary");
    const QuadratureRule quad = gauss_rule(2);
    const double l2 = seminorm(field, NormKind::l2, quad);
    const double gx2 = seminorm(field, NormKind::grad_x2, quad);
    if (l2 == 0.0 || gx2 == 0.0)
        throw Error(ErrorCode::undefined_ratio, "ratio undefined for the zero field");
    return l2 / gx2;
}

RateFit fit_rate(std::vector<RateSample> samples) {
    if (samples.size() < 2)
        throw Error(ErrorCode::invalid_sample, "rate fit needs at least two samples");
    for (const auto& s : samples)
        if (!(s.param > 0.0) || !(s.error > 0.0))
            throw Error(ErrorCode::invalid_sample, "rate fit needs positive samples");

    const std::size_t n = samples.size();
    double mx = 0.0, my = 0.0;
    for (const auto& s : samples) {
        mx += std::log(s.param);
        my += std::log(s.error);
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& s : samples) {
        const double dx = std::log(s.param) - mx;
        const double dy = std::log(s.error) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0)
        throw Error(ErrorCode::invalid_sample, "rate fit needs at least two distinct parameters");

    RateFit fit;
    fit.samples = std::move(samples);
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    const double ss_res = syy - sxy * sxy / sxx;
    fit.r2 = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
    return fit;
}

}  // namespace anisofem
