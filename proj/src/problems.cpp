#include "anisofem/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "anisofem/errors.hpp"

namespace anisofem {

namespace {

constexpr double kPi = std::numbers::pi;

// Smallest eigenvalue of a symmetric n x n matrix (n <= 3) by cyclic Jacobi
// rotations.
double sym_eig_min(int n, const double* a_in) {
    double a[9];
    for (int i = 0; i < n * n; ++i) a[i] = a_in[i];
    // symmetrize first; validation reports asymmetry separately
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = a[j * n + i] = s;
        }
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = 0.5 * (a[q * n + q] - a[p * n + p]) / apq;
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
    }
    double lo = a[0];
    for (int i = 1; i < n; ++i) lo = std::min(lo, a[i * n + i]);
    return lo;
}

double bump_product(std::span<const double> x) {
    double p = 1.0;
    for (double xi : x) p *= 4.0 * xi * (1.0 - xi);
    return p;
}

}  // namespace

MatrixFn scale_blocks(const DiffusionSpec& spec, double eps, int split) {
    if (!(eps > 0.0) || eps > 1.0)
        throw Error(ErrorCode::invalid_epsilon, "eps must lie in (0,1]");
    const int dim = spec.dim;
    const MatrixFn a = spec.a;
    return [a, eps, dim, split](std::span<const double> x, double* out) {
        a(x, out);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) {
                const bool i1 = i < split;
                const bool j1 = j < split;
                if (i1 && j1)
                    out[i * dim + j] *= eps * eps;
                else if (i1 != j1)
                    out[i * dim + j] *= eps;
            }
    };
}

MatrixFn mask_to_x2_block(const DiffusionSpec& spec, int split) {
    const int dim = spec.dim;
    const MatrixFn a = spec.a;
    return [a, dim, split](std::span<const double> x, double* out) {
        a(x, out);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                if (i < split || j < split) out[i * dim + j] = 0.0;
    };
}

ValidationReport validate_spec(const DiffusionSpec& diffusion, const SourceSpec& source,
                               const TensorMesh& mesh) {
    if (diffusion.dim != mesh.dim || source.dim != mesh.dim)
        throw Error(ErrorCode::invalid_config, "spec dimension does not match the mesh");
    ValidationReport report;
    const int dim = mesh.dim;
    const int q = mesh.split;
    double a[9];

    std::vector<std::array<double, 3>> samples;       // nodes + cell centers
    std::vector<std::array<double, 3>> boundary;      // boundary nodes + face centers
    double x[3];
    for (std::size_t i = 0; i < mesh.n_nodes; ++i) {
        const auto k = mesh.node_multi(i);
        mesh.node_coords(k, x);
        samples.push_back({x[0], x[1], dim > 2 ? x[2] : 0.0});
        if (mesh.is_boundary_node(k)) boundary.push_back(samples.back());
    }
    for (std::size_t c = 0; c < mesh.n_cells; ++c) {
        const auto cm = mesh.cell_multi(c);
        std::array<double, 3> center{0.0, 0.0, 0.0};
        for (int a2 = 0; a2 < dim; ++a2) {
            const Grid1D& g = mesh.grids[a2];
            center[a2] = g.points[cm[a2]] + 0.5 * g.steps[cm[a2]];
        }
        samples.push_back(center);
        // face centers on the boundary sides
        for (int a2 = 0; a2 < dim; ++a2) {
            if (cm[a2] == 0) {
                auto face = center;
                face[a2] = 0.0;
                boundary.push_back(face);
            }
            if (cm[a2] == mesh.cells_per_axis(a2) - 1) {
                auto face = center;
                face[a2] = 1.0;
                boundary.push_back(face);
            }
        }
    }

    double min_eig = std::numeric_limits<double>::infinity();
    double max_abs = 0.0;
    double max_asym = 0.0;
    for (const auto& p : samples) {
        diffusion.a(std::span<const double>(p.data(), dim), a);
        for (int i = 0; i < dim * dim; ++i) max_abs = std::max(max_abs, std::abs(a[i]));
        min_eig = std::min(min_eig, sym_eig_min(dim, a));
        if (diffusion.flags.symmetric)
            for (int i = 0; i < dim; ++i)
                for (int j = i + 1; j < dim; ++j)
                    max_asym = std::max(max_asym, std::abs(a[i * dim + j] - a[j * dim + i]));
    }
    report.min_sym_eigenvalue = min_eig;
    report.ellipticity_ok = min_eig > 0.0;
    if (!report.ellipticity_ok)
        report.failures.push_back("coefficient matrix is not positive definite at a sample point");
    if (diffusion.flags.symmetric) {
        report.symmetry_ok = max_asym <= 1e-12 * (1.0 + max_abs);
        if (!report.symmetry_ok)
            report.failures.push_back("declared symmetric but A != A^T at a sample point");
    }
    if (diffusion.flags.offdiag_zero_on_boundary) {
        double worst = 0.0;
        for (const auto& p : boundary) {
            diffusion.a(std::span<const double>(p.data(), dim), a);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j)
                    if (i != j) worst = std::max(worst, std::abs(a[i * dim + j]));
        }
        report.offdiag_boundary_ok = worst <= 1e-10;
        if (!report.offdiag_boundary_ok)
            report.failures.push_back("declared off-diagonal boundary decay fails on the boundary");
    }
    if (diffusion.flags.a22_depends_on_x2_only) {
        // move the X1 part of each sample to a few other X1 positions and
        // compare the X2/X2 block
        double worst = 0.0;
        double b[9];
        const double shifts[3] = {0.0, 0.37, 0.81};
        for (const auto& p : samples) {
            diffusion.a(std::span<const double>(p.data(), dim), a);
            auto moved = p;
            for (double s : shifts) {
                for (int i = 0; i < q; ++i) moved[i] = s;
                diffusion.a(std::span<const double>(moved.data(), dim), b);
                for (int i = q; i < dim; ++i)
                    for (int j = q; j < dim; ++j)
                        worst = std::max(worst, std::abs(a[i * dim + j] - b[i * dim + j]));
            }
        }
        report.a22_x2_only_ok = worst <= 1e-10;
        if (!report.a22_x2_only_ok)
            report.failures.push_back("declared X2-only A22 block varies with X1");
    }
    // the source only needs to be evaluable and finite on the sample set
    for (const auto& p : samples) {
        if (!std::isfinite(source.f(std::span<const double>(p.data(), dim)))) {
            report.failures.push_back("source evaluates to a non-finite value");
            break;
        }
    }
    return report;
}

double SmoothCutoff::ramp(double t) const {
    const double lo = c2 * delta / 3.0;
    const double hi = c2 * delta;
    const double u = std::min(t, 1.0 - t);
    if (u <= lo) return 0.0;
    if (u >= hi) return 1.0;
    const double s = (u - lo) / (hi - lo);
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

double SmoothCutoff::ramp_d1(double t) const {
    const double lo = c2 * delta / 3.0;
    const double hi = c2 * delta;
    const double u = std::min(t, 1.0 - t);
    if (u <= lo || u >= hi) return 0.0;
    const double w = hi - lo;
    const double s = (u - lo) / w;
    const double ds = 30.0 * s * s * (s - 1.0) * (s - 1.0) / w;
    return t < 0.5 ? ds : -ds;
}

double SmoothCutoff::ramp_d2(double t) const {
    const double lo = c2 * delta / 3.0;
    const double hi = c2 * delta;
    const double u = std::min(t, 1.0 - t);
    if (u <= lo || u >= hi) return 0.0;
    const double w = hi - lo;
    const double s = (u - lo) / w;
    return 60.0 * s * (2.0 * s - 1.0) * (s - 1.0) / (w * w);
}

double SmoothCutoff::value(std::span<const double> x) const {
    const int n = active_axes < 0 ? int(x.size()) : active_axes;
    double v = 1.0;
    for (int a = 0; a < n; ++a) v *= ramp(x[a]);
    return v;
}

double SmoothCutoff::partial(int axis, std::span<const double> x) const {
    const int n = active_axes < 0 ? int(x.size()) : active_axes;
    if (axis >= n) return 0.0;
    double v = ramp_d1(x[axis]);
    for (int a = 0; a < n; ++a)
        if (a != axis) v *= ramp(x[a]);
    return v;
}

double SmoothCutoff::second(int axis_a, int axis_b, std::span<const double> x) const {
    const int n = active_axes < 0 ? int(x.size()) : active_axes;
    if (axis_a >= n && axis_b >= n) return 0.0;
    if (axis_a >= n || axis_b >= n) return 0.0;
    double v = 1.0;
    if (axis_a == axis_b) {
        v = ramp_d2(x[axis_a]);
        for (int a = 0; a < n; ++a)
            if (a != axis_a) v *= ramp(x[a]);
    } else {
        v = ramp_d1(x[axis_a]) * ramp_d1(x[axis_b]);
        for (int a = 0; a < n; ++a)
            if (a != axis_a && a != axis_b) v *= ramp(x[a]);
    }
    return v;
}

SmoothCutoff build_cutoff(double delta, double c2) {
    if (!(delta > 0.0) || delta >= 1.0)
        throw Error(ErrorCode::invalid_delta, "delta must lie in (0,1)");
    if (!(c2 > 0.0) || c2 > 1.0)
        throw Error(ErrorCode::invalid_config, "c2 must lie in (0,1]");
    if (c2 * delta >= 0.5)
        throw Error(ErrorCode::degenerate_cutoff,
                    "c2*delta >= 1/2 leaves no interior plateau");
    SmoothCutoff cutoff;
    cutoff.delta = delta;
    cutoff.c2 = c2;
    cutoff.active_axes = -1;
    // quintic smoothstep has max slope 15/8 over a ramp of width 2*c2*delta/3
    cutoff.grad_sup = (15.0 / 8.0) / (2.0 * c2 * delta / 3.0);
    return cutoff;
}

SmoothCutoff build_cutoff_directional(double delta, double c2, int split) {
    if (split < 1) throw Error(ErrorCode::invalid_split, "split must be at least 1");
    SmoothCutoff cutoff = build_cutoff(delta, c2);
    cutoff.active_axes = split;
    return cutoff;
}

std::pair<SourceSpec, SourceSpec> split_source(const SourceSpec& f, double delta) {
    auto cutoff = std::make_shared<SmoothCutoff>(build_cutoff(delta, 1.0));
    const int dim = f.dim;

    SourceSpec near = f;
    near.name = f.name + "+inner";
    near.tags.h10 = true;
    SourceSpec far = f;
    far.name = f.name + "+boundary-strip";
    far.tags.h10 = false;

    const ScalarFn base = f.f;
    near.f = [cutoff, base](std::span<const double> x) { return cutoff->value(x) * base(x); };
    far.f = [cutoff, base](std::span<const double> x) {
        return (1.0 - cutoff->value(x)) * base(x);
    };

    if (f.grad) {
        const VectorFn bg = f.grad;
        near.grad = [cutoff, base, bg, dim](std::span<const double> x, double* out) {
            bg(x, out);
            const double rho = cutoff->value(x);
            const double fx = base(x);
            for (int a = 0; a < dim; ++a) out[a] = rho * out[a] + cutoff->partial(a, x) * fx;
        };
        far.grad = [cutoff, base, bg, dim](std::span<const double> x, double* out) {
            bg(x, out);
            const double rho = cutoff->value(x);
            const double fx = base(x);
            for (int a = 0; a < dim; ++a)
                out[a] = (1.0 - rho) * out[a] - cutoff->partial(a, x) * fx;
        };
    } else {
        near.grad = nullptr;
        far.grad = nullptr;
    }
    if (f.hess && f.grad) {
        const VectorFn bg = f.grad;
        const MatrixFn bh = f.hess;
        near.hess = [cutoff, base, bg, bh, dim](std::span<const double> x, double* out) {
            double g[3];
            bh(x, out);
            bg(x, g);
            const double rho = cutoff->value(x);
            const double fx = base(x);
            for (int a = 0; a < dim; ++a)
                for (int b = 0; b < dim; ++b)
                    out[a * dim + b] = rho * out[a * dim + b] + cutoff->partial(a, x) * g[b] +
                                       cutoff->partial(b, x) * g[a] +
                                       cutoff->second(a, b, x) * fx;
        };
        far.hess = [near_h = near.hess, bh, dim](std::span<const double> x, double* out) {
            double inner[9];
            near_h(x, inner);
            bh(x, out);
            for (int i = 0; i < dim * dim; ++i) out[i] -= inner[i];
        };
    } else {
        near.hess = nullptr;
        far.hess = nullptr;
    }
    return {near, far};
}

DiffusionSpec make_diffusion(const std::string& name, int dim, const DiffusionParams& params) {
    if (dim < 2 || dim > 3)
        throw Error(ErrorCode::invalid_config, "diffusion dimension must be 2 or 3");
    DiffusionSpec spec;
    spec.dim = dim;
    spec.name = name;
    if (name == "identity") {
        spec.a = [dim](std::span<const double>, double* out) {
            for (int i = 0; i < dim * dim; ++i) out[i] = 0.0;
            for (int i = 0; i < dim; ++i) out[i * dim + i] = 1.0;
        };
        spec.lambda_claimed = 1.0;
        spec.flags = {true, true, true, true};
    } else if (name == "anisotropic-constant") {
        const double a = params.a;
        const double b = params.b;
        const int split = params.split;
        if (!(a > 0.0) || !(b > 0.0))
            throw Error(ErrorCode::invalid_config, "anisotropic-constant needs positive a and b");
        if (split < 1 || split >= dim)
            throw Error(ErrorCode::invalid_split, "axis split must satisfy 1 <= split < dim");
        spec.a = [dim, split, a, b](std::span<const double>, double* out) {
            for (int i = 0; i < dim * dim; ++i) out[i] = 0.0;
            for (int i = 0; i < dim; ++i) out[i * dim + i] = i < split ? a : b;
        };
        spec.lambda_claimed = std::min(a, b);
        spec.flags = {true, true, true, true};
    } else if (name == "variable-offdiag") {
        const double beta = params.beta;
        const double a11 = params.a11;
        const int split = params.split;
        if (!(a11 > 0.0))
            throw Error(ErrorCode::invalid_config, "variable-offdiag needs positive a11");
        if (split < 1 || split >= dim)
            throw Error(ErrorCode::invalid_split, "axis split must satisfy 1 <= split < dim");
        spec.a = [dim, split, beta, a11](std::span<const double> x, double* out) {
            const double c = beta * bump_product(x);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) {
                    const bool mixed = (i < split) != (j < split);
                    out[i * dim + j] = mixed ? c : 0.0;
                }
            out[0] = a11;
            for (int i = 1; i < dim; ++i) out[i * dim + i] = 1.0;
        };
        // the coupling pattern is the adjacency of the complete bipartite
        // graph between the axis groups, with extreme eigenvalues
        // +-sqrt(q (dim - q)); |c| <= beta bounds the diagonal shift
        const double shift = beta * std::sqrt(double(split) * double(dim - split));
        spec.lambda_claimed = std::min(a11, 1.0) - shift;
        if (spec.lambda_claimed <= 0.0)
            throw Error(ErrorCode::invalid_config,
                        "variable-offdiag coupling too strong for ellipticity");
        spec.flags = {true, true, true, true};
    } else {
        throw Error(ErrorCode::invalid_config, "unknown diffusion: " + name);
    }
    return spec;
}

SourceSpec make_source(const std::string& name, int dim, int split) {
    if (dim < 2 || dim > 3)
        throw Error(ErrorCode::invalid_config, "source dimension must be 2 or 3");
    if (split < 1 || split >= dim)
        throw Error(ErrorCode::invalid_split, "axis split must satisfy 1 <= split < dim");
    SourceSpec spec;
    spec.dim = dim;
    spec.name = name;
    if (name == "sine-product") {
        spec.f = [dim](std::span<const double> x) {
            double v = 1.0;
            for (int a = 0; a < dim; ++a) v *= std::sin(kPi * x[a]);
            return v;
        };
        spec.grad = [dim](std::span<const double> x, double* out) {
            for (int a = 0; a < dim; ++a) {
                out[a] = kPi;
                for (int b = 0; b < dim; ++b)
                    out[a] *= b == a ? std::cos(kPi * x[b]) : std::sin(kPi * x[b]);
            }
        };
        spec.hess = [dim](std::span<const double> x, double* out) {
            for (int a = 0; a < dim; ++a)
                for (int b = 0; b < dim; ++b) {
                    double v = kPi * kPi * (a == b ? -1.0 : 1.0);
                    for (int c = 0; c < dim; ++c) {
                        const bool differentiate = (c == a || c == b) && a != b;
                        v *= differentiate ? std::cos(kPi * x[c]) : std::sin(kPi * x[c]);
                    }
                    out[a * dim + b] = v;
                }
        };
        spec.tags = {true, true, true};
    } else if (name == "one") {
        spec.f = [](std::span<const double>) { return 1.0; };
        spec.grad = [dim](std::span<const double>, double* out) {
            for (int a = 0; a < dim; ++a) out[a] = 0.0;
        };
        spec.hess = [dim](std::span<const double>, double* out) {
            for (int i = 0; i < dim * dim; ++i) out[i] = 0.0;
        };
        spec.tags = {true, false, true};
    } else if (name == "x2-profile") {
        // cosine along the X1 axes keeps a nonzero trace on the X1-lateral
        // faces; sine along the X2 axes vanishes on the others
        auto factor = [split](int axis, double t) {
            return axis < split ? std::cos(kPi * t) : std::sin(kPi * t);
        };
        auto dfactor = [split](int axis, double t) {
            return axis < split ? -kPi * std::sin(kPi * t) : kPi * std::cos(kPi * t);
        };
        spec.f = [dim, factor](std::span<const double> x) {
            double v = 1.0;
            for (int a = 0; a < dim; ++a) v *= factor(a, x[a]);
            return v;
        };
        spec.grad = [dim, factor, dfactor](std::span<const double> x, double* out) {
            for (int a = 0; a < dim; ++a) {
                out[a] = 1.0;
                for (int b = 0; b < dim; ++b)
                    out[a] *= b == a ? dfactor(b, x[b]) : factor(b, x[b]);
            }
        };
        spec.hess = [dim, factor, dfactor](std::span<const double> x, double* out) {
            for (int a = 0; a < dim; ++a)
                for (int b = 0; b < dim; ++b) {
                    double v = 1.0;
                    if (a == b) {
                        for (int c = 0; c < dim; ++c)
                            v *= c == a ? -kPi * kPi * factor(c, x[c]) : factor(c, x[c]);
                    } else {
                        for (int c = 0; c < dim; ++c)
                            v *= (c == a || c == b) ? dfactor(c, x[c]) : factor(c, x[c]);
                    }
                    out[a * dim + b] = v;
                }
        };
        spec.tags = {true, false, true};
    } else {
        throw Error(ErrorCode::invalid_config, "unknown source: " + name);
    }
    return spec;
}

}  // namespace anisofem
