#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anisofem/field.hpp"
#include "anisofem/mesh.hpp"

namespace anisofem {

/// Writes the dim components of a vector-valued function at x.
using VectorFn = std::function<void(std::span<const double>, double*)>;
/// Writes a dim x dim matrix at x, row-major.
using MatrixFn = std::function<void(std::span<const double>, double*)>;

struct DiffusionFlags {
    bool symmetric = false;
    bool lipschitz = false;
    bool offdiag_zero_on_boundary = false;
    bool a22_depends_on_x2_only = false;
};

/// Coefficient matrix A(x) of the diffusion operator, declared properties
/// included. The X1/X2 block structure is fixed by the mesh split, not here.
struct DiffusionSpec {
    int dim = 0;
    std::string name;
    MatrixFn a;
    double lambda_claimed = 0.0;  // declared ellipticity constant
    DiffusionFlags flags;
};

struct SourceTags {
    bool h2 = false;    // second derivatives square-integrable
    bool h10 = false;   // zero trace on the whole boundary
    bool linf = false;  // bounded
};

struct SourceSpec {
    int dim = 0;
    std::string name;
    ScalarFn f;
    SourceTags tags;
    VectorFn grad;    // optional analytic gradient (may be null)
    MatrixFn hess;    // optional analytic second derivatives (may be null)
};

/// A(x) with the perturbation scaling applied blockwise: entries with both
/// indices in X1 get eps^2, mixed entries get eps, X2/X2 entries stay.
MatrixFn scale_blocks(const DiffusionSpec& spec, double eps, int split);

/// A(x) masked to its X2/X2 block (zeros elsewhere), as used by the limit
/// operator.
MatrixFn mask_to_x2_block(const DiffusionSpec& spec, int split);

struct ValidationReport {
    double min_sym_eigenvalue = 0.0;
    bool ellipticity_ok = false;
    bool symmetry_ok = true;
    bool offdiag_boundary_ok = true;
    bool a22_x2_only_ok = true;
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }
};

/// Samples A at mesh nodes, cell centers and boundary face centers and checks
/// every declared flag plus positivity of the symmetric part. Declared-only
/// properties (lipschitz) are not sampled.
ValidationReport validate_spec(const DiffusionSpec& diffusion, const SourceSpec& source,
                               const TensorMesh& mesh);

/// C^2 cutoff: a tensor product of one quintic-smoothstep ramp per active
/// axis. The ramp is 0 on [0, c2*delta/3], 1 on [c2*delta, 1 - c2*delta] and
/// symmetric, so sup|grad| * delta stays bounded as delta -> 0.
struct SmoothCutoff {
    double delta = 0.0;
    double c2 = 1.0;
    int active_axes = -1;  // tensorize over the first `active_axes` point
                           // components; -1 means all of them
    double grad_sup = 0.0;  // sup of |d/dt| of the one-axis ramp

    double ramp(double t) const;
    double ramp_d1(double t) const;
    double ramp_d2(double t) const;

    double value(std::span<const double> x) const;
    double partial(int axis, std::span<const double> x) const;
    double second(int axis_a, int axis_b, std::span<const double> x) const;
};

SmoothCutoff build_cutoff(double delta, double c2 = 1.0);
/// Variant ramping only along the first `split` axes (X1 directions).
SmoothCutoff build_cutoff_directional(double delta, double c2, int split);

/// f = f1 + f2 with f1 = cutoff * f vanishing near the boundary and f2
/// supported in the boundary strip of width c2*delta.
std::pair<SourceSpec, SourceSpec> split_source(const SourceSpec& f, double delta);

/// Builtin coefficient matrices: "identity", "anisotropic-constant"
/// (diagonal blocks a*I and b*I), "variable-offdiag" (unit diagonal except
/// a11; the mixed-block entries all equal beta * prod_i 4 x_i (1 - x_i),
/// within-block off-diagonals stay zero).
struct DiffusionParams {
    double a = 2.0;    // anisotropic-constant: X1-block diagonal
    double b = 1.0;    // anisotropic-constant: X2-block diagonal
    int split = 1;     // axes in the X1 group (anisotropic-constant, variable-offdiag)
    double beta = 0.5;  // variable-offdiag: coupling amplitude
    double a11 = 1.0;   // variable-offdiag: first diagonal entry
};

DiffusionSpec make_diffusion(const std::string& name, int dim,
                             const DiffusionParams& params = {});

/// Builtin sources: "sine-product" (zero trace), "one", "x2-profile"
/// (nonzero trace on the X1-lateral boundary only).
SourceSpec make_source(const std::string& name, int dim, int split);

}  // namespace anisofem
