#pragma once

#include <vector>

#include "anisofem/field.hpp"
#include "anisofem/problems.hpp"
#include "anisofem/quadrature.hpp"

namespace anisofem {

enum class NormKind {
    l2,       // ||v||
    grad,     // ||grad v||
    grad_x1,  // gradient components of the first `split` axes
    grad_x2,  // remaining components
};

/// Cellwise Gauss integration of the squared selection; exact for Q1 fields
/// with 2 points per axis.
double seminorm(const NodalField& field, NormKind kind, const QuadratureRule& quad,
                int threads = 1);

/// seminorm(prolongate(coarse) - fine); `fine.mesh` must refine `coarse.mesh`.
double error_between(const NodalField& coarse, const NodalField& fine, NormKind kind);

/// Gradient-seminorm distance between the field and a pointwise exact
/// gradient, by cellwise Gauss quadrature.
double error_vs_exact(const NodalField& field, const VectorFn& exact_gradient, NormKind kind,
                      const QuadratureRule& quad);

/// Mesh-weighted l2 sums of second-difference stencils over strictly interior
/// nodes, grouped by the axis split, plus the eps-weighted combination
/// eps^2 * d2x1 + eps * d2x1x2 + d2x2. Uniform grids only.
struct H2Indicators {
    double d2x1 = 0.0;
    double d2x1x2 = 0.0;
    double d2x2 = 0.0;
    double combined = 0.0;
};

H2Indicators second_difference_indicators(const NodalField& field, double eps);

/// ||v|| / ||grad_X2 v|| for a zero-trace field; bounded by 1/pi on the unit
/// cube.
double poincare_ratio(const NodalField& field);

struct RateSample {
    double param = 0.0;
    double error = 0.0;
};

struct RateFit {
    std::vector<RateSample> samples;
    double slope = 0.0;
    double intercept = 0.0;  // of log(error) vs log(param)
    double r2 = 0.0;
};

/// Least-squares slope of log(error) against log(param). Needs at least two
/// samples, all positive.
RateFit fit_rate(std::vector<RateSample> samples);

}  // namespace anisofem
