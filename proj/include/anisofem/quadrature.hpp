#pragma once

#include <array>

namespace anisofem {

/// Gauss-Legendre rule on the reference interval [0,1], tensorized per axis
/// by the assembly and integration loops. Two points integrate cubics
/// exactly, which covers every Q1 stiffness/mass/seminorm integrand with
/// cellwise-constant coefficients.
struct QuadratureRule {
    int points_per_axis = 2;
    std::array<double, 3> t{};  // abscissae in (0,1)
    std::array<double, 3> w{};  // weights, sum to 1
};

QuadratureRule gauss_rule(int points_per_axis);

}  // namespace anisofem
