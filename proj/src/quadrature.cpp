#include "anisofem/quadrature.hpp"

#include <cmath>

#include "anisofem/errors.hpp"

namespace anisofem {

QuadratureRule gauss_rule(int points_per_axis) {
    QuadratureRule rule;
    rule.points_per_axis = points_per_axis;
    if (points_per_axis == 2) {
        const double d = 0.5 / std::sqrt(3.0);
        rule.t = {0.5 - d, 0.5 + d, 0.0};
        rule.w = {0.5, 0.5, 0.0};
    } else if (points_per_axis == 3) {
        const double d = 0.5 * std::sqrt(3.0 / 5.0);
        rule.t = {0.5 - d, 0.5, 0.5 + d};
        rule.w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    } else {
        throw Error(ErrorCode::invalid_quadrature, "supported points per axis: 2 or 3");
    }
    return rule;
}

}  // namespace anisofem
