#ifndef TRAJEMBED_QUAD_HPP
#define TRAJEMBED_QUAD_HPP

#include <functional>

namespace trajembed {

// Adaptive Simpson integration with Richardson correction; stops when the
// local correction is below rel_tol * |whole| + abs_tol.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double rel_tol = 1e-8, double abs_tol = 1e-14,
                        int max_depth = 48);

// Uniform trapezoid rule over n points including both endpoints.
double trapezoid(const std::function<double(double)>& f, double a, double b,
                 int n);

}  // namespace trajembed

#endif
