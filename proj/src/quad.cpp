#include "trajembed/quad.hpp"

#include <cmath>

#include "trajembed/errors.hpp"

namespace trajembed {

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole,
                   double rel_tol, double abs_tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 ||
      std::abs(delta) <= 15.0 * (rel_tol * std::abs(left + right) + abs_tol)) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, rel_tol, 0.5 * abs_tol,
                     depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, rel_tol, 0.5 * abs_tol,
                     depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double rel_tol, double abs_tol,
                        int max_depth) {
  if (!(b >= a)) throw ValidationError("integration bounds are reversed");
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, rel_tol, abs_tol, max_depth);
}

double trapezoid(const std::function<double(double)>& f, double a, double b,
                 int n) {
  if (n < 2) throw ValidationError("trapezoid rule needs at least two points");
  const double h = (b - a) / (n - 1);
  double sum = 0.5 * (f(a) + f(b));
  for (int i = 1; i + 1 < n; ++i) sum += f(a + i * h);
  return sum * h;
}

}  // namespace trajembed
