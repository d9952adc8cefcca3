#ifndef BROWNFLOW_QUADRATURE_HPP
#define BROWNFLOW_QUADRATURE_HPP

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace brownflow {

/// Thrown when adaptive quadrature cannot reach the requested tolerance.
class QuadratureError : public std::runtime_error {
public:
  QuadratureError(double requested, double achieved)
      : std::runtime_error(format(requested, achieved)),
        requested_tolerance(requested), achieved_tolerance(achieved) {}

  double requested_tolerance;
  double achieved_tolerance;

private:
  static std::string format(double requested, double achieved) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "adaptive Simpson did not converge: requested tol %.3e, achieved ~%.3e",
                  requested, achieved);
    return buf;
  }
};

namespace detail {

template <class F>
double simpson_rec(const F& f, double a, double fa, double b, double fb,
                   double m, double fm, double whole, double tol, int depth,
                   double& err, bool& exhausted) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || depth <= 0) {
    if (std::abs(delta) > 15.0 * tol) exhausted = true;
    err += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, err, exhausted) +
         simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, err, exhausted);
}

}  // namespace detail

/// Adaptive Simpson integral of f over [a,b].
///
/// The absolute tolerance is max(abs_tol, rel_tol * |coarse estimate|); the
/// interval is seeded with 16 uniform panels before adaptive refinement so
/// that very flat integrands (compactly supported bumps) are not accepted
/// prematurely. Throws QuadratureError when the recursion depth is exhausted
/// before the tolerance is met.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-10,
                 double abs_tol = 0.0, int max_depth = 48) {
  if (!(b > a)) return 0.0;
  constexpr int kPanels = 16;
  const double w = (b - a) / kPanels;

  double xs[kPanels + 1];
  double fs[kPanels + 1];
  for (int i = 0; i <= kPanels; ++i) {
    xs[i] = a + w * i;
    fs[i] = f(xs[i]);
  }
  double coarse = 0.0;
  double mids[kPanels];
  double fmids[kPanels];
  double panels[kPanels];
  for (int i = 0; i < kPanels; ++i) {
    mids[i] = 0.5 * (xs[i] + xs[i + 1]);
    fmids[i] = f(mids[i]);
    panels[i] = w / 6.0 * (fs[i] + 4.0 * fmids[i] + fs[i + 1]);
    coarse += panels[i];
  }

  const double tol = std::max(abs_tol, rel_tol * std::max(std::abs(coarse), 1e-300));
  double total = 0.0;
  double err = 0.0;
  bool exhausted = false;
  for (int i = 0; i < kPanels; ++i) {
    total += detail::simpson_rec(f, xs[i], fs[i], xs[i + 1], fs[i + 1], mids[i],
                                 fmids[i], panels[i], tol / kPanels, max_depth,
                                 err, exhausted);
  }
  if (exhausted) throw QuadratureError(tol, err);
  return total;
}

}  // namespace brownflow

#endif  // BROWNFLOW_QUADRATURE_HPP
