#include "core/nelder_mead.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace sbr {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const Vector& lower, const Vector& upper, const NelderMeadOptions& opts) {
  const Index d = x0.size();
  require(d >= 1 && lower.size() == d && upper.size() == d, ErrorKind::Usage, "nelder_mead: bad dimensions");
  require((lower.array() < upper.array()).all(), ErrorKind::Usage, "nelder_mead: lower must be < upper");

  int evals = 0;
  auto clamp = [&](Vector x) {
    for (Index i = 0; i < d; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    return x;
  };
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Vector> pts;
  std::vector<double> vals;
  pts.push_back(clamp(x0));
  vals.push_back(eval(pts[0]));
  for (Index i = 0; i < d; ++i) {
    Vector v = pts[0];
    // Step away from whichever bound is nearer so the simplex is never flat.
    const double step = opts.initial_step;
    v[i] = (v[i] + step <= upper[i]) ? v[i] + step : v[i] - step;
    v = clamp(v);
    pts.push_back(v);
    vals.push_back(eval(v));
  }

  std::vector<std::size_t> order(pts.size());
  bool converged = false;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double xspread = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      xspread = std::max(xspread, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
    const double fspread = vals[worst] - vals[best];
    if (fspread <= opts.ftol && xspread <= opts.xtol) {
      converged = true;
      break;
    }
    if (evals >= opts.max_evals) break;

    Vector centroid = Vector::Zero(d);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(d);

    const Vector xr = clamp(centroid + (centroid - pts[worst]));
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Vector xe = clamp(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Vector xc = outside ? clamp(centroid + 0.5 * (xr - centroid))
                              : clamp(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = clamp(pts[best] + 0.5 * (pts[i] - pts[best]));
      vals[i] = eval(pts[i]);
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (vals[i] < vals[best]) best = i;
  return {pts[best], vals[best], evals, converged};
}

}  // namespace sbr
