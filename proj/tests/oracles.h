#pragma once

// Brute-force reference implementations. They share no code with the
// library and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

struct P {
  double x, y;
};

// Walks circle 1 at `samples` angles, looks for sign changes of
// |p - c2| - r2 and refines each by bisection. Intervals without a sign
// change but with a local minimum of |f| are searched for a hidden pair
// of roots or a touching point.
inline std::vector<P> CircleCrossings(P c1, double r1, P c2, double r2,
                                      int samples = 4096) {
  std::vector<P> out;
  const double dx = c2.x - c1.x, dy = c2.y - c1.y;
  if (std::hypot(dx, dy) < 1e-12) return out;

  auto at = [&](double t) { return P{c1.x + r1 * std::cos(t), c1.y + r1 * std::sin(t)}; };
  auto f = [&](double t) {
    P p = at(t);
    return std::hypot(p.x - c2.x, p.y - c2.y) - r2;
  };
  auto bisect = [&](double a, double b) {
    double fa = f(a);
    for (int i = 0; i < 200 && b - a > 1e-15; ++i) {
      const double m = 0.5 * (a + b);
      const double fm = f(m);
      if ((fm < 0) == (fa < 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  };
  // Minimises s * f on [a, b] by golden section.
  auto golden = [&](double a, double b, double s) {
    const double g = (std::sqrt(5.0) - 1) / 2;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = s * f(x1), f2 = s * f(x2);
    for (int i = 0; i < 200 && b - a > 1e-15; ++i) {
      if (f1 < f2) {
        b = x2, x2 = x1, f2 = f1;
        x1 = b - g * (b - a), f1 = s * f(x1);
      } else {
        a = x1, x1 = x2, f1 = f2;
        x2 = a + g * (b - a), f2 = s * f(x2);
      }
    }
    return 0.5 * (a + b);
  };

  const double step = 2 * std::numbers::pi / samples;
  std::vector<double> ts(samples + 1), fs(samples + 1);
  for (int i = 0; i <= samples; ++i) {
    ts[i] = i * step;
    fs[i] = f(ts[i]);
  }
  std::vector<double> roots;
  for (int i = 0; i < samples; ++i) {
    if (fs[i] == 0) {
      roots.push_back(ts[i]);
    } else if ((fs[i] < 0) != (fs[i + 1] < 0) && fs[i + 1] != 0) {
      roots.push_back(bisect(ts[i], ts[i + 1]));
    }
  }
  for (int i = 0; i < samples; ++i) {
    const int prev = (i + samples - 1) % samples;
    const double a = std::abs(fs[i]);
    if (a > std::abs(fs[prev]) || a > std::abs(fs[i + 1])) continue;
    if ((fs[prev] < 0) != (fs[i] < 0) || (fs[i] < 0) != (fs[i + 1] < 0)) continue;
    const double s = fs[i] < 0 ? -1.0 : 1.0;
    const double lo = ts[i] - step, hi = ts[i] + step;
    const double tm = golden(lo, hi, s);
    const double fm = s * f(tm);
    if (fm < 0) {
      roots.push_back(bisect(lo, tm));
      roots.push_back(bisect(tm, hi));
    } else if (fm < 1e-9) {
      roots.push_back(tm);
    }
  }
  for (double t : roots) {
    P p = at(t);
    bool dup = false;
    for (const auto& q : out) dup |= std::hypot(p.x - q.x, p.y - q.y) < 1e-6;
    if (!dup) out.push_back(p);
  }
  return out;
}

// Coarse-to-fine grid search for the point minimising `cost`.
inline P GridMin(const std::function<double(P)>& cost, P lo, P hi, int levels = 12,
                 int n = 200) {
  P best{lo.x, lo.y};
  for (int level = 0; level < levels; ++level) {
    double best_cost = INFINITY;
    const double sx = (hi.x - lo.x) / n, sy = (hi.y - lo.y) / n;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        P p{lo.x + i * sx, lo.y + j * sy};
        const double c = cost(p);
        if (c < best_cost) best_cost = c, best = p;
      }
    }
    lo = {best.x - 2 * sx, best.y - 2 * sy};
    hi = {best.x + 2 * sx, best.y + 2 * sy};
  }
  return best;
}

}  // namespace oracle
