#include "trustloc/trust.h"

#include <algorithm>
#include <cmath>

namespace trustloc::trust {

NeighborView ViewOf(const DeviceRecord& d, double mm_per_unit) {
  return NeighborView{d.id, d.position(), d.dist / mm_per_unit, d.conf};
}

double Confidence(double rssi_dbm, const ExperimentParams& p) {
  if (rssi_dbm > p.rssi_up) return p.max_conf;
  if (rssi_dbm < p.rssi_inf) return p.min_conf;
  return 9.0 / 4.0 + rssi_dbm / 40.0;
}

bool TriangleSupports(const Point& pos_a, double r_a, const Point& pos_b,
                      double r_b) {
  const double d = Distance(pos_a, pos_b);
  return std::abs(r_a - r_b) <= d && d <= r_a + r_b;
}

double Evidence(const NeighborView& own,
                std::span<const NeighborView> neighbors) {
  if (neighbors.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& n : neighbors) {
    sum += TriangleSupports(own.position, own.dist, n.position, n.dist)
               ? n.conf
               : -n.conf;
  }
  return sum / static_cast<double>(neighbors.size());
}

double UpdateReputation(double rep, double conf, double evi,
                        const ExperimentParams& p) {
  const bool high_conf = conf >= p.thresh_conf;
  const bool supported = evi >= p.thresh_ev;
  if (supported) {
    rep += high_conf ? p.prh : p.prl;
  } else {
    rep -= (high_conf ? p.prh : p.prl) + 1.0;
  }
  return std::clamp(rep, 0.0, p.max_rep);
}

}  // namespace trustloc::trust
