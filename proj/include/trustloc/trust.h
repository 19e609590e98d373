#pragma once

#include <span>
#include <string>

#include "trustloc/domain.h"

namespace trustloc::trust {

// A device's observation as seen by the evidence computation: anchor
// position and measured range, both in coordinate units.
struct NeighborView {
  std::string id;
  Point position;
  double dist = 0.0;
  double conf = 0.0;
};

NeighborView ViewOf(const DeviceRecord& d, double mm_per_unit);

// Piecewise map from RSSI (dBm) to confidence.
double Confidence(double rssi_dbm, const ExperimentParams& p);

// True iff the two ranges can describe the same target:
// |r_a - r_b| <= d(a, b) <= r_a + r_b. Boundary equality counts.
bool TriangleSupports(const Point& pos_a, double r_a, const Point& pos_b,
                      double r_b);

// Mean of +conf (supporting neighbor) / -conf (contradicting neighbor).
// No neighbors gives 0.
double Evidence(const NeighborView& own, std::span<const NeighborView> neighbors);

// One reputation step. Rewards clamp at max_rep, penalties clamp at 0.
double UpdateReputation(double rep, double conf, double evi,
                        const ExperimentParams& p);

inline double Trust(double conf, double rep, double evi) {
  return conf * rep * evi;
}

}  // namespace trustloc::trust
