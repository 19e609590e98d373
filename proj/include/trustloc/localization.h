#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trustloc/domain.h"

namespace trustloc::localization {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

// Two-way ranging: ToF = (t1 - t2) / 2, distance = ToF * c. t1 is the
// initiator's round-trip period, t2 the responder's turnaround, both in
// seconds. Fails with kNegativeRange when t1 < t2.
Result<double> TofDistance(double t1, double t2);

struct Anchor {
  std::string id;
  Point center;
  double radius = 0.0;
  double trust = 0.0;
};

struct IntersectionResult {
  enum class Kind { kNone, kTangent, kTwo };
  Kind kind = Kind::kNone;
  Point first;   // valid for kTangent and kTwo
  Point second;  // valid for kTwo
};

// Circle-circle intersection via the radical line. Coincident and
// concentric circles yield kNone. Within 1e-9 * max(1, d) of either
// tangency condition the result is kTangent.
IntersectionResult IntersectCircles(const Point& c1, double r1, const Point& c2,
                                    double r2);

// (pt - c)^2 - r^2: zero on the circle, negative inside.
double Residual(const Point& pt, const Point& c, double r);

// Numeric ids compare by value, anything else lexicographically.
bool IdLess(std::string_view a, std::string_view b);

// Top-k devices by trust (ties by ascending id), radii converted from mm.
Result<std::vector<Anchor>> SelectAnchors(std::span<const DeviceRecord> devices,
                                          std::size_t k, double mm_per_unit);

enum class NotComputableReason { kNoIntersection, kResidualTooLarge };

std::string_view ReasonName(NotComputableReason reason);
std::optional<NotComputableReason> ReasonOf(const Error& error);

struct Fix {
  Point position;
  double residual = 0.0;  // against the third anchor; 0 for tangent fixes
};

// Intersects the circles of anchors[0] and anchors[1] and disambiguates
// with anchors[2]. A tangent first pair is accepted without consulting
// the third circle. Errors are kNotComputable (detail = reason name) or
// kInvalidArgument for a wrong anchor count.
Result<Fix> Multilaterate(std::span<const Anchor> anchors, double max_error);

}  // namespace trustloc::localization
