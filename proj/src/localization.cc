#include "trustloc/localization.h"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace trustloc::localization {

Result<double> TofDistance(double t1, double t2) {
  if (t1 < t2) {
    return MakeError(ErrorCode::kNegativeRange, "t1 < t2");
  }
  const double tof = (t1 - t2) / 2.0;
  return tof * kSpeedOfLight;
}

IntersectionResult IntersectCircles(const Point& c1, double r1, const Point& c2,
                                    double r2) {
  using Kind = IntersectionResult::Kind;
  const double dx = c2.x - c1.x;
  const double dy = c2.y - c1.y;
  const double d = std::hypot(dx, dy);
  if (d == 0.0) return {};

  const double tol = 1e-9 * std::max(1.0, d);
  const double ux = dx / d;
  const double uy = dy / d;

  if (std::abs(d - (r1 + r2)) <= tol) {
    return {Kind::kTangent, {c1.x + r1 * ux, c1.y + r1 * uy}, {}};
  }
  if (std::abs(d - std::abs(r1 - r2)) <= tol) {
    // Internal tangency: the touching point lies on the far side of the
    // smaller circle as seen from the larger one's center.
    const double s = r1 >= r2 ? r1 : -r1;
    return {Kind::kTangent, {c1.x + s * ux, c1.y + s * uy}, {}};
  }
  if (d > r1 + r2 || d < std::abs(r1 - r2)) return {};

  const double a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
  const double h2 = r1 * r1 - a * a;
  const Point mid{c1.x + a * ux, c1.y + a * uy};
  if (h2 <= 0.0) return {Kind::kTangent, mid, {}};
  const double h = std::sqrt(h2);
  return {Kind::kTwo,
          {mid.x - h * uy, mid.y + h * ux},
          {mid.x + h * uy, mid.y - h * ux}};
}

double Residual(const Point& pt, const Point& c, double r) {
  const double dx = pt.x - c.x;
  const double dy = pt.y - c.y;
  return dx * dx + dy * dy - r * r;
}

namespace {

std::optional<long long> AsInteger(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

bool IdLess(std::string_view a, std::string_view b) {
  auto ia = AsInteger(a);
  auto ib = AsInteger(b);
  if (ia && ib && *ia != *ib) return *ia < *ib;
  if (ia.has_value() != ib.has_value()) return ia.has_value();
  return a < b;
}

Result<std::vector<Anchor>> SelectAnchors(std::span<const DeviceRecord> devices,
                                          std::size_t k, double mm_per_unit) {
  if (devices.size() < k) {
    return MakeError(ErrorCode::kInsufficientAnchors,
                     std::to_string(devices.size()) + " devices, need " +
                         std::to_string(k));
  }
  std::vector<const DeviceRecord*> ranked;
  ranked.reserve(devices.size());
  for (const auto& d : devices) ranked.push_back(&d);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const DeviceRecord* a, const DeviceRecord* b) {
                     if (a->trust != b->trust) return a->trust > b->trust;
                     return IdLess(a->id, b->id);
                   });
  std::vector<Anchor> anchors;
  anchors.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& d = *ranked[i];
    anchors.push_back({d.id, d.position(), d.dist / mm_per_unit, d.trust});
  }
  return anchors;
}

std::string_view ReasonName(NotComputableReason reason) {
  return reason == NotComputableReason::kNoIntersection ? "NoIntersection"
                                                        : "ResidualTooLarge";
}

std::optional<NotComputableReason> ReasonOf(const Error& error) {
  if (error.code != ErrorCode::kNotComputable) return std::nullopt;
  if (error.detail.starts_with("NoIntersection")) {
    return NotComputableReason::kNoIntersection;
  }
  if (error.detail.starts_with("ResidualTooLarge")) {
    return NotComputableReason::kResidualTooLarge;
  }
  return std::nullopt;
}

Result<Fix> Multilaterate(std::span<const Anchor> anchors, double max_error) {
  if (anchors.size() != 3) {
    return MakeError(ErrorCode::kInvalidArgument, "need exactly 3 anchors");
  }
  const auto& a = anchors[0];
  const auto& b = anchors[1];
  const auto& c = anchors[2];
  const auto hit = IntersectCircles(a.center, a.radius, b.center, b.radius);
  switch (hit.kind) {
    case IntersectionResult::Kind::kNone:
      return MakeError(ErrorCode::kNotComputable,
                       std::string(ReasonName(
                           NotComputableReason::kNoIntersection)) +
                           " between anchors " + a.id + " and " + b.id);
    case IntersectionResult::Kind::kTangent:
      return Fix{hit.first, 0.0};
    case IntersectionResult::Kind::kTwo:
      break;
  }

  const double r1 = Residual(hit.first, c.center, c.radius);
  const double r2 = Residual(hit.second, c.center, c.radius);
  bool take_first;
  if (std::abs(r1) != std::abs(r2)) {
    take_first = std::abs(r1) < std::abs(r2);
  } else if (hit.first.y != hit.second.y) {
    take_first = hit.first.y < hit.second.y;
  } else {
    take_first = hit.first.x < hit.second.x;
  }
  const Point best = take_first ? hit.first : hit.second;
  const double residual = take_first ? r1 : r2;
  if (std::abs(residual) > max_error) {
    return MakeError(ErrorCode::kNotComputable,
                     std::string(ReasonName(
                         NotComputableReason::kResidualTooLarge)) +
                         ": |" + std::to_string(residual) + "| against anchor " +
                         c.id);
  }
  return Fix{best, residual};
}

}  // namespace trustloc::localization
