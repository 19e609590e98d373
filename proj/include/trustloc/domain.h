#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trustloc/status.h"

namespace trustloc {

using Json = nlohmann::json;

// Canonical record encoding: sorted keys, no whitespace, shortest
// round-trip numbers. All digests over records are taken over this form.
std::string Canonical(const Json& j);

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

double Distance(const Point& a, const Point& b);

enum class Role { kAdmin, kUser };

std::string_view RoleName(Role role);
Result<Role> ParseRole(std::string_view name);

struct Identity {
  std::string name;
  std::string org;
  Role role = Role::kUser;

  friend bool operator==(const Identity&, const Identity&) = default;
};

// Anchor device as stored in a devices collection. `dist` is the last
// averaged observation in millimeters; x/y are coordinate units (meters).
struct DeviceRecord {
  std::string id;
  std::uint8_t decrypt_key = 0;
  double x = 0.0;
  double y = 0.0;
  double dist = 0.0;
  double conf = 0.0;
  double evi = 0.0;
  double rep = 0.0;
  double trust = 0.0;
  std::vector<std::string> neighbors;

  Point position() const { return {x, y}; }

  friend bool operator==(const DeviceRecord&, const DeviceRecord&) = default;
};

struct TargetRecord {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::string timestamp;  // RFC 3339 UTC, empty until the first update
  bool updated = false;

  friend bool operator==(const TargetRecord&, const TargetRecord&) = default;
};

struct Observation {
  std::string device_id;
  std::string target_id;
  std::int64_t distance_mm = 0;
  double confidence = 0.0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ExperimentParams {
  double max_conf = 1.0;
  double min_conf = 0.4;
  double prh = 2.0;
  double prl = 1.0;
  double thresh_conf = 0.7;
  double thresh_ev = 0.0;
  double max_error_pos = 0.01;  // coordinate units squared
  double max_rep = 20.0;
  int batch_size = 6;
  int time_read_obs_ms = 100;
  double rssi_up = -50.0;
  double rssi_inf = -74.0;
  std::string collection_devices = "DeviceAdmin1PrivateCollection";
  std::string collection_target = "TargetOrg1PrivateCollection";
  double mm_per_unit = 1000.0;

  friend bool operator==(const ExperimentParams&,
                         const ExperimentParams&) = default;
};

// Returns the names of all violated parameter invariants; empty means valid.
std::vector<std::string> ValidateParams(const ExperimentParams& p);

Json ToJson(const DeviceRecord& d);
Json ToJson(const TargetRecord& t);
Json ToJson(const Observation& o);
Json ToJson(const Identity& id);
Json ToJson(const ExperimentParams& p);

Result<DeviceRecord> DeviceFromJson(const Json& j);
Result<TargetRecord> TargetFromJson(const Json& j);
Result<Observation> ObservationFromJson(const Json& j);
Result<Identity> IdentityFromJson(const Json& j);
// Missing keys fall back to the defaults above.
Result<ExperimentParams> ParamsFromJson(const Json& j);

// Parses canonical bytes; a decode failure is reported as kParseError.
Result<Json> ParseJson(std::string_view text);

}  // namespace trustloc
