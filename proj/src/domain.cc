#include "trustloc/domain.h"

#include <cmath>

namespace trustloc {

std::string_view ErrorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidDevice: return "InvalidDevice";
    case ErrorCode::kAuthenticityFailure: return "AuthenticityFailure";
    case ErrorCode::kIntegrityFailure: return "IntegrityFailure";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnauthorized: return "Unauthorized";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kDuplicateCollection: return "DuplicateCollection";
    case ErrorCode::kDuplicateDevice: return "DuplicateDevice";
    case ErrorCode::kTargetExists: return "TargetExists";
    case ErrorCode::kEmptyUpdate: return "EmptyUpdate";
    case ErrorCode::kSelfNeighbor: return "SelfNeighbor";
    case ErrorCode::kInvalidConfidence: return "InvalidConfidence";
    case ErrorCode::kNotUpdated: return "NotUpdated";
    case ErrorCode::kInsufficientAnchors: return "InsufficientAnchors";
    case ErrorCode::kNotComputable: return "NotComputable";
    case ErrorCode::kUnknownOperation: return "UnknownOperation";
    case ErrorCode::kUnknownDevice: return "UnknownDevice";
    case ErrorCode::kUnknownAnchor: return "UnknownAnchor";
    case ErrorCode::kNegativeRange: return "NegativeRange";
    case ErrorCode::kChainBroken: return "ChainBroken";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

std::string Error::ToString() const {
  std::string out(ErrorName(code));
  if (!detail.empty()) {
    out += ": ";
    out += detail;
  }
  return out;
}

std::string Canonical(const Json& j) { return j.dump(); }

double Distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::string_view RoleName(Role role) {
  return role == Role::kAdmin ? "Admin" : "User";
}

Result<Role> ParseRole(std::string_view name) {
  if (name == "Admin") return Role::kAdmin;
  if (name == "User") return Role::kUser;
  return MakeError(ErrorCode::kParseError,
                   "unknown role '" + std::string(name) + "'");
}

std::vector<std::string> ValidateParams(const ExperimentParams& p) {
  std::vector<std::string> errors;
  if (!(p.min_conf < p.thresh_conf)) errors.emplace_back("min_conf < thresh_conf violated");
  if (!(p.thresh_conf <= p.max_conf)) errors.emplace_back("thresh_conf ≤ max_conf violated");
  if (!(p.prl < p.prh)) errors.emplace_back("prl < prh violated");
  if (!(p.rssi_inf < p.rssi_up)) errors.emplace_back("rssi_inf < rssi_up violated");
  if (!(p.max_rep > 0)) errors.emplace_back("max_rep > 0 violated");
  if (!(p.batch_size >= 1)) errors.emplace_back("batch_size ≥ 1 violated");
  if (!(p.max_error_pos >= 0)) errors.emplace_back("max_error_pos ≥ 0 violated");
  if (!(p.time_read_obs_ms >= 0)) errors.emplace_back("time_read_obs ≥ 0 violated");
  if (!(p.mm_per_unit > 0)) errors.emplace_back("mm_per_unit > 0 violated");
  if (p.collection_devices.empty()) errors.emplace_back("collection_devices non-empty violated");
  if (p.collection_target.empty()) errors.emplace_back("collection_target non-empty violated");
  return errors;
}

Json ToJson(const DeviceRecord& d) {
  return Json{{"id", d.id},     {"decrypt_key", d.decrypt_key},
              {"x", d.x},       {"y", d.y},
              {"dist", d.dist}, {"conf", d.conf},
              {"evi", d.evi},   {"rep", d.rep},
              {"trust", d.trust}, {"neighbors", d.neighbors}};
}

Json ToJson(const TargetRecord& t) {
  return Json{{"id", t.id},
              {"x", t.x},
              {"y", t.y},
              {"timestamp", t.timestamp},
              {"updated", t.updated}};
}

Json ToJson(const Observation& o) {
  return Json{{"device_id", o.device_id},
              {"target_id", o.target_id},
              {"distance_mm", o.distance_mm},
              {"confidence", o.confidence}};
}

Json ToJson(const Identity& id) {
  return Json{{"name", id.name}, {"org", id.org}, {"role", RoleName(id.role)}};
}

Json ToJson(const ExperimentParams& p) {
  return Json{{"max_conf", p.max_conf},
              {"min_conf", p.min_conf},
              {"prh", p.prh},
              {"prl", p.prl},
              {"thresh_conf", p.thresh_conf},
              {"thresh_ev", p.thresh_ev},
              {"max_error_pos", p.max_error_pos},
              {"max_rep", p.max_rep},
              {"batch_size", p.batch_size},
              {"time_read_obs_ms", p.time_read_obs_ms},
              {"rssi_up", p.rssi_up},
              {"rssi_inf", p.rssi_inf},
              {"collection_devices", p.collection_devices},
              {"collection_target", p.collection_target},
              {"mm_per_unit", p.mm_per_unit}};
}

namespace {

// Runs a decode body, turning nlohmann type/key errors into kParseError.
template <typename T, typename F>
Result<T> Decode(std::string_view what, F&& body) {
  try {
    return body();
  } catch (const Json::exception& e) {
    return MakeError(ErrorCode::kParseError,
                     std::string(what) + ": " + e.what());
  }
}

}  // namespace

Result<DeviceRecord> DeviceFromJson(const Json& j) {
  return Decode<DeviceRecord>("device", [&]() -> Result<DeviceRecord> {
    DeviceRecord d;
    d.id = j.at("id").get<std::string>();
    d.decrypt_key = j.at("decrypt_key").get<std::uint8_t>();
    d.x = j.at("x").get<double>();
    d.y = j.at("y").get<double>();
    d.dist = j.at("dist").get<double>();
    d.conf = j.at("conf").get<double>();
    d.evi = j.at("evi").get<double>();
    d.rep = j.at("rep").get<double>();
    d.trust = j.at("trust").get<double>();
    d.neighbors = j.at("neighbors").get<std::vector<std::string>>();
    return d;
  });
}

Result<TargetRecord> TargetFromJson(const Json& j) {
  return Decode<TargetRecord>("target", [&]() -> Result<TargetRecord> {
    TargetRecord t;
    t.id = j.at("id").get<std::string>();
    t.x = j.at("x").get<double>();
    t.y = j.at("y").get<double>();
    t.timestamp = j.at("timestamp").get<std::string>();
    t.updated = j.at("updated").get<bool>();
    return t;
  });
}

Result<Observation> ObservationFromJson(const Json& j) {
  return Decode<Observation>("observation", [&]() -> Result<Observation> {
    Observation o;
    o.device_id = j.at("device_id").get<std::string>();
    o.target_id = j.at("target_id").get<std::string>();
    o.distance_mm = j.at("distance_mm").get<std::int64_t>();
    o.confidence = j.at("confidence").get<double>();
    if (o.distance_mm < 0) {
      return MakeError(ErrorCode::kParseError, "negative distance_mm");
    }
    return o;
  });
}

Result<Identity> IdentityFromJson(const Json& j) {
  return Decode<Identity>("identity", [&]() -> Result<Identity> {
    Identity id;
    id.name = j.at("name").get<std::string>();
    id.org = j.at("org").get<std::string>();
    auto role = ParseRole(j.at("role").get<std::string>());
    if (!role) return role.error();
    id.role = *role;
    return id;
  });
}

Result<ExperimentParams> ParamsFromJson(const Json& j) {
  return Decode<ExperimentParams>("params", [&]() -> Result<ExperimentParams> {
    ExperimentParams p;
    if (!j.is_object()) {
      return MakeError(ErrorCode::kParseError, "params must be an object");
    }
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    read("max_conf", p.max_conf);
    read("min_conf", p.min_conf);
    read("prh", p.prh);
    read("prl", p.prl);
    read("thresh_conf", p.thresh_conf);
    read("thresh_ev", p.thresh_ev);
    read("max_error_pos", p.max_error_pos);
    read("max_rep", p.max_rep);
    read("batch_size", p.batch_size);
    read("time_read_obs_ms", p.time_read_obs_ms);
    read("rssi_up", p.rssi_up);
    read("rssi_inf", p.rssi_inf);
    read("collection_devices", p.collection_devices);
    read("collection_target", p.collection_target);
    read("mm_per_unit", p.mm_per_unit);
    return p;
  });
}

Result<Json> ParseJson(std::string_view text) {
  Json j = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    return MakeError(ErrorCode::kParseError, "malformed JSON");
  }
  return j;
}

}  // namespace trustloc
