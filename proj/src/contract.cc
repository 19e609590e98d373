#include "trustloc/contract.h"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "trustloc/localization.h"
#include "trustloc/trust.h"

namespace trustloc::contract {

namespace {

using ledger::Bytes;
using ledger::TxContext;

constexpr std::array<OpPolicy, 11> kPolicies{{
    {kCreateDevice, false, false, CollectionKind::kDevices},
    {kUpdateDeviceConfig, false, false, CollectionKind::kDevices},
    {kCreateTarget, false, false, CollectionKind::kTarget},
    {kUpdateObservation, false, false, CollectionKind::kDevices},
    {kUpdateTrustState, false, false, CollectionKind::kDevices},
    {kDeleteDevice, false, false, CollectionKind::kDevices},
    {kDeleteTarget, false, false, CollectionKind::kTarget},
    {kCalculatePosition, false, false, CollectionKind::kBoth},
    {kReadTarget, true, true, CollectionKind::kTarget},
    {kReadDevice, true, false, CollectionKind::kDevices},
    {kReadAllDeviceIds, true, false, CollectionKind::kDevices},
}};

Bytes JsonBytes(const Json& j) { return crypto::ToBytes(Canonical(j)); }

Status ExpectArgs(const TxContext& ctx, std::size_t n) {
  if (ctx.args().size() != n) {
    return MakeError(ErrorCode::kInvalidArgument,
                     "expected " + std::to_string(n) + " arguments, got " +
                         std::to_string(ctx.args().size()));
  }
  return OkStatus();
}

// Role gate from the policy table, then the collection policies. Runs
// before any data is touched so that callers outside the org always see
// kUnauthorized regardless of what exists.
Status Authorize(const TxContext& ctx, std::string_view op,
                 std::initializer_list<std::pair<std::string_view, bool>>
                     collections) {
  const OpPolicy* policy = FindPolicy(op);
  if (ctx.caller().role == Role::kUser && !policy->user_allowed) {
    return MakeError(ErrorCode::kUnauthorized,
                     ctx.caller().name + " (User) may not call " +
                         std::string(op));
  }
  for (const auto& [coll, write] : collections) {
    if (auto s = ctx.CheckAccess(coll, write); !s) return s;
  }
  return OkStatus();
}

Result<DeviceRecord> LoadDevice(const TxContext& ctx, std::string_view coll,
                                std::string_view id) {
  auto raw = ctx.GetPrivate(coll, id);
  if (!raw) return raw.error();
  if (!raw->has_value()) {
    return MakeError(ErrorCode::kNotFound, "device " + std::string(id));
  }
  auto j = ParseJson(crypto::ToString(**raw));
  if (!j) return j.error();
  return DeviceFromJson(*j);
}

Status StoreDevice(TxContext& ctx, std::string_view coll, const DeviceRecord& d) {
  return ctx.PutPrivate(coll, d.id, JsonBytes(ToJson(d)));
}

Result<TargetRecord> LoadTarget(const TxContext& ctx, std::string_view coll) {
  auto raw = ctx.GetPrivate(coll, kTargetKey);
  if (!raw) return raw.error();
  if (!raw->has_value()) return MakeError(ErrorCode::kNotFound, "target");
  auto j = ParseJson(crypto::ToString(**raw));
  if (!j) return j.error();
  return TargetFromJson(*j);
}

Status StoreTarget(TxContext& ctx, std::string_view coll, const TargetRecord& t) {
  return ctx.PutPrivate(coll, kTargetKey, JsonBytes(ToJson(t)));
}

Result<Json> TransientJson(const TxContext& ctx, const std::string& name) {
  auto it = ctx.transient().find(name);
  if (it == ctx.transient().end()) {
    return MakeError(ErrorCode::kInvalidArgument,
                     "missing transient '" + name + "'");
  }
  return ParseJson(crypto::ToString(it->second));
}

Result<std::uint8_t> TransientKey(const TxContext& ctx) {
  auto it = ctx.transient().find("key");
  if (it == ctx.transient().end() || it->second.size() != 1) {
    return MakeError(ErrorCode::kInvalidArgument,
                     "transient 'key' must be exactly one byte");
  }
  return it->second[0];
}

Status CheckNeighbors(const std::string& id,
                      const std::vector<std::string>& neighbors) {
  if (std::find(neighbors.begin(), neighbors.end(), id) != neighbors.end()) {
    return MakeError(ErrorCode::kSelfNeighbor, "device " + id);
  }
  return OkStatus();
}

Json TransientRecord(const DeviceRecord& seed) {
  Json j = ToJson(seed);
  j.erase("decrypt_key");
  j.erase("id");
  return j;
}

}  // namespace

const std::array<OpPolicy, 11>& PolicyTable() { return kPolicies; }

const OpPolicy* FindPolicy(std::string_view op_name) {
  for (const auto& p : kPolicies) {
    if (p.name == op_name) return &p;
  }
  return nullptr;
}

std::string SystemClock() {
  const auto now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- Client-side call builders ----------------------------------------------

Call CreateDevice(std::string_view collection, const DeviceRecord& seed) {
  return {std::string(kCreateDevice),
          {std::string(collection), seed.id},
          {{"device", JsonBytes(TransientRecord(seed))},
           {"key", Bytes{seed.decrypt_key}}}};
}

Call UpdateDeviceConfig(std::string_view collection, std::string_view id,
                        std::optional<std::uint8_t> key,
                        std::optional<std::vector<std::string>> neighbors) {
  Call call{std::string(kUpdateDeviceConfig),
            {std::string(collection), std::string(id)},
            {}};
  if (key) call.transient["key"] = Bytes{*key};
  if (neighbors) call.transient["neighbors"] = JsonBytes(Json(*neighbors));
  return call;
}

Call CreateTarget(std::string_view collection, std::string_view target_id) {
  return {std::string(kCreateTarget),
          {std::string(collection), std::string(target_id)},
          {}};
}

Call UpdateObservation(std::string_view collection, std::string_view id,
                       double dist_mm, double conf) {
  return {std::string(kUpdateObservation),
          {std::string(collection), std::string(id)},
          {{"observation", JsonBytes(Json{{"dist_mm", dist_mm}, {"conf", conf}})}}};
}

Call UpdateTrustState(std::string_view collection, std::string_view id) {
  return {std::string(kUpdateTrustState),
          {std::string(collection), std::string(id)},
          {}};
}

Call DeleteDevice(std::string_view collection, std::string_view id) {
  return {std::string(kDeleteDevice),
          {std::string(collection), std::string(id)},
          {}};
}

Call DeleteTarget(std::string_view collection) {
  return {std::string(kDeleteTarget), {std::string(collection)}, {}};
}

Call CalculatePosition(std::string_view devices_collection,
                       std::string_view target_collection) {
  return {std::string(kCalculatePosition),
          {std::string(devices_collection), std::string(target_collection)},
          {}};
}

Call ReadTarget(std::string_view collection) {
  return {std::string(kReadTarget), {std::string(collection)}, {}};
}

Call ReadDevice(std::string_view collection, std::string_view id) {
  return {std::string(kReadDevice),
          {std::string(collection), std::string(id)},
          {}};
}

Call ReadAllDeviceIds(std::string_view collection) {
  return {std::string(kReadAllDeviceIds), {std::string(collection)}, {}};
}

Result<Json> Invoke(ledger::Ledger& ledger, const Identity& caller,
                    const Call& call) {
  if (ledger.IsReadOnly(call.op)) return ledger.Query(caller, call.op, call.args);
  return ledger.Submit(caller, call.op, call.args, call.transient);
}

// --- Contract ---------------------------------------------------------------

PositionContract::PositionContract(ExperimentParams params, Clock clock)
    : params_(std::move(params)), clock_(std::move(clock)) {}

bool PositionContract::ConfidenceAccepted(double conf) const {
  return conf >= params_.min_conf && conf <= params_.max_conf;
}

Status PositionContract::Install(ledger::Ledger& ledger) const {
  using Method = Result<Json> (PositionContract::*)(TxContext&) const;
  const std::pair<std::string_view, Method> methods[] = {
      {kCreateDevice, &PositionContract::CreateDeviceOp},
      {kUpdateDeviceConfig, &PositionContract::UpdateDeviceConfigOp},
      {kCreateTarget, &PositionContract::CreateTargetOp},
      {kUpdateObservation, &PositionContract::UpdateObservationOp},
      {kUpdateTrustState, &PositionContract::UpdateTrustStateOp},
      {kDeleteDevice, &PositionContract::DeleteDeviceOp},
      {kDeleteTarget, &PositionContract::DeleteTargetOp},
      {kCalculatePosition, &PositionContract::CalculatePositionOp},
      {kReadTarget, &PositionContract::ReadTargetOp},
      {kReadDevice, &PositionContract::ReadDeviceOp},
      {kReadAllDeviceIds, &PositionContract::ReadAllDeviceIdsOp},
  };
  // The ledger may outlive this object, so handlers hold a copy.
  auto self = std::make_shared<const PositionContract>(*this);
  for (const auto& [name, method] : methods) {
    ledger::OperationDef def;
    def.name = std::string(name);
    def.read_only = FindPolicy(name)->read_only;
    def.handler = [self, method](TxContext& ctx) {
      return ((*self).*method)(ctx);
    };
    if (auto s = ledger.RegisterOperation(std::move(def)); !s) return s;
  }
  return OkStatus();
}

Result<Json> PositionContract::CreateDeviceOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 2); !s) return s.error();
  const auto& coll = ctx.args()[0];
  const auto& id = ctx.args()[1];
  if (auto s = Authorize(ctx, kCreateDevice, {{coll, true}}); !s) return s.error();
  if (id.empty()) return MakeError(ErrorCode::kInvalidArgument, "empty device id");

  auto seed = TransientJson(ctx, "device");
  if (!seed) return seed.error();
  auto key = TransientKey(ctx);
  if (!key) return key.error();

  DeviceRecord d;
  try {
    d.id = id;
    d.decrypt_key = *key;
    d.x = seed->at("x").get<double>();
    d.y = seed->at("y").get<double>();
    d.rep = seed->at("rep").get<double>();
    d.neighbors = seed->value("neighbors", std::vector<std::string>{});
    d.dist = seed->value("dist", 0.0);
    d.conf = seed->value("conf", 0.0);
  } catch (const Json::exception& e) {
    return MakeError(ErrorCode::kInvalidArgument, e.what());
  }
  if (d.rep < 0 || d.rep > params_.max_rep) {
    return MakeError(ErrorCode::kInvalidArgument, "rep outside [0, max_rep]");
  }
  if (d.dist < 0) return MakeError(ErrorCode::kInvalidArgument, "negative dist");
  if (auto s = CheckNeighbors(d.id, d.neighbors); !s) return s.error();

  auto existing = ctx.GetPrivate(coll, id);
  if (!existing) return existing.error();
  if (existing->has_value()) {
    return MakeError(ErrorCode::kDuplicateDevice, "device " + id);
  }
  if (auto s = StoreDevice(ctx, coll, d); !s) return s.error();
  return Json{{"id", d.id}};
}

Result<Json> PositionContract::UpdateDeviceConfigOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 2); !s) return s.error();
  const auto& coll = ctx.args()[0];
  const auto& id = ctx.args()[1];
  if (auto s = Authorize(ctx, kUpdateDeviceConfig, {{coll, true}}); !s) {
    return s.error();
  }
  const bool has_key = ctx.transient().contains("key");
  const bool has_neighbors = ctx.transient().contains("neighbors");
  if (!has_key && !has_neighbors) {
    return MakeError(ErrorCode::kEmptyUpdate, "device " + id);
  }
  auto d = LoadDevice(ctx, coll, id);
  if (!d) return d.error();
  if (has_key) {
    auto key = TransientKey(ctx);
    if (!key) return key.error();
    d->decrypt_key = *key;
  }
  if (has_neighbors) {
    auto j = TransientJson(ctx, "neighbors");
    if (!j) return j.error();
    if (!j->is_array()) {
      return MakeError(ErrorCode::kInvalidArgument, "neighbors must be a list");
    }
    try {
      d->neighbors = j->get<std::vector<std::string>>();
    } catch (const Json::exception& e) {
      return MakeError(ErrorCode::kInvalidArgument, e.what());
    }
    if (auto s = CheckNeighbors(d->id, d->neighbors); !s) return s.error();
  }
  if (auto s = StoreDevice(ctx, coll, *d); !s) return s.error();
  return Json{{"id", d->id}};
}

Result<Json> PositionContract::CreateTargetOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 2); !s) return s.error();
  const auto& coll = ctx.args()[0];
  if (auto s = Authorize(ctx, kCreateTarget, {{coll, true}}); !s) return s.error();
  auto existing = ctx.GetPrivate(coll, kTargetKey);
  if (!existing) return existing.error();
  if (existing->has_value()) return MakeError(ErrorCode::kTargetExists, coll);
  TargetRecord t;
  t.id = ctx.args()[1];
  if (auto s = StoreTarget(ctx, coll, t); !s) return s.error();
  return ToJson(t);
}

Result<Json> PositionContract::UpdateObservationOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 2); !s) return s.error();
  const auto& coll = ctx.args()[0];
  const auto& id = ctx.args()[1];
  if (auto s = Authorize(ctx, kUpdateObservation, {{coll, true}}); !s) {
    return s.error();
  }
  auto obs = TransientJson(ctx, "observation");
  if (!obs) return obs.error();
  double dist_mm = 0;
  double conf = 0;
  try {
    dist_mm = obs->at("dist_mm").get<double>();
    conf = obs->at("conf").get<double>();
  } catch (const Json::exception& e) {
    return MakeError(ErrorCode::kInvalidArgument, e.what());
  }
  if (!ConfidenceAccepted(conf)) {
    return MakeError(ErrorCode::kInvalidConfidence,
                     "device " + id + " conf " + std::to_string(conf));
  }
  if (!(dist_mm >= 0)) {
    return MakeError(ErrorCode::kInvalidArgument, "negative distance");
  }
  auto d = LoadDevice(ctx, coll, id);
  if (!d) return d.error();
  d->dist = dist_mm;
  d->conf = conf;
  if (auto s = StoreDevice(ctx, coll, *d); !s) return s.error();
  return Json{{"id", id}, {"dist", dist_mm}, {"conf", conf}};
}

Result<Json> PositionContract::UpdateTrustStateOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 2); !s) return s.error();
  const auto& coll = ctx.args()[0];
  const auto& id = ctx.args()[1];
  if (auto s = Authorize(ctx, kUpdateTrustState, {{coll, true}}); !s) {
    return s.error();
  }
  auto d = LoadDevice(ctx, coll, id);
  if (!d) return d.error();
  if (!ConfidenceAccepted(d->conf)) {
    return MakeError(ErrorCode::kInvalidConfidence,
                     "device " + id + " has no accepted observation");
  }

  std::vector<trust::NeighborView> views;
  views.reserve(d->neighbors.size());
  for (const auto& nid : d->neighbors) {
    auto n = LoadDevice(ctx, coll, nid);
    if (!n) {
      if (n.code() == ErrorCode::kNotFound) {
        return MakeError(ErrorCode::kNotFound, nid);
      }
      return n.error();
    }
    if (!ConfidenceAccepted(n->conf)) {
      return MakeError(ErrorCode::kInvalidConfidence,
                       "neighbor " + nid + " has no accepted observation");
    }
    views.push_back(trust::ViewOf(*n, params_.mm_per_unit));
  }

  const double evi = trust::Evidence(trust::ViewOf(*d, params_.mm_per_unit), views);
  d->evi = evi;
  d->rep = trust::UpdateReputation(d->rep, d->conf, evi, params_);
  d->trust = trust::Trust(d->conf, d->rep, evi);
  if (auto s = StoreDevice(ctx, coll, *d); !s) return s.error();
  return Json{{"id", id}, {"evi", d->evi}, {"rep", d->rep}, {"trust", d->trust}};
}

Result<Json> PositionContract::DeleteDeviceOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 2); !s) return s.error();
  const auto& coll = ctx.args()[0];
  const auto& id = ctx.args()[1];
  if (auto s = Authorize(ctx, kDeleteDevice, {{coll, true}}); !s) return s.error();
  auto d = LoadDevice(ctx, coll, id);
  if (!d) return d.error();
  if (auto s = ctx.DeletePrivate(coll, id); !s) return s.error();
  return Json{{"id", id}};
}

Result<Json> PositionContract::DeleteTargetOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 1); !s) return s.error();
  const auto& coll = ctx.args()[0];
  if (auto s = Authorize(ctx, kDeleteTarget, {{coll, true}}); !s) return s.error();
  auto t = LoadTarget(ctx, coll);
  if (!t) return t.error();
  if (auto s = ctx.DeletePrivate(coll, kTargetKey); !s) return s.error();
  return Json{{"id", t->id}};
}

Result<Json> PositionContract::CalculatePositionOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 2); !s) return s.error();
  const auto& dev_coll = ctx.args()[0];
  const auto& tgt_coll = ctx.args()[1];
  if (auto s = Authorize(ctx, kCalculatePosition,
                         {{dev_coll, false}, {tgt_coll, true}});
      !s) {
    return s.error();
  }
  auto target = LoadTarget(ctx, tgt_coll);
  if (!target) return target.error();

  auto ids = ctx.Keys(dev_coll);
  if (!ids) return ids.error();
  std::vector<DeviceRecord> eligible;
  for (const auto& id : *ids) {
    auto d = LoadDevice(ctx, dev_coll, id);
    if (!d) return d.error();
    if (ConfidenceAccepted(d->conf)) eligible.push_back(std::move(d).value());
  }

  // A failed computation withdraws any previously published position.
  auto fail = [&](Error error) -> Result<Json> {
    if (target->updated) {
      target->updated = false;
      if (auto s = StoreTarget(ctx, tgt_coll, *target); !s) return s.error();
      ctx.CommitOnError();
    }
    return error;
  };

  auto anchors = localization::SelectAnchors(eligible, 3, params_.mm_per_unit);
  if (!anchors) return fail(anchors.error());
  auto fix = localization::Multilaterate(*anchors, params_.max_error_pos);
  if (!fix) return fail(fix.error());

  target->x = fix->position.x;
  target->y = fix->position.y;
  target->timestamp = clock_();
  target->updated = true;
  if (auto s = StoreTarget(ctx, tgt_coll, *target); !s) return s.error();

  Json anchor_ids = Json::array();
  for (const auto& a : *anchors) anchor_ids.push_back(a.id);
  return Json{{"target", ToJson(*target)},
              {"residual", fix->residual},
              {"anchors", std::move(anchor_ids)}};
}

Result<Json> PositionContract::ReadTargetOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 1); !s) return s.error();
  const auto& coll = ctx.args()[0];
  if (auto s = Authorize(ctx, kReadTarget, {{coll, false}}); !s) return s.error();
  auto t = LoadTarget(ctx, coll);
  if (!t) return t.error();
  if (ctx.caller().role == Role::kUser && !t->updated) {
    return MakeError(ErrorCode::kNotUpdated, "target " + t->id);
  }
  return ToJson(*t);
}

Result<Json> PositionContract::ReadDeviceOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 2); !s) return s.error();
  const auto& coll = ctx.args()[0];
  if (auto s = Authorize(ctx, kReadDevice, {{coll, false}}); !s) return s.error();
  auto d = LoadDevice(ctx, coll, ctx.args()[1]);
  if (!d) return d.error();
  return ToJson(*d);
}

Result<Json> PositionContract::ReadAllDeviceIdsOp(TxContext& ctx) const {
  if (auto s = ExpectArgs(ctx, 1); !s) return s.error();
  const auto& coll = ctx.args()[0];
  if (auto s = Authorize(ctx, kReadAllDeviceIds, {{coll, false}}); !s) {
    return s.error();
  }
  auto ids = ctx.Keys(coll);
  if (!ids) return ids.error();
  std::sort(ids->begin(), ids->end(),
            [](const std::string& a, const std::string& b) {
              return localization::IdLess(a, b);
            });
  return Json(*ids);
}

}  // namespace trustloc::contract
