#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "trustloc/domain.h"
#include "trustloc/ledger.h"

namespace trustloc::contract {

inline constexpr std::string_view kCreateDevice = "CreateDevice";
inline constexpr std::string_view kUpdateDeviceConfig = "UpdateDeviceConfig";
inline constexpr std::string_view kCreateTarget = "CreateTarget";
inline constexpr std::string_view kUpdateObservation = "UpdateObservation";
inline constexpr std::string_view kUpdateTrustState = "UpdateTrustState";
inline constexpr std::string_view kDeleteDevice = "DeleteDevice";
inline constexpr std::string_view kDeleteTarget = "DeleteTarget";
inline constexpr std::string_view kCalculatePosition = "CalculatePosition";
inline constexpr std::string_view kReadTarget = "ReadTarget";
inline constexpr std::string_view kReadDevice = "ReadDevice";
inline constexpr std::string_view kReadAllDeviceIds = "ReadAllDeviceIds";

// Key of the single target inside a target collection.
inline constexpr std::string_view kTargetKey = "target";

enum class CollectionKind { kDevices, kTarget, kBoth };

struct OpPolicy {
  std::string_view name;
  bool read_only;
  bool user_allowed;  // Admin is always allowed
  CollectionKind kind;
};

const std::array<OpPolicy, 11>& PolicyTable();
const OpPolicy* FindPolicy(std::string_view op_name);

// Clock returning an RFC 3339 UTC timestamp.
using Clock = std::function<std::string()>;
std::string SystemClock();

// A ready-to-send contract invocation. Record contents and keys are
// carried in the transient map so they never reach a block; public
// arguments are limited to collection names and ids.
struct Call {
  std::string op;
  std::vector<std::string> args;
  ledger::Transient transient;
};

// `seed` supplies id, position, neighbors, initial rep and (optionally)
// a pre-loaded observation. Its decrypt_key travels as transient "key".
Call CreateDevice(std::string_view collection, const DeviceRecord& seed);
Call UpdateDeviceConfig(std::string_view collection, std::string_view id,
                        std::optional<std::uint8_t> key,
                        std::optional<std::vector<std::string>> neighbors);
Call CreateTarget(std::string_view collection, std::string_view target_id);
Call UpdateObservation(std::string_view collection, std::string_view id,
                       double dist_mm, double conf);
Call UpdateTrustState(std::string_view collection, std::string_view id);
Call DeleteDevice(std::string_view collection, std::string_view id);
Call DeleteTarget(std::string_view collection);
Call CalculatePosition(std::string_view devices_collection,
                       std::string_view target_collection);
Call ReadTarget(std::string_view collection);
Call ReadDevice(std::string_view collection, std::string_view id);
Call ReadAllDeviceIds(std::string_view collection);

// Sends read-only calls through Query and everything else through Submit.
Result<Json> Invoke(ledger::Ledger& ledger, const Identity& caller,
                    const Call& call);

// The position contract: eleven operations over a devices collection and
// a single-target collection, with the trust and geometry math delegated
// to the trust and localization modules.
class PositionContract {
 public:
  explicit PositionContract(ExperimentParams params, Clock clock = SystemClock);

  // Registers every operation with the ledger.
  Status Install(ledger::Ledger& ledger) const;

 private:
  Result<Json> CreateDeviceOp(ledger::TxContext& ctx) const;
  Result<Json> UpdateDeviceConfigOp(ledger::TxContext& ctx) const;
  Result<Json> CreateTargetOp(ledger::TxContext& ctx) const;
  Result<Json> UpdateObservationOp(ledger::TxContext& ctx) const;
  Result<Json> UpdateTrustStateOp(ledger::TxContext& ctx) const;
  Result<Json> DeleteDeviceOp(ledger::TxContext& ctx) const;
  Result<Json> DeleteTargetOp(ledger::TxContext& ctx) const;
  Result<Json> CalculatePositionOp(ledger::TxContext& ctx) const;
  Result<Json> ReadTargetOp(ledger::TxContext& ctx) const;
  Result<Json> ReadDeviceOp(ledger::TxContext& ctx) const;
  Result<Json> ReadAllDeviceIdsOp(ledger::TxContext& ctx) const;

  bool ConfidenceAccepted(double conf) const;

  ExperimentParams params_;
  Clock clock_;
};

}  // namespace trustloc::contract
