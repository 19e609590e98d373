#pragma once

#include <memory>
#include <string>
#include <vector>

#include "trustloc/contract.h"
#include "trustloc/ledger.h"

namespace fixtures {

using namespace trustloc;

inline const std::string kDevices = "DeviceAdmin1PrivateCollection";
inline const std::string kTarget = "TargetOrg1PrivateCollection";
inline const std::string kDevices2 = "DeviceAdmin2PrivateCollection";
inline const std::string kTarget2 = "TargetOrg2PrivateCollection";

inline const Identity kAdmin1{"admin1", "Org1", Role::kAdmin};
inline const Identity kUser1{"user1", "Org1", Role::kUser};
inline const Identity kAdmin2{"admin2", "Org2", Role::kAdmin};
inline const Identity kUser2{"user2", "Org2", Role::kUser};

inline std::string FixedClock() { return "2024-01-01T00:00:00Z"; }

// Testbed devices: id, position, neighbors, key 'P', conf, dist (mm), rep 5.
inline DeviceRecord Testbed(const std::string& id) {
  DeviceRecord d;
  d.id = id;
  d.decrypt_key = 'P';
  d.rep = 5;
  d.conf = 1;
  if (id == "1") {
    d.x = 3, d.y = 2, d.dist = 4242, d.neighbors = {"2", "3"};
  } else if (id == "2") {
    d.x = 10, d.y = 4, d.dist = 4123, d.neighbors = {"1", "3"};
  } else if (id == "3") {
    d.x = 5, d.y = 8, d.dist = 3162, d.neighbors = {"2", "1"};
  } else if (id == "4") {
    d.x = 1, d.y = 1, d.dist = 4242, d.conf = 8, d.neighbors = {"1"};
  } else if (id == "5") {
    d.x = 3, d.y = 2, d.dist = 2, d.neighbors = {"3", "2"};
  }
  return d;
}

// A ledger with both orgs' collections and the contract installed.
inline std::unique_ptr<ledger::Ledger> MakeLedger(
    const ExperimentParams& params = {}) {
  auto l = std::make_unique<ledger::Ledger>();
  const std::set<Role> admin{Role::kAdmin};
  const std::set<Role> both{Role::kAdmin, Role::kUser};
  (void)l->DefineCollection({kDevices, "Org1", admin, admin});
  (void)l->DefineCollection({kTarget, "Org1", both, admin});
  (void)l->DefineCollection({kDevices2, "Org2", admin, admin});
  (void)l->DefineCollection({kTarget2, "Org2", both, admin});
  (void)contract::PositionContract(params, FixedClock).Install(*l);
  return l;
}

inline Result<Json> Do(ledger::Ledger& l, const Identity& who,
                       const contract::Call& call) {
  return contract::Invoke(l, who, call);
}

// Creates the target and the given testbed devices as admin1.
inline void Seed(ledger::Ledger& l, const std::vector<DeviceRecord>& devices,
                 bool with_target = true) {
  if (with_target) (void)Do(l, kAdmin1, contract::CreateTarget(kTarget, "7"));
  for (const auto& d : devices) (void)Do(l, kAdmin1, contract::CreateDevice(kDevices, d));
}

inline std::vector<DeviceRecord> TestbedSet(const std::vector<std::string>& ids) {
  std::vector<DeviceRecord> out;
  for (const auto& id : ids) out.push_back(Testbed(id));
  return out;
}

inline DeviceRecord ReadDevice(ledger::Ledger& l, const std::string& id) {
  auto j = l.Query(kAdmin1, contract::kReadDevice, {kDevices, id});
  return *DeviceFromJson(*j);
}

inline TargetRecord ReadTarget(ledger::Ledger& l) {
  auto j = l.Query(kAdmin1, contract::kReadTarget, {kTarget});
  return *TargetFromJson(*j);
}

}  // namespace fixtures
