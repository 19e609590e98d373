#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trustloc/contract.h"
#include "trustloc/devicesim.h"
#include "trustloc/domain.h"
#include "trustloc/gateway.h"
#include "trustloc/ledger.h"

namespace trustloc::experiment {

struct CollectionSpec {
  std::string name;
  std::set<Role> readers;
  std::set<Role> writers;
};

struct OrgSpec {
  std::string name;
  std::vector<CollectionSpec> collections;
  std::vector<Identity> identities;  // org filled from the enclosing org
};

struct DeviceSeed {
  DeviceRecord record;     // decrypt_key included
  std::string collection;  // defaults to params.collection_devices
};

struct ExperimentFile {
  ExperimentParams params;
  std::vector<OrgSpec> orgs;
  std::vector<DeviceSeed> devices;
  std::string target_id;
  std::string target_collection;  // defaults to params.collection_target
  std::string gateway_identity;   // defaults to the first Admin of the devices org
  devicesim::SimConfig sim;
};

Result<ExperimentFile> ParseExperiment(const Json& j);
Result<ExperimentFile> LoadExperimentFile(const std::filesystem::path& path);

const Identity* FindIdentity(const ExperimentFile& exp, std::string_view name);
Result<Identity> GatewayIdentity(const ExperimentFile& exp);

// A ledger wired with the experiment's collections and the contract.
struct Session {
  ExperimentFile exp;
  Json raw;  // experiment file as loaded, persisted alongside the state
  std::unique_ptr<ledger::Ledger> ledger;
};

Result<Session> NewSession(const Json& raw, contract::Clock clock = contract::SystemClock);

// Defines collections and creates every device and the target.
Status Initialize(Session& s);

Status SaveState(const Session& s, const std::filesystem::path& dir);
Result<Session> LoadState(const std::filesystem::path& dir,
                          contract::Clock clock = contract::SystemClock);
bool HasState(const std::filesystem::path& dir);

// Directory from TRUSTLOC_STATE_DIR, default ./state.
std::filesystem::path StateDir();

struct RunOutcome {
  std::vector<gateway::CycleReport> reports;
  std::filesystem::path log_path;
  std::filesystem::path feed_path;
};

// Emits the simulated feed into `dir` and drives the gateway over it.
Result<RunOutcome> Run(Session& s, int rounds, const std::filesystem::path& dir,
                       gateway::GatewayOptions options = {});

struct BenchRow {
  std::string op;
  std::string label;
  int iterations = 0;
  double mean_ms = 0.0;
  double sd_ms = 0.0;
  double tps = 0.0;
  int errors = 0;
  std::uint64_t blocks_appended = 0;

  std::string Row() const;
};

Json ToJson(const BenchRow& row);

// Operations whose rows make up the chaincode part of the performance
// report, in report order.
const std::vector<std::string>& ReportOps();
std::string_view BenchLabel(std::string_view op);

// Times `iterations` calls of `op` with fresh inputs per call. Works on
// the session's ledger, which it mutates for write ops; callers that
// must not disturb persisted state pass a scratch session.
Result<BenchRow> Bench(Session& s, std::string_view op, int iterations);

// CLI exit code for an error: 2 privacy, 3 not found / not updated,
// 4 computation, 1 anything else.
int ExitCodeFor(ErrorCode code);

}  // namespace trustloc::experiment
