// trustloc: operator CLI for the trust-managed localization ledger.
//
//   trustloc init <file>
//   trustloc run <file> --rounds N
//   trustloc read <identity> target
//   trustloc read <identity> device <id>
//   trustloc bench <file> <OpName|all> --iters N
//   trustloc verify
//
// State lives in $TRUSTLOC_STATE_DIR (default ./state).

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "trustloc/experiment.h"

namespace {

namespace ex = trustloc::experiment;
using trustloc::Canonical;
using trustloc::Error;
using trustloc::Json;

int Fail(const Error& e) {
  std::cerr << e.ToString() << "\n";
  return ex::ExitCodeFor(e.code);
}

trustloc::Result<Json> ReadJsonFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return trustloc::MakeError(trustloc::ErrorCode::kIoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return trustloc::ParseJson(ss.str());
}

trustloc::Result<ex::Session> FreshSession(const std::string& file) {
  auto raw = ReadJsonFile(file);
  if (!raw) return raw.error();
  auto s = ex::NewSession(*raw);
  if (!s) return s.error();
  if (auto st = ex::Initialize(*s); !st) return st.error();
  return s;
}

// Reuses persisted state when it belongs to the same experiment file.
trustloc::Result<ex::Session> StateOrFresh(const std::string& file) {
  const auto dir = ex::StateDir();
  if (ex::HasState(dir)) {
    auto raw = ReadJsonFile(file);
    if (!raw) return raw.error();
    auto s = ex::LoadState(dir);
    if (!s) return s.error();
    if (Canonical(s->raw) == Canonical(*raw)) return s;
  }
  return FreshSession(file);
}

Json Summary(const ex::Session& s) {
  return Json{{"height", s.ledger->Height()},
              {"world_state_digest", s.ledger->WorldStateDigest()}};
}

int CmdInit(const std::string& file) {
  auto s = FreshSession(file);
  if (!s) return Fail(s.error());
  if (auto st = ex::SaveState(*s, ex::StateDir()); !st) return Fail(st.error());
  std::cout << Canonical(Summary(*s)) << "\n";
  return 0;
}

int CmdRun(const std::string& file, int rounds) {
  auto s = StateOrFresh(file);
  if (!s) return Fail(s.error());
  auto out = ex::Run(*s, rounds, ex::StateDir());
  if (!out) return Fail(out.error());
  if (auto st = ex::SaveState(*s, ex::StateDir()); !st) return Fail(st.error());
  for (const auto& r : out->reports) {
    std::cout << Canonical(trustloc::gateway::ToJson(r)) << "\n";
  }
  std::cout << Canonical(Summary(*s)) << "\n";
  return 0;
}

int CmdRead(const std::string& who, const std::string& what, const std::string& id) {
  auto s = ex::LoadState(ex::StateDir());
  if (!s) return Fail(s.error());
  const auto* identity = ex::FindIdentity(s->exp, who);
  if (!identity) {
    return Fail(trustloc::MakeError(trustloc::ErrorCode::kNotFound, "identity " + who));
  }
  trustloc::contract::Call call;
  if (what == "target") {
    call = trustloc::contract::ReadTarget(s->exp.target_collection);
  } else if (what == "device" && !id.empty()) {
    call = trustloc::contract::ReadDevice(s->exp.params.collection_devices, id);
  } else {
    return Fail(trustloc::MakeError(trustloc::ErrorCode::kInvalidArgument,
                                    "expected 'target' or 'device <id>'"));
  }
  auto r = trustloc::contract::Invoke(*s->ledger, *identity, call);
  if (!r) return Fail(r.error());
  std::cout << Canonical(*r) << "\n";
  return 0;
}

int CmdBench(const std::string& file, const std::string& op, int iters) {
  std::vector<std::string> ops;
  if (op == "all") {
    ops = ex::ReportOps();
  } else {
    ops.push_back(op);
  }
  for (const auto& o : ops) {
    // Each op runs on its own scratch session; persisted state is never saved.
    auto s = StateOrFresh(file);
    if (!s) return Fail(s.error());
    auto row = ex::Bench(*s, o, iters);
    if (!row) return Fail(row.error());
    std::cout << Canonical(ex::ToJson(*row)) << "\n";
  }
  return 0;
}

int CmdVerify() {
  const auto dir = ex::StateDir();
  auto s = ex::LoadState(dir);
  if (!s) return Fail(s.error());
  if (auto st = s->ledger->VerifyChain(); !st) return Fail(st.error());
  std::cout << Canonical(Json{{"chain", "ok"},
                              {"height", s->ledger->Height()},
                              {"world_state_digest", s->ledger->WorldStateDigest()}})
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust-managed IoT localization on a simulated permissioned ledger"};
  app.require_subcommand(1);

  std::string file;
  int rounds = 0;
  int iters = 0;
  std::string who, what, id, op;

  auto* init = app.add_subcommand("init", "Create collections, devices and target");
  init->add_option("file", file, "Experiment file")->required();

  auto* run = app.add_subcommand("run", "Simulate ranging and drive the gateway");
  run->add_option("file", file, "Experiment file")->required();
  run->add_option("--rounds", rounds, "Ranging rounds per anchor (default: batch size)");

  auto* read = app.add_subcommand("read", "Read the target or a device as an identity");
  read->add_option("identity", who)->required();
  read->add_option("what", what, "target | device")->required();
  read->add_option("id", id, "Device id");

  auto* bench = app.add_subcommand("bench", "Time contract operations");
  bench->add_option("file", file, "Experiment file")->required();
  bench->add_option("op", op, "Operation name, or 'all' for the report rows")->required();
  bench->add_option("--iters", iters, "Iterations")->required();

  auto* verify = app.add_subcommand("verify", "Check block log integrity");

  CLI11_PARSE(app, argc, argv);

  if (*init) return CmdInit(file);
  if (*run) {
    if (rounds == 0) {
      auto exp = ex::LoadExperimentFile(file);
      if (!exp) return Fail(exp.error());
      rounds = exp->params.batch_size;
    }
    return CmdRun(file, rounds);
  }
  if (*read) return CmdRead(who, what, id);
  if (*bench) return CmdBench(file, op, iters);
  if (*verify) return CmdVerify();
  return 1;
}
