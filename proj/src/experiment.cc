#include "trustloc/experiment.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "trustloc/localization.h"

namespace trustloc::experiment {

namespace fs = std::filesystem;

namespace {

Result<std::set<Role>> RolesFromJson(const Json& j) {
  std::set<Role> roles;
  for (const auto& r : j) {
    auto role = ParseRole(r.get<std::string>());
    if (!role) return role.error();
    roles.insert(*role);
  }
  return roles;
}

std::uint8_t KeyFromJson(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.size() != 1) {
      throw Json::type_error::create(302, "key must be one character", &j);
    }
    return static_cast<std::uint8_t>(s[0]);
  }
  return j.get<std::uint8_t>();
}

Result<std::string> ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return MakeError(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Status WriteFile(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(content.data(), static_cast<std::streamsize>(content.size()))) {
    return MakeError(ErrorCode::kIoError, "cannot write " + path.string());
  }
  return OkStatus();
}

const std::string* OrgOfCollection(const ExperimentFile& exp, std::string_view coll) {
  for (const auto& org : exp.orgs) {
    for (const auto& c : org.collections) {
      if (c.name == coll) return &org.name;
    }
  }
  return nullptr;
}

}  // namespace

Result<ExperimentFile> ParseExperiment(const Json& j) {
  ExperimentFile exp;
  try {
    auto params = ParamsFromJson(j.value("params", Json::object()));
    if (!params) return params.error();
    exp.params = *params;
    if (auto errors = ValidateParams(exp.params); !errors.empty()) {
      std::string all;
      for (const auto& e : errors) all += (all.empty() ? "" : "; ") + e;
      return MakeError(ErrorCode::kInvalidArgument, all);
    }

    for (const auto& oj : j.at("orgs")) {
      OrgSpec org;
      org.name = oj.at("name").get<std::string>();
      for (const auto& cj : oj.at("collections")) {
        CollectionSpec c;
        c.name = cj.at("name").get<std::string>();
        auto readers = RolesFromJson(cj.at("readers"));
        if (!readers) return readers.error();
        c.readers = *readers;
        auto writers = RolesFromJson(cj.value("writers", Json::array({"Admin"})));
        if (!writers) return writers.error();
        c.writers = *writers;
        org.collections.push_back(std::move(c));
      }
      for (const auto& ij : oj.value("identities", Json::array())) {
        Identity id;
        id.name = ij.at("name").get<std::string>();
        id.org = org.name;
        auto role = ParseRole(ij.at("role").get<std::string>());
        if (!role) return role.error();
        id.role = *role;
        org.identities.push_back(std::move(id));
      }
      exp.orgs.push_back(std::move(org));
    }

    std::set<std::string> seen;
    for (const auto& dj : j.value("devices", Json::array())) {
      DeviceSeed seed;
      auto& d = seed.record;
      d.id = dj.at("id").get<std::string>();
      if (!seen.insert(d.id).second) {
        return MakeError(ErrorCode::kDuplicateDevice, "device " + d.id + " listed twice");
      }
      d.x = dj.at("x").get<double>();
      d.y = dj.at("y").get<double>();
      d.neighbors = dj.value("neighbors", std::vector<std::string>{});
      d.decrypt_key = KeyFromJson(dj.at("key"));
      d.conf = dj.value("conf", 0.0);
      d.dist = dj.value("dist", 0.0);
      d.rep = dj.value("rep", 0.0);
      seed.collection = dj.value("collection", exp.params.collection_devices);
      const auto* org = OrgOfCollection(exp, seed.collection);
      if (!org) {
        return MakeError(ErrorCode::kNotFound,
                         "device " + d.id + ": collection " + seed.collection);
      }
      if (dj.contains("org") && dj.at("org").get<std::string>() != *org) {
        return MakeError(ErrorCode::kInvalidArgument,
                         "device " + d.id + " org does not own " + seed.collection);
      }
      exp.devices.push_back(std::move(seed));
    }

    const auto& tj = j.at("target");
    exp.target_id = tj.at("id").get<std::string>();
    exp.target_collection = tj.value("collection", exp.params.collection_target);
    exp.gateway_identity = j.value("gateway", std::string());
    if (j.contains("sim")) {
      auto sim = devicesim::SimConfigFromJson(j.at("sim"));
      if (!sim) return sim.error();
      exp.sim = *sim;
    }
  } catch (const Json::exception& e) {
    return MakeError(ErrorCode::kParseError, std::string("experiment: ") + e.what());
  }
  return exp;
}

Result<ExperimentFile> LoadExperimentFile(const fs::path& path) {
  auto text = ReadFile(path);
  if (!text) return text.error();
  auto j = ParseJson(*text);
  if (!j) return j.error();
  return ParseExperiment(*j);
}

const Identity* FindIdentity(const ExperimentFile& exp, std::string_view name) {
  for (const auto& org : exp.orgs) {
    for (const auto& id : org.identities) {
      if (id.name == name) return &id;
    }
  }
  return nullptr;
}

Result<Identity> GatewayIdentity(const ExperimentFile& exp) {
  if (!exp.gateway_identity.empty()) {
    const auto* id = FindIdentity(exp, exp.gateway_identity);
    if (!id) return MakeError(ErrorCode::kNotFound, "identity " + exp.gateway_identity);
    return *id;
  }
  const auto* org = OrgOfCollection(exp, exp.params.collection_devices);
  if (org) {
    for (const auto& o : exp.orgs) {
      if (o.name != *org) continue;
      for (const auto& id : o.identities) {
        if (id.role == Role::kAdmin) return id;
      }
    }
  }
  return MakeError(ErrorCode::kNotFound, "no admin for " + exp.params.collection_devices);
}

Result<Session> NewSession(const Json& raw, contract::Clock clock) {
  auto exp = ParseExperiment(raw);
  if (!exp) return exp.error();
  Session s{std::move(exp).value(), raw, std::make_unique<ledger::Ledger>()};
  for (const auto& org : s.exp.orgs) {
    for (const auto& c : org.collections) {
      auto st = s.ledger->DefineCollection({c.name, org.name, c.readers, c.writers});
      if (!st) return st.error();
    }
  }
  contract::PositionContract contract(s.exp.params, std::move(clock));
  if (auto st = contract.Install(*s.ledger); !st) return st.error();
  return s;
}

Status Initialize(Session& s) {
  auto admin_of = [&](std::string_view coll) -> Result<Identity> {
    const auto* org = OrgOfCollection(s.exp, coll);
    if (org) {
      for (const auto& o : s.exp.orgs) {
        if (o.name != *org) continue;
        for (const auto& id : o.identities) {
          if (id.role == Role::kAdmin) return id;
        }
      }
    }
    return MakeError(ErrorCode::kNotFound, "no admin for " + std::string(coll));
  };

  for (const auto& seed : s.exp.devices) {
    auto admin = admin_of(seed.collection);
    if (!admin) return admin.error();
    auto call = contract::CreateDevice(seed.collection, seed.record);
    auto r = contract::Invoke(*s.ledger, *admin, call);
    if (!r) {
      return MakeError(r.code(), "device " + seed.record.id + ": " + r.error().detail);
    }
  }
  auto admin = admin_of(s.exp.target_collection);
  if (!admin) return admin.error();
  auto r = contract::Invoke(*s.ledger, *admin,
                            contract::CreateTarget(s.exp.target_collection, s.exp.target_id));
  if (!r) return MakeError(r.code(), "target " + s.exp.target_id + ": " + r.error().detail);
  return OkStatus();
}

fs::path StateDir() {
  if (const char* dir = std::getenv("TRUSTLOC_STATE_DIR"); dir && *dir) return dir;
  return "state";
}

bool HasState(const fs::path& dir) {
  return fs::exists(dir / "experiment.json") && fs::exists(dir / "blocks.log") &&
         fs::exists(dir / "snapshot.json");
}

Status SaveState(const Session& s, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return MakeError(ErrorCode::kIoError, ec.message());
  if (auto st = WriteFile(dir / "experiment.json", Canonical(s.raw) + "\n"); !st) return st;
  if (auto st = WriteFile(dir / "blocks.log", s.ledger->SerializeBlockLog()); !st) return st;
  return WriteFile(dir / "snapshot.json", Canonical(s.ledger->Snapshot()) + "\n");
}

Result<Session> LoadState(const fs::path& dir, contract::Clock clock) {
  auto raw_text = ReadFile(dir / "experiment.json");
  if (!raw_text) return raw_text.error();
  auto raw = ParseJson(*raw_text);
  if (!raw) return raw.error();
  auto s = NewSession(*raw, std::move(clock));
  if (!s) return s.error();
  auto log = ReadFile(dir / "blocks.log");
  if (!log) return log.error();
  auto snap_text = ReadFile(dir / "snapshot.json");
  if (!snap_text) return snap_text.error();
  auto snap = ParseJson(*snap_text);
  if (!snap) return snap.error();
  if (auto st = s->ledger->Restore(*log, *snap); !st) return st.error();
  return s;
}

Result<RunOutcome> Run(Session& s, int rounds, const fs::path& dir,
                       gateway::GatewayOptions options) {
  if (rounds < 1) return MakeError(ErrorCode::kInvalidArgument, "rounds must be ≥ 1");
  auto feed = devicesim::EmitFeed(s.exp.sim, rounds, s.exp.params);
  if (!feed) return feed.error();
  std::error_code ec;
  fs::create_directories(dir, ec);
  RunOutcome out;
  out.log_path = dir / "ranging.log";
  out.feed_path = dir / "feed.jsonl";
  if (auto st = devicesim::WriteFeed(*feed, out.log_path, out.feed_path); !st) {
    return st.error();
  }

  auto admin = GatewayIdentity(s.exp);
  if (!admin) return admin.error();
  std::vector<std::string> ids;
  for (const auto& a : s.exp.sim.anchors) ids.push_back(a.id);
  gateway::Gateway gw(*s.ledger, *admin, s.exp.params, std::move(ids), std::move(options));
  gateway::FileFeed source(out.feed_path);
  if (!source.ok()) return MakeError(ErrorCode::kIoError, "cannot open " + out.feed_path.string());
  out.reports = gw.PollLoop(source);
  return out;
}

// --- Bench -------------------------------------------------------------------

const std::vector<std::string>& ReportOps() {
  static const std::vector<std::string> ops = {
      std::string(contract::kReadTarget),
      std::string(contract::kReadDevice),
      std::string(contract::kUpdateDeviceConfig),
      std::string(contract::kUpdateObservation),
      std::string(contract::kUpdateTrustState),
      std::string(contract::kCalculatePosition),
  };
  return ops;
}

std::string_view BenchLabel(std::string_view op) {
  static const std::map<std::string_view, std::string_view> labels = {
      {contract::kReadTarget, "read target"},
      {contract::kReadDevice, "read device"},
      {contract::kUpdateDeviceConfig, "update device"},
      {contract::kUpdateObservation, "add observation"},
      {contract::kUpdateTrustState, "update evidence, reputation and trust"},
      {contract::kCalculatePosition, "compute position"},
      {contract::kCreateDevice, "create device"},
      {contract::kCreateTarget, "create target"},
      {contract::kDeleteDevice, "delete device"},
      {contract::kDeleteTarget, "delete target"},
      {contract::kReadAllDeviceIds, "read all device ids"},
  };
  auto it = labels.find(op);
  return it == labels.end() ? std::string_view{} : it->second;
}

std::string BenchRow::Row() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s: %.4f±%.4f ms / %.1f tps", label.c_str(),
                mean_ms, sd_ms, tps);
  return buf;
}

Json ToJson(const BenchRow& r) {
  return Json{{"op", r.op},
              {"label", r.label},
              {"iterations", r.iterations},
              {"mean_ms", r.mean_ms},
              {"sd_ms", r.sd_ms},
              {"tps", r.tps},
              {"errors", r.errors},
              {"blocks_appended", r.blocks_appended},
              {"row", r.Row()}};
}

namespace {

struct BenchPlan {
  std::function<void(int)> prepare;  // untimed
  std::function<contract::Call(int)> call;
};

}  // namespace

Result<BenchRow> Bench(Session& s, std::string_view op, int iterations) {
  if (contract::FindPolicy(op) == nullptr) {
    return MakeError(ErrorCode::kUnknownOperation, std::string(op));
  }
  if (iterations < 1) {
    return MakeError(ErrorCode::kInvalidArgument, "iterations must be ≥ 1");
  }
  auto admin = GatewayIdentity(s.exp);
  if (!admin) return admin.error();
  auto& ledger = *s.ledger;
  const auto& devs = s.exp.params.collection_devices;
  const auto& tgt = s.exp.target_collection;
  auto invoke = [&](const contract::Call& c) { return contract::Invoke(ledger, *admin, c); };

  // Bring the scratch state to a point where every op can succeed: a
  // target exists, accepted devices carry trust and a position is set.
  if (!invoke(contract::ReadTarget(tgt))) {
    (void)invoke(contract::CreateTarget(tgt, s.exp.target_id));
  }
  auto ids_json = invoke(contract::ReadAllDeviceIds(devs));
  if (!ids_json) return ids_json.error();
  std::vector<DeviceRecord> accepted;
  for (const auto& id : ids_json->get<std::vector<std::string>>()) {
    auto rec = invoke(contract::ReadDevice(devs, id));
    if (!rec) continue;
    auto d = DeviceFromJson(*rec);
    if (d && d->conf >= s.exp.params.min_conf && d->conf <= s.exp.params.max_conf) {
      accepted.push_back(*d);
    }
  }
  if (accepted.empty()) {
    return MakeError(ErrorCode::kInsufficientAnchors, "no device with an accepted observation");
  }
  for (const auto& d : accepted) (void)invoke(contract::UpdateTrustState(devs, d.id));
  (void)invoke(contract::CalculatePosition(devs, tgt));

  auto device_at = [&](int i) -> const DeviceRecord& {
    return accepted[static_cast<std::size_t>(i) % accepted.size()];
  };
  auto bench_id = [](int i) { return "bench-" + std::to_string(i); };

  BenchPlan plan;
  if (op == contract::kReadTarget) {
    plan.call = [&](int) { return contract::ReadTarget(tgt); };
  } else if (op == contract::kReadDevice) {
    plan.call = [&](int i) { return contract::ReadDevice(devs, device_at(i).id); };
  } else if (op == contract::kReadAllDeviceIds) {
    plan.call = [&](int) { return contract::ReadAllDeviceIds(devs); };
  } else if (op == contract::kUpdateDeviceConfig) {
    plan.call = [&](int i) {
      return contract::UpdateDeviceConfig(devs, device_at(i).id,
                                          static_cast<std::uint8_t>('A' + i % 26),
                                          std::nullopt);
    };
  } else if (op == contract::kUpdateObservation) {
    plan.call = [&](int i) {
      const auto& d = device_at(i);
      return contract::UpdateObservation(devs, d.id, d.dist + (i % 3) - 1, d.conf);
    };
  } else if (op == contract::kUpdateTrustState) {
    plan.call = [&](int i) { return contract::UpdateTrustState(devs, device_at(i).id); };
  } else if (op == contract::kCalculatePosition) {
    plan.call = [&](int) { return contract::CalculatePosition(devs, tgt); };
  } else if (op == contract::kCreateDevice) {
    plan.call = [&](int i) {
      DeviceRecord d;
      d.id = bench_id(i);
      d.decrypt_key = 'P';
      d.x = i;
      d.y = -i;
      return contract::CreateDevice(devs, d);
    };
  } else if (op == contract::kDeleteDevice) {
    plan.prepare = [&](int i) {
      DeviceRecord d;
      d.id = bench_id(i);
      d.decrypt_key = 'P';
      (void)invoke(contract::CreateDevice(devs, d));
    };
    plan.call = [&](int i) { return contract::DeleteDevice(devs, bench_id(i)); };
  } else if (op == contract::kCreateTarget) {
    plan.prepare = [&](int) { (void)invoke(contract::DeleteTarget(tgt)); };
    plan.call = [&](int i) { return contract::CreateTarget(tgt, s.exp.target_id + "-" + std::to_string(i)); };
  } else {  // DeleteTarget
    plan.prepare = [&](int i) {
      (void)invoke(contract::CreateTarget(tgt, s.exp.target_id + "-" + std::to_string(i)));
    };
    plan.call = [&](int) { return contract::DeleteTarget(tgt); };
  }

  using Clock = std::chrono::steady_clock;
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(iterations));
  BenchRow row;
  row.op = std::string(op);
  row.label = std::string(BenchLabel(op));
  row.iterations = iterations;
  const auto height_before = ledger.Height();
  std::uint64_t prepared_blocks = 0;
  for (int i = 0; i < iterations; ++i) {
    if (plan.prepare) {
      const auto h = ledger.Height();
      plan.prepare(i);
      prepared_blocks += ledger.Height() - h;
    }
    const auto call = plan.call(i);
    const auto t0 = Clock::now();
    const auto r = invoke(call);
    samples.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    if (!r) ++row.errors;
  }
  row.blocks_appended = ledger.Height() - height_before - prepared_blocks;

  double total = 0.0;
  for (double v : samples) total += v;
  row.mean_ms = total / iterations;
  double var = 0.0;
  for (double v : samples) var += (v - row.mean_ms) * (v - row.mean_ms);
  row.sd_ms = iterations > 1 ? std::sqrt(var / (iterations - 1)) : 0.0;
  row.tps = total > 0 ? iterations / (total / 1000.0) : 0.0;
  return row;
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnauthorized:
      return 2;
    case ErrorCode::kNotFound:
    case ErrorCode::kNotUpdated:
      return 3;
    case ErrorCode::kNotComputable:
    case ErrorCode::kInsufficientAnchors:
    case ErrorCode::kNegativeRange:
      return 4;
    default:
      return 1;
  }
}

}  // namespace trustloc::experiment
