// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "fixtures.h"
#include "oracles.h"
#include "trustloc/devicesim.h"
#include "trustloc/experiment.h"
#include "trustloc/gateway.h"
#include "trustloc/localization.h"

using namespace trustloc;
using namespace fixtures;
namespace c = trustloc::contract;
namespace ex = trustloc::experiment;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string why;

  void Expect(bool cond, const std::string& what) {
    if (!cond && pass) {
      pass = false;
      why = what;
    }
  }
};

// Every ledger built by a scenario, for the chain checks in criterion 9.
std::vector<std::unique_ptr<ledger::Ledger>> g_ledgers;

ledger::Ledger& Keep(std::unique_ptr<ledger::Ledger> l) {
  g_ledgers.push_back(std::move(l));
  return *g_ledgers.back();
}

bool Near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string Fmt(const char* fmt, double a, double b = 0) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), fmt, a, b);
  return buf;
}

Outcome GoodDevices() {
  Outcome o;
  auto& l = Keep(MakeLedger());
  Seed(l, TestbedSet({"1", "2", "3"}));
  for (const auto& id : {"1", "2", "3"}) {
    o.Expect(Do(l, kAdmin1, c::UpdateTrustState(kDevices, id)).ok(),
             std::string("UpdateTrustState failed for ") + id);
    auto d = ReadDevice(l, id);
    o.Expect(d.evi == 1 && d.rep == 7,
             std::string("device ") + id + Fmt(": evi %g rep %g", d.evi, d.rep));
  }
  return o;
}

Outcome FaultyDevice() {
  Outcome o;
  auto& l = Keep(MakeLedger());
  Seed(l, TestbedSet({"2", "3", "5"}));
  o.Expect(Do(l, kAdmin1, c::UpdateTrustState(kDevices, "5")).ok(),
           "UpdateTrustState failed for 5");
  auto d = ReadDevice(l, "5");
  o.Expect(d.evi == -1 && d.rep == 2, Fmt("device 5: evi %g rep %g", d.evi, d.rep));
  return o;
}

Outcome TestbedPosition() {
  Outcome o;
  auto& l = Keep(MakeLedger());
  Seed(l, TestbedSet({"1", "2", "3"}));
  for (const auto& id : {"1", "2", "3"}) (void)Do(l, kAdmin1, c::UpdateTrustState(kDevices, id));
  auto r = Do(l, kAdmin1, c::CalculatePosition(kDevices, kTarget));
  if (!r) {
    o.Expect(false, r.error().ToString());
    return o;
  }
  const double x = (*r)["target"]["x"], y = (*r)["target"]["y"];
  const double res = (*r)["residual"];
  o.Expect(Near(x, 6, 1e-2) && Near(y, 5, 1e-2), Fmt("position (%.6f, %.6f)", x, y));
  o.Expect(std::abs(res) <= 0.01, Fmt("residual %.6f", res));

  auto xs = oracle::CircleCrossings({3, 2}, 4.242, {10, 4}, 4.123);
  o.Expect(xs.size() == 2, "oracle found no crossing pair");
  if (xs.size() == 2) {
    auto r3 = [](oracle::P p) {
      return std::abs((p.x - 5) * (p.x - 5) + (p.y - 8) * (p.y - 8) - 3.162 * 3.162);
    };
    auto best = r3(xs[0]) < r3(xs[1]) ? xs[0] : xs[1];
    o.Expect(Near(x, best.x, 1e-6) && Near(y, best.y, 1e-6),
             Fmt("oracle disagrees: (%.6f, %.6f)", best.x, best.y));
  }
  o.Expect(ReadTarget(l).updated, "target not marked updated");
  return o;
}

Outcome FaultyPosition() {
  Outcome o;
  auto& top3 = Keep(MakeLedger());
  Seed(top3, TestbedSet({"1", "2", "5"}));
  auto r = Do(top3, kAdmin1, c::CalculatePosition(kDevices, kTarget));
  o.Expect(!r.ok() && r.code() == ErrorCode::kNotComputable,
           "top-3 with device 5 was computable");
  o.Expect(!ReadTarget(top3).updated, "target updated after failure");

  auto& four = Keep(MakeLedger());
  Seed(four, TestbedSet({"1", "2", "3", "5"}));
  for (const auto& id : {"1", "2", "3", "5"}) {
    (void)Do(four, kAdmin1, c::UpdateTrustState(kDevices, id));
  }
  auto ok = Do(four, kAdmin1, c::CalculatePosition(kDevices, kTarget));
  if (!ok) {
    o.Expect(false, "4-device set: " + ok.error().ToString());
    return o;
  }
  const double x = (*ok)["target"]["x"], y = (*ok)["target"]["y"];
  o.Expect(Near(x, 6, 1e-2) && Near(y, 5, 1e-2), Fmt("4-device position (%.6f, %.6f)", x, y));
  return o;
}

Outcome ObservationValidation() {
  Outcome o;
  auto& l = Keep(MakeLedger());
  Seed(l, TestbedSet({"1", "4"}));
  const auto h = l.Height();
  const auto digest = l.WorldStateDigest();
  const auto before = ReadDevice(l, "4");
  auto r = Do(l, kAdmin1, c::UpdateObservation(kDevices, "4", 4242, 8));
  o.Expect(!r.ok() && r.code() == ErrorCode::kInvalidConfidence,
           r.ok() ? "accepted" : r.error().ToString());
  o.Expect(l.Height() == h && l.WorldStateDigest() == digest, "state changed");
  o.Expect(ReadDevice(l, "4") == before, "record changed");
  return o;
}

std::unique_ptr<ledger::Ledger> Positioned() {
  auto l = MakeLedger();
  Seed(*l, TestbedSet({"1", "2", "3"}));
  for (const auto& id : {"1", "2", "3"}) (void)Do(*l, kAdmin1, c::UpdateTrustState(kDevices, id));
  (void)Do(*l, kAdmin1, c::CalculatePosition(kDevices, kTarget));
  return l;
}

Outcome PrivacyMatrix() {
  Outcome o;
  auto six = Testbed("3");
  six.id = "6";
  auto no_target = [] {
    auto l = Positioned();
    (void)Do(*l, kAdmin1, c::DeleteTarget(kTarget));
    return l;
  };
  const std::vector<std::pair<std::function<std::unique_ptr<ledger::Ledger>()>, c::Call>>
      cases{
          {Positioned, c::CreateDevice(kDevices, six)},
          {Positioned, c::UpdateDeviceConfig(kDevices, "1", 'Q', std::nullopt)},
          {no_target, c::CreateTarget(kTarget, "7")},
          {Positioned, c::UpdateObservation(kDevices, "1", 4242, 1)},
          {Positioned, c::UpdateTrustState(kDevices, "1")},
          {Positioned, c::DeleteDevice(kDevices, "3")},
          {Positioned, c::DeleteTarget(kTarget)},
          {Positioned, c::CalculatePosition(kDevices, kTarget)},
          {Positioned, c::ReadTarget(kTarget)},
          {Positioned, c::ReadDevice(kDevices, "1")},
          {Positioned, c::ReadAllDeviceIds(kDevices)},
      };
  int passed = 0;
  for (const auto& [setup, call] : cases) {
    const auto* policy = c::FindPolicy(call.op);
    for (const auto* who : {&kAdmin1, &kUser1, &kAdmin2, &kUser2}) {
      auto& l = Keep(setup());
      const auto digest = l.WorldStateDigest();
      const auto h = l.Height();
      const bool allowed =
          who->org == "Org1" && (who->role == Role::kAdmin || policy->user_allowed);
      auto r = Do(l, *who, call);
      bool ok;
      if (allowed) {
        ok = r.ok() && l.Height() == h + (policy->read_only ? 0 : 1);
      } else {
        ok = !r.ok() && r.code() == ErrorCode::kUnauthorized && l.Height() == h &&
             l.WorldStateDigest() == digest;
      }
      o.Expect(ok, call.op + " as " + who->name);
      passed += ok;
    }
  }
  o.Expect(passed == 44, std::to_string(passed) + "/44 cases");
  if (o.pass) o.why = "44/44 cases";
  return o;
}

Outcome Staleness() {
  Outcome o;
  auto& l = Keep(MakeLedger());
  Seed(l, TestbedSet({"1", "2", "3"}));
  auto before = Do(l, kUser1, c::ReadTarget(kTarget));
  o.Expect(!before.ok() && before.code() == ErrorCode::kNotUpdated,
           "read before update did not report NotUpdated");
  for (const auto& id : {"1", "2", "3"}) (void)Do(l, kAdmin1, c::UpdateTrustState(kDevices, id));
  o.Expect(Do(l, kAdmin1, c::CalculatePosition(kDevices, kTarget)).ok(),
           "CalculatePosition failed");
  auto after = Do(l, kUser1, c::ReadTarget(kTarget));
  o.Expect(after.ok() && (*after)["updated"] == true, "read after update failed");
  return o;
}

Outcome CryptoProperties() {
  Outcome o;
  std::mt19937_64 rng(2024);
  const int n = 1000;
  int xor_ok = 0, round_ok = 0, tamper_ok = 0;
  for (int i = 0; i < n; ++i) {
    crypto::Bytes data(rng() % 80);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng());
    const auto key = static_cast<std::uint8_t>(rng());
    auto once = crypto::XorTransform(data, key);
    bool skip = true;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto want = k + 1 == data.size() ? data[k] : data[k] ^ key;
      skip &= once[k] == want;
    }
    xor_ok += skip && crypto::XorTransform(once, key) == data;

    const std::string line = "OBS " + std::to_string(rng() % 100) + " 7 " +
                             std::to_string(rng() % 20000) + " 0.9\n";
    const std::string id = std::to_string(rng() % 100);
    auto env = crypto::Seal(line, id, key);
    auto back = crypto::Open(*env, key, id);
    round_ok += back.ok() && *back == line;

    auto p = *env;
    p.payload[rng() % p.payload.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    auto d = *env;
    d.digest[rng() % 32] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    tamper_ok += !crypto::Open(p, key, id).ok() && !crypto::Open(d, key, id).ok();
  }
  o.Expect(xor_ok == n, std::to_string(xor_ok) + "/1000 xor cases");
  o.Expect(round_ok == n, std::to_string(round_ok) + "/1000 round trips");
  o.Expect(tamper_ok == n, std::to_string(tamper_ok) + "/1000 tamper cases");
  if (o.pass) o.why = "3 x 1000 cases";
  return o;
}

Outcome LedgerProperties() {
  Outcome o;
  std::size_t flips = 0;
  for (std::size_t i = 0; i < g_ledgers.size(); ++i) {
    auto& l = *g_ledgers[i];
    o.Expect(l.VerifyChain().ok(), "chain " + std::to_string(i) + " does not verify");
    const auto log = l.SerializeBlockLog();
    auto ws = ledger::ReplayBlockLog(log);
    o.Expect(ws.ok() && ledger::DigestOf(*ws) == l.WorldStateDigest(),
             "replay digest differs for ledger " + std::to_string(i));

    for (const auto& [coll, entries] : l.Snapshot()["private"].items()) {
      for (const auto& [key, hex] : entries.items()) {
        const auto v = crypto::ToString(*crypto::HexDecode(hex.get<std::string>()));
        for (std::size_t k = 0; k + 8 <= v.size(); ++k) {
          o.Expect(log.find(v.substr(k, 8)) == std::string::npos,
                   "plaintext of " + coll + "/" + key + " in block log");
        }
      }
    }
  }

  // Every byte of every block of the longest chain.
  auto longest = std::max_element(
      g_ledgers.begin(), g_ledgers.end(),
      [](const auto& a, const auto& b) { return a->Height() < b->Height(); });
  const auto log = (*longest)->SerializeBlockLog();
  std::uint64_t height = 0;
  for (std::size_t pos = 0; pos < log.size(); ++pos) {
    if (log[pos] == '\n') {
      ++height;
      continue;
    }
    auto bad = log;
    bad[pos] = static_cast<char>(bad[pos] ^ 0x01);
    auto st = ledger::VerifyBlockLog(bad);
    ++flips;
    o.Expect(!st.ok() && ledger::BrokenHeight(st.error()) == height,
             "flip at byte " + std::to_string(pos) + " not caught at height " +
                 std::to_string(height));
  }
  if (o.pass) {
    o.why = std::to_string(g_ledgers.size()) + " chains, " + std::to_string(flips) +
            " byte flips";
  }
  return o;
}

Outcome GeometryOracle() {
  Outcome o;
  using Kind = localization::IntersectionResult::Kind;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> cu(-10, 10), ru(0.1, 10);
  int agree = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Point c1{cu(rng), cu(rng)}, c2{cu(rng), cu(rng)};
    const double r1 = ru(rng), r2 = ru(rng);
    auto got = localization::IntersectCircles(c1, r1, c2, r2);
    auto want = oracle::CircleCrossings({c1.x, c1.y}, r1, {c2.x, c2.y}, r2);
    bool ok = static_cast<std::size_t>(got.kind) == want.size();
    if (ok) {
      std::vector<Point> pts;
      if (got.kind != Kind::kNone) pts.push_back(got.first);
      if (got.kind == Kind::kTwo) pts.push_back(got.second);
      for (const auto& w : want) {
        bool m = false;
        for (const auto& p : pts) m |= Near(p.x, w.x, 1e-6) && Near(p.y, w.y, 1e-6);
        ok &= m;
      }
    }
    agree += ok;
  }
  o.Expect(agree == n, std::to_string(agree) + "/10000 pairs agree");
  if (o.pass) o.why = "10000/10000 pairs";
  return o;
}

Json LoadExperiment(const std::string& name) {
  std::ifstream in(fs::path(TRUSTLOC_EXPERIMENTS_DIR) / name);
  return Json::parse(in);
}

Outcome GatewayPhases() {
  Outcome o;
  const auto raw = LoadExperiment("testbed.json");
  const auto dir = fs::temp_directory_path() / "trustloc_acceptance";
  std::string reference;
  std::vector<std::string> perm{"1", "2", "3"};
  int runs = 0;
  do {
    auto s = ex::NewSession(raw, FixedClock);
    if (!s || !ex::Initialize(*s)) {
      o.Expect(false, "init failed");
      return o;
    }
    const auto start = s->ledger->Height();
    gateway::GatewayOptions opts;
    opts.reorder = [perm](std::vector<std::string>& order) { order = perm; };
    opts.sleep = [](std::chrono::milliseconds) {};
    auto out = ex::Run(*s, 12, dir, opts);
    if (!out) {
      o.Expect(false, out.error().ToString());
      return o;
    }
    o.Expect(out->reports.size() == 2 && out->reports.back().position.has_value(),
             "expected two positioned cycles");

    // Phase numbers along the block log must never step backwards within
    // a cycle, and each cycle must run 1 -> 2 -> 3.
    std::vector<int> phases;
    const auto blocks = s->ledger->Blocks();
    for (std::size_t h = start + 1; h < blocks.size(); ++h) {
      const auto& op = blocks[h].txs.at(0).op_name;
      phases.push_back(op == c::kUpdateObservation ? 1 : op == c::kUpdateTrustState ? 2 : 3);
    }
    const std::vector<int> cycle{1, 1, 1, 2, 2, 2, 3};
    std::vector<int> want = cycle;
    want.insert(want.end(), cycle.begin(), cycle.end());
    o.Expect(phases == want, "phase order broken in the block log");
    o.Expect(s->ledger->VerifyChain().ok(), "chain does not verify");

    const auto digest = s->ledger->WorldStateDigest();
    if (reference.empty()) reference = digest;
    o.Expect(digest == reference, "world state depends on submission order");
    g_ledgers.push_back(std::move(s->ledger));
    ++runs;
  } while (std::next_permutation(perm.begin(), perm.end()));
  fs::remove_all(dir);
  if (o.pass) o.why = std::to_string(runs) + " orderings, identical world state";
  return o;
}

Outcome BenchShape() {
  Outcome o;
  const auto raw = LoadExperiment("testbed.json");
  const std::vector<std::string> labels{
      "read target",          "read device",
      "update device",        "add observation",
      "update evidence, reputation and trust", "compute position"};
  const auto& ops = ex::ReportOps();
  o.Expect(ops.size() == 6, "report does not have six rows");
  for (std::size_t i = 0; i < ops.size() && i < labels.size(); ++i) {
    auto s = ex::NewSession(raw, FixedClock);
    (void)ex::Initialize(*s);
    auto row = ex::Bench(*s, ops[i], 50);
    if (!row) {
      o.Expect(false, ops[i] + ": " + row.error().ToString());
      continue;
    }
    o.Expect(row->label == labels[i], "row label '" + row->label + "'");
    const auto text = row->Row();
    o.Expect(text.starts_with(labels[i] + ": ") && text.find("±") != std::string::npos &&
                 text.find(" ms / ") != std::string::npos && text.ends_with(" tps"),
             "row shape: " + text);
    o.Expect(row->errors == 0, ops[i] + " had errors");
    o.Expect(row->mean_ms >= 0 && row->sd_ms >= 0 && row->tps > 0, ops[i] + " stats");
    if (s->ledger->IsReadOnly(ops[i])) {
      o.Expect(row->blocks_appended == 0, ops[i] + " appended blocks");
    }
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
    double limit_s;  // 0: no runtime bound
  };
  const Criterion criteria[] = {
      {1, "good-device trust cycle", GoodDevices, 1.0},
      {2, "faulty-device trust cycle", FaultyDevice, 1.0},
      {3, "position from the testbed", TestbedPosition, 1.0},
      {4, "faulty-position scenarios", FaultyPosition, 1.0},
      {5, "observation validation", ObservationValidation, 0},
      {6, "privacy matrix", PrivacyMatrix, 0},
      {7, "user staleness rule", Staleness, 0},
      {8, "crypto properties", CryptoProperties, 0},
      {9, "ledger properties", nullptr, 0},
      {10, "geometry oracle equivalence", GeometryOracle, 0},
      {11, "gateway phases", GatewayPhases, 0},
      {12, "performance report shape", BenchShape, 0},
  };

  // Criterion 9 checks every chain the other scenarios built, so it runs last.
  std::vector<std::pair<int, std::string>> lines;
  int failed = 0;
  auto run = [&](const Criterion& cr, Outcome (*fn)()) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = fn();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.limit_s > 0 && secs >= cr.limit_s) {
      o.Expect(false, Fmt("took %.3f s", secs));
    }
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s  %2d  %-30s %8.3f s  %s", o.pass ? "PASS" : "FAIL",
                  cr.id, cr.name, secs, o.why.c_str());
    lines.emplace_back(cr.id, buf);
    failed += !o.pass;
  };
  for (const auto& cr : criteria) {
    if (cr.run) run(cr, cr.run);
  }
  run(criteria[8], LedgerProperties);

  std::sort(lines.begin(), lines.end());
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d/12 criteria passed\n", 12 - failed);
  return failed == 0 ? 0 : 1;
}
