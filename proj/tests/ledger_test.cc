#include <doctest.h>

#include <random>
#include <thread>

#include "fixtures.h"
#include "trustloc/ledger.h"

using namespace trustloc;
using namespace trustloc::ledger;
using namespace fixtures;

namespace {

// A ledger with raw key-value operations, independent of the contract.
std::unique_ptr<Ledger> RawLedger() {
  auto l = MakeLedger();
  (void)l->RegisterOperation(
      {"Put", false, [](TxContext& ctx) -> Result<Json> {
         const auto& a = ctx.args();
         auto v = ctx.transient().at("value");
         if (auto s = ctx.PutPrivate(a[0], a[1], v); !s) return s.error();
         auto back = ctx.GetPrivate(a[0], a[1]);
         if (!back) return back.error();
         if (**back != v) return MakeError(ErrorCode::kInvalidArgument, "read-your-writes");
         return Json{{"ok", true}};
       }});
  (void)l->RegisterOperation(
      {"PutThenFail", false, [](TxContext& ctx) -> Result<Json> {
         const auto& a = ctx.args();
         (void)ctx.PutPrivate(a[0], a[1], crypto::ToBytes("partial"));
         return MakeError(ErrorCode::kInvalidArgument, "late failure");
       }});
  return l;
}

Transient Value(const std::string& s) { return {{"value", crypto::ToBytes(s)}}; }

// Runs a varied scenario on the contract ledger.
void Scenario(Ledger& l) {
  Seed(l, TestbedSet({"1", "2", "3", "4", "5"}));
  for (const auto& id : {"1", "2", "3"}) {
    (void)Do(l, kAdmin1, contract::UpdateTrustState(kDevices, id));
  }
  (void)Do(l, kAdmin1, contract::CalculatePosition(kDevices, kTarget));
  (void)Do(l, kAdmin1, contract::UpdateDeviceConfig(kDevices, "4", 'Q', std::nullopt));
  (void)Do(l, kAdmin1, contract::DeleteDevice(kDevices, "4"));
}

}  // namespace

TEST_CASE("collections") {
  Ledger l;
  const std::set<Role> admin{Role::kAdmin};
  CHECK(l.DefineCollection({kDevices, "Org1", admin, admin}));
  CHECK(l.DefineCollection({kTarget, "Org1", {Role::kAdmin, Role::kUser}, admin}));
  CHECK(l.DefineCollection({kDevices, "Org1", admin, admin}).code() ==
        ErrorCode::kDuplicateCollection);
  CHECK(l.FindCollection(kTarget)->readers.size() == 2);
  CHECK(l.VerifyChain());
  CHECK(l.Height() == 0);
}

TEST_CASE("submit commits one block and keeps transient data out of it") {
  auto l = MakeLedger();
  auto d = Testbed("1");
  d.decrypt_key = 0xA7;
  REQUIRE(Do(*l, kAdmin1, contract::CreateDevice(kDevices, d)));
  CHECK(l->Height() == 1);
  CHECK(l->GetWorldState().contains(kDevices + "/1"));
  auto blocks = l->Blocks();
  REQUIRE(blocks.size() == 2);
  const auto& tx = blocks[1].txs.at(0);
  CHECK(tx.op_name == "CreateDevice");
  CHECK(tx.public_args == std::vector<std::string>{kDevices, "1"});
  const auto log = l->SerializeBlockLog();
  CHECK(log.find("4242") == std::string::npos);
  CHECK(log.find("neighbors") == std::string::npos);
}

TEST_CASE("rejected submits append nothing") {
  auto l = MakeLedger();
  auto before = l->SerializeBlockLog();
  CHECK(Do(*l, kUser1, contract::CreateDevice(kDevices, Testbed("1"))).code() ==
        ErrorCode::kUnauthorized);
  CHECK(l->Submit(kAdmin1, "Nope", {}).code() == ErrorCode::kUnknownOperation);
  CHECK(l->Query(kAdmin1, "Nope", {}).code() == ErrorCode::kUnknownOperation);
  CHECK(l->SerializeBlockLog() == before);
}

TEST_CASE("queries never append blocks") {
  auto l = MakeLedger();
  Seed(*l, TestbedSet({"1", "2"}));
  const auto h = l->Height();
  for (int i = 0; i < 20; ++i) {
    (void)l->Query(kAdmin1, contract::kReadDevice, {kDevices, "1"});
    (void)l->Query(kAdmin1, contract::kReadAllDeviceIds, {kDevices});
    (void)l->Submit(kAdmin1, contract::kReadTarget, {kTarget});
  }
  CHECK(l->Height() == h);
  CHECK(l->Query(kAdmin1, contract::kCreateTarget, {kTarget, "7"}).code() ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("private reads follow the collection policy") {
  auto l = MakeLedger();
  Seed(*l, TestbedSet({"1"}));
  CHECK(l->GetPrivate(kDevices, "1", kAdmin1));
  CHECK(l->GetPrivate(kDevices, "1", kUser1).code() == ErrorCode::kUnauthorized);
  CHECK(l->GetPrivate(kDevices, "1", kAdmin2).code() == ErrorCode::kUnauthorized);
  CHECK(l->GetPrivate(kDevices, "1", kUser2).code() == ErrorCode::kUnauthorized);
  CHECK(l->GetPrivate(kTarget, "target", kUser1));
  CHECK(l->GetPrivate(kTarget, "target", kAdmin2).code() == ErrorCode::kUnauthorized);
  CHECK(l->GetPrivate(kDevices, "9", kAdmin1).code() == ErrorCode::kNotFound);
  CHECK(l->GetPrivate("Nope", "9", kAdmin1).code() == ErrorCode::kNotFound);
}

TEST_CASE("private writes are policy checked, speculative and atomic") {
  auto l = RawLedger();
  CHECK(l->Submit(kAdmin1, "Put", {kTarget, "k"}, Value("v1")));
  CHECK(l->Submit(kUser1, "Put", {kTarget, "k"}, Value("v2")).code() ==
        ErrorCode::kUnauthorized);
  const auto digest = l->WorldStateDigest();
  const auto height = l->Height();
  CHECK(l->Submit(kAdmin1, "PutThenFail", {kTarget, "k"}).code() ==
        ErrorCode::kInvalidArgument);
  CHECK(l->WorldStateDigest() == digest);
  CHECK(l->Height() == height);
  CHECK(crypto::ToString(*l->GetPrivate(kTarget, "k", kAdmin1)) == "v1");
}

TEST_CASE("world state holds the digest of each private value") {
  auto l = MakeLedger();
  Scenario(*l);
  for (const auto& [slot, hex] : l->GetWorldState()) {
    const auto cut = slot.find('/');
    auto v = l->GetPrivate(slot.substr(0, cut), slot.substr(cut + 1), kAdmin1);
    if (hex == kTombstone) {
      CHECK(v.code() == ErrorCode::kNotFound);
    } else {
      REQUIRE(v);
      CHECK(hex == crypto::HexEncode(crypto::ComputeDigest(*v)));
    }
  }
}

TEST_CASE("chain verification and tamper detection") {
  auto l = MakeLedger();
  Scenario(*l);
  CHECK(l->VerifyChain());
  const auto log = l->SerializeBlockLog();
  CHECK(VerifyBlockLog(log));

  std::vector<std::size_t> starts{0};
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i] == '\n' && i + 1 < log.size()) starts.push_back(i + 1);
  }
  REQUIRE(starts.size() == l->Height() + 1);

  // Random single-byte flips inside every block line.
  std::mt19937_64 rng(4);
  for (std::uint64_t h = 0; h < starts.size(); ++h) {
    const auto end = log.find('\n', starts[h]);
    for (int k = 0; k < 40; ++k) {
      auto bad = log;
      const auto pos = starts[h] + rng() % (end - starts[h]);
      bad[pos] = static_cast<char>(bad[pos] ^ (1 + rng() % 127));
      auto st = VerifyBlockLog(bad);
      REQUIRE_FALSE(st);
      CHECK(BrokenHeight(st.error()) == h);
    }
  }
}

TEST_CASE("block log carries no private plaintext") {
  auto l = MakeLedger();
  Scenario(*l);
  const auto log = l->SerializeBlockLog();
  for (const auto& [coll, entries] : l->Snapshot()["private"].items()) {
    for (const auto& [key, hex] : entries.items()) {
      const auto value = crypto::ToString(*crypto::HexDecode(hex.get<std::string>()));
      for (std::size_t i = 0; i + 8 <= value.size(); ++i) {
        CHECK_MESSAGE(log.find(value.substr(i, 8)) == std::string::npos,
                      coll << "/" << key << " leaks '" << value.substr(i, 8) << "'");
      }
    }
  }
}

TEST_CASE("replay and restore reproduce the world state") {
  auto l = MakeLedger();
  Scenario(*l);
  const auto log = l->SerializeBlockLog();
  auto ws = ReplayBlockLog(log);
  REQUIRE(ws);
  CHECK(DigestOf(*ws) == l->WorldStateDigest());
  CHECK(ws->at(kDevices + "/4") == kTombstone);

  auto copy = MakeLedger();
  REQUIRE(copy->Restore(log, l->Snapshot()));
  CHECK(copy->WorldStateDigest() == l->WorldStateDigest());
  CHECK(copy->SerializeBlockLog() == log);
  CHECK(ReadDevice(*copy, "1") == ReadDevice(*l, "1"));

  // Further commits continue the chain.
  REQUIRE(Do(*copy, kAdmin1, contract::UpdateTrustState(kDevices, "1")));
  CHECK(copy->VerifyChain());
  CHECK(copy->Height() == l->Height() + 1);

  auto snap = l->Snapshot();
  snap["private"][kDevices]["1"] = crypto::HexEncode(crypto::ToBytes("{}"));
  CHECK(MakeLedger()->Restore(log, snap).code() == ErrorCode::kIntegrityFailure);
}

TEST_CASE("concurrent submits and queries stay consistent") {
  auto l = RawLedger();
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        (void)l->Submit(kAdmin1, "Put", {kTarget, std::to_string(t)},
                        Value(std::to_string(i)));
        (void)l->GetPrivate(kTarget, std::to_string(t), kUser1);
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(l->Height() == 200);
  CHECK(l->VerifyChain());
  std::set<std::string> ids;
  for (const auto& b : l->Blocks()) {
    for (const auto& tx : b.txs) ids.insert(tx.tx_id);
  }
  CHECK(ids.size() == 200);
}
