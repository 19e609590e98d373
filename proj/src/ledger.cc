#include "trustloc/ledger.h"

#include <cctype>
#include <mutex>

namespace trustloc::ledger {

namespace {

std::string_view StatusName(TxStatus s) {
  return s == TxStatus::kCommitted ? "Committed" : "Rejected";
}

Error Broken(std::uint64_t height, std::string_view why) {
  return MakeError(ErrorCode::kChainBroken,
                   std::to_string(height) + ": " + std::string(why));
}

Result<Transaction> TransactionFromJson(const Json& j) {
  try {
    Transaction tx;
    tx.tx_id = j.at("tx_id").get<std::string>();
    auto who = IdentityFromJson(j.at("submitter"));
    if (!who) return who.error();
    tx.submitter = *who;
    tx.op_name = j.at("op").get<std::string>();
    tx.public_args = j.at("args").get<std::vector<std::string>>();
    tx.private_write_hashes =
        j.at("private_writes").get<std::map<std::string, std::string>>();
    const auto status = j.at("status").get<std::string>();
    if (status == "Committed") {
      tx.status = TxStatus::kCommitted;
    } else if (status == "Rejected") {
      tx.status = TxStatus::kRejected;
    } else {
      return MakeError(ErrorCode::kParseError, "bad tx status");
    }
    if (j.contains("reject_reason")) {
      tx.reject_reason = j.at("reject_reason").get<std::string>();
    }
    return tx;
  } catch (const Json::exception& e) {
    return MakeError(ErrorCode::kParseError, e.what());
  }
}

Result<Block> BlockFromJson(const Json& j) {
  try {
    Block b;
    b.height = j.at("height").get<std::uint64_t>();
    auto prev = crypto::DigestFromHex(j.at("prev_hash").get<std::string>());
    if (!prev) return prev.error();
    b.prev_hash = *prev;
    auto hash = crypto::DigestFromHex(j.at("block_hash").get<std::string>());
    if (!hash) return hash.error();
    b.block_hash = *hash;
    for (const auto& tj : j.at("txs")) {
      auto tx = TransactionFromJson(tj);
      if (!tx) return tx.error();
      b.txs.push_back(std::move(tx).value());
    }
    return b;
  } catch (const Json::exception& e) {
    return MakeError(ErrorCode::kParseError, e.what());
  }
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

// Parses one log line, requiring it to be byte-identical to the
// canonical re-encoding of what it decodes to.
Result<Block> ParseBlockLine(std::string_view line, std::uint64_t expect_height) {
  auto j = ParseJson(line);
  if (!j) return Broken(expect_height, "malformed block");
  std::string again;
  try {
    again = Canonical(*j);
  } catch (const Json::exception&) {
    return Broken(expect_height, "unencodable block");
  }
  if (again != line) return Broken(expect_height, "non-canonical encoding");
  auto block = BlockFromJson(*j);
  if (!block) return Broken(expect_height, block.error().ToString());
  return block;
}

Status CheckLinks(const std::vector<Block>& blocks) {
  Digest prev{};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.height != i) return Broken(i, "height mismatch");
    if (b.prev_hash != prev) return Broken(i, "prev_hash mismatch");
    if (ComputeBlockHash(b.height, b.prev_hash, b.txs) != b.block_hash) {
      return Broken(i, "block_hash mismatch");
    }
    prev = b.block_hash;
  }
  return OkStatus();
}

Result<std::vector<Block>> LoadBlockLog(std::string_view block_log) {
  std::vector<Block> blocks;
  for (auto line : SplitLines(block_log)) {
    auto block = ParseBlockLine(line, blocks.size());
    if (!block) return block.error();
    blocks.push_back(std::move(block).value());
  }
  if (blocks.empty()) return Broken(0, "missing genesis block");
  auto links = CheckLinks(blocks);
  if (!links) return links.error();
  return blocks;
}

void ApplyDigests(const Transaction& tx, WorldState& ws) {
  if (tx.status != TxStatus::kCommitted) return;
  for (const auto& [slot, hex] : tx.private_write_hashes) ws[slot] = hex;
}

}  // namespace

Json ToJson(const Transaction& tx) {
  Json j{{"tx_id", tx.tx_id},
         {"submitter", trustloc::ToJson(tx.submitter)},
         {"op", tx.op_name},
         {"args", tx.public_args},
         {"private_writes", tx.private_write_hashes},
         {"status", StatusName(tx.status)}};
  if (tx.status == TxStatus::kRejected) j["reject_reason"] = tx.reject_reason;
  return j;
}

namespace {

Json HashedPart(std::uint64_t height, const Digest& prev_hash,
                const std::vector<Transaction>& txs) {
  Json list = Json::array();
  for (const auto& tx : txs) list.push_back(ToJson(tx));
  return Json{{"height", height},
              {"prev_hash", crypto::HexEncode(prev_hash)},
              {"txs", std::move(list)}};
}

}  // namespace

Json ToJson(const Block& block) {
  Json j = HashedPart(block.height, block.prev_hash, block.txs);
  j["block_hash"] = crypto::HexEncode(block.block_hash);
  return j;
}

Digest ComputeBlockHash(std::uint64_t height, const Digest& prev_hash,
                        const std::vector<Transaction>& txs) {
  return crypto::ComputeDigest(Canonical(HashedPart(height, prev_hash, txs)));
}

std::vector<std::vector<Transaction>> SequencerOrdering::Order(Transaction tx) {
  std::vector<std::vector<Transaction>> out(1);
  out[0].push_back(std::move(tx));
  return out;
}

// --- TxContext -------------------------------------------------------------

TxContext::TxContext(const Ledger& ledger, Identity caller,
                     std::vector<std::string> args, Transient transient,
                     bool read_only)
    : ledger_(ledger),
      caller_(std::move(caller)),
      args_(std::move(args)),
      transient_(std::move(transient)),
      read_only_(read_only) {}

std::string TxContext::Slot(std::string_view collection,
                            std::string_view key) const {
  std::string slot(collection);
  slot += '/';
  slot += key;
  return slot;
}

Status TxContext::CheckAccess(std::string_view collection, bool write) const {
  return ledger_.CheckAccessLocked(collection, caller_, write);
}

Result<std::optional<Bytes>> TxContext::GetPrivate(std::string_view collection,
                                                   std::string_view key) const {
  if (auto s = CheckAccess(collection, false); !s) return s.error();
  if (auto it = writes_.find(Slot(collection, key)); it != writes_.end()) {
    return it->second;
  }
  auto coll = ledger_.private_.find(collection);
  if (coll == ledger_.private_.end()) return std::optional<Bytes>{};
  auto it = coll->second.find(std::string(key));
  if (it == coll->second.end()) return std::optional<Bytes>{};
  return std::optional<Bytes>(it->second);
}

Status TxContext::PutPrivate(std::string_view collection, std::string_view key,
                             Bytes value) {
  if (read_only_) {
    return MakeError(ErrorCode::kInvalidArgument, "write in read-only call");
  }
  if (auto s = CheckAccess(collection, true); !s) return s;
  writes_[Slot(collection, key)] = std::move(value);
  return OkStatus();
}

Status TxContext::DeletePrivate(std::string_view collection,
                                std::string_view key) {
  if (read_only_) {
    return MakeError(ErrorCode::kInvalidArgument, "write in read-only call");
  }
  if (auto s = CheckAccess(collection, true); !s) return s;
  writes_[Slot(collection, key)] = std::nullopt;
  return OkStatus();
}

Result<std::vector<std::string>> TxContext::Keys(
    std::string_view collection) const {
  if (auto s = CheckAccess(collection, false); !s) return s.error();
  std::set<std::string> keys;
  if (auto coll = ledger_.private_.find(collection);
      coll != ledger_.private_.end()) {
    for (const auto& [k, v] : coll->second) keys.insert(k);
  }
  const std::string prefix = Slot(collection, "");
  for (const auto& [slot, value] : writes_) {
    if (!slot.starts_with(prefix)) continue;
    auto key = slot.substr(prefix.size());
    if (value) {
      keys.insert(key);
    } else {
      keys.erase(key);
    }
  }
  return std::vector<std::string>(keys.begin(), keys.end());
}

// --- Ledger ----------------------------------------------------------------

Ledger::Ledger(std::unique_ptr<OrderingService> ordering)
    : ordering_(std::move(ordering)) {
  Block genesis;
  genesis.height = 0;
  genesis.block_hash = ComputeBlockHash(0, genesis.prev_hash, {});
  blocks_.push_back(std::move(genesis));
}

Status Ledger::DefineCollection(CollectionDef def) {
  std::unique_lock lock(mu_);
  if (def.name.empty() || def.name.find('/') != std::string::npos) {
    return MakeError(ErrorCode::kInvalidArgument,
                     "bad collection name '" + def.name + "'");
  }
  for (Role w : def.writers) {
    if (!def.readers.contains(w)) {
      return MakeError(ErrorCode::kInvalidArgument,
                       "writers must be a subset of readers");
    }
  }
  if (collections_.contains(def.name)) {
    return MakeError(ErrorCode::kDuplicateCollection, def.name);
  }
  auto name = def.name;
  collections_.emplace(std::move(name), std::move(def));
  return OkStatus();
}

Status Ledger::RegisterOperation(OperationDef op) {
  std::unique_lock lock(mu_);
  if (operations_.contains(op.name)) {
    return MakeError(ErrorCode::kInvalidArgument,
                     "operation '" + op.name + "' already registered");
  }
  auto name = op.name;
  operations_.emplace(std::move(name), std::move(op));
  return OkStatus();
}

bool Ledger::IsReadOnly(std::string_view op_name) const {
  std::shared_lock lock(mu_);
  auto it = operations_.find(op_name);
  return it != operations_.end() && it->second.read_only;
}

const CollectionDef* Ledger::FindCollection(std::string_view name) const {
  std::shared_lock lock(mu_);
  auto it = collections_.find(name);
  return it == collections_.end() ? nullptr : &it->second;
}

Status Ledger::CheckAccessLocked(std::string_view collection,
                                 const Identity& caller, bool write) const {
  auto it = collections_.find(collection);
  if (it == collections_.end()) {
    return MakeError(ErrorCode::kNotFound,
                     "collection '" + std::string(collection) + "'");
  }
  const auto& def = it->second;
  const auto& allowed = write ? def.writers : def.readers;
  if (caller.org != def.org || !allowed.contains(caller.role)) {
    return MakeError(ErrorCode::kUnauthorized,
                     caller.name + " (" + caller.org + "/" +
                         std::string(RoleName(caller.role)) + ") cannot " +
                         (write ? "write" : "read") + " " + def.name);
  }
  return OkStatus();
}

Result<Json> Ledger::Submit(const Identity& caller, std::string_view op_name,
                            std::vector<std::string> public_args,
                            Transient transient) {
  std::unique_lock lock(mu_);
  auto op = operations_.find(op_name);
  if (op == operations_.end()) {
    return MakeError(ErrorCode::kUnknownOperation, std::string(op_name));
  }
  if (op->second.read_only) {
    lock.unlock();
    return Query(caller, op_name, std::move(public_args));
  }

  TxContext ctx(*this, caller, public_args, std::move(transient), false);
  Result<Json> result = op->second.handler(ctx);
  if (!result.ok() && !ctx.commit_on_error_) return result;
  if (ctx.writes_.empty()) return result;

  Transaction tx;
  tx.tx_id = std::to_string(next_tx_id_++);
  tx.submitter = caller;
  tx.op_name = std::string(op_name);
  tx.public_args = std::move(public_args);
  for (const auto& [slot, value] : ctx.writes_) {
    tx.private_write_hashes[slot] =
        value ? crypto::HexEncode(crypto::ComputeDigest(*value))
              : std::string(kTombstone);
  }
  staged_[tx.tx_id] = std::move(ctx.writes_);
  for (auto& txs : ordering_->Order(std::move(tx))) CommitBlock(std::move(txs));
  return result;
}

void Ledger::CommitBlock(std::vector<Transaction> txs) {
  Block block;
  block.height = blocks_.size();
  block.prev_hash = blocks_.back().block_hash;
  block.txs = std::move(txs);
  block.block_hash = ComputeBlockHash(block.height, block.prev_hash, block.txs);
  for (const auto& tx : block.txs) {
    ApplyDigests(tx, world_state_);
    auto staged = staged_.find(tx.tx_id);
    if (staged == staged_.end()) continue;
    for (auto& [slot, value] : staged->second) {
      const auto cut = slot.find('/');
      const auto coll = slot.substr(0, cut);
      const auto key = slot.substr(cut + 1);
      if (value) {
        private_[coll][key] = std::move(*value);
      } else {
        private_[coll].erase(key);
      }
    }
    staged_.erase(staged);
  }
  blocks_.push_back(std::move(block));
}

Result<Json> Ledger::Query(const Identity& caller, std::string_view op_name,
                           std::vector<std::string> public_args) const {
  std::shared_lock lock(mu_);
  auto op = operations_.find(op_name);
  if (op == operations_.end()) {
    return MakeError(ErrorCode::kUnknownOperation, std::string(op_name));
  }
  if (!op->second.read_only) {
    return MakeError(ErrorCode::kInvalidArgument,
                     std::string(op_name) + " is not read-only");
  }
  TxContext ctx(*this, caller, std::move(public_args), {}, true);
  return op->second.handler(ctx);
}

Result<Bytes> Ledger::GetPrivate(std::string_view collection,
                                 std::string_view key,
                                 const Identity& caller) const {
  std::shared_lock lock(mu_);
  if (auto s = CheckAccessLocked(collection, caller, false); !s) {
    return s.error();
  }
  auto coll = private_.find(collection);
  if (coll != private_.end()) {
    if (auto it = coll->second.find(std::string(key)); it != coll->second.end()) {
      return it->second;
    }
  }
  return MakeError(ErrorCode::kNotFound,
                   std::string(collection) + "/" + std::string(key));
}

Status Ledger::VerifyChain() const {
  std::shared_lock lock(mu_);
  return CheckLinks(blocks_);
}

std::uint64_t Ledger::Height() const {
  std::shared_lock lock(mu_);
  return blocks_.size() - 1;
}

std::vector<Block> Ledger::Blocks() const {
  std::shared_lock lock(mu_);
  return blocks_;
}

WorldState Ledger::GetWorldState() const {
  std::shared_lock lock(mu_);
  return world_state_;
}

std::string DigestOf(const WorldState& ws) {
  return crypto::HexEncode(crypto::ComputeDigest(Canonical(Json(ws))));
}

std::string Ledger::WorldStateDigest() const { return DigestOf(GetWorldState()); }

std::string Ledger::SerializeBlockLog() const {
  std::shared_lock lock(mu_);
  std::string out;
  for (const auto& b : blocks_) {
    out += Canonical(ToJson(b));
    out += '\n';
  }
  return out;
}

Json Ledger::Snapshot() const {
  std::shared_lock lock(mu_);
  Json priv = Json::object();
  for (const auto& [coll, entries] : private_) {
    Json c = Json::object();
    for (const auto& [k, v] : entries) c[k] = crypto::HexEncode(v);
    priv[coll] = std::move(c);
  }
  return Json{{"world_state", Json(world_state_)}, {"private", std::move(priv)}};
}

Status Ledger::Restore(std::string_view block_log, const Json& snapshot) {
  auto blocks = LoadBlockLog(block_log);
  if (!blocks) return blocks.error();
  WorldState ws;
  std::uint64_t tx_count = 0;
  for (const auto& b : *blocks) {
    for (const auto& tx : b.txs) {
      ApplyDigests(tx, ws);
      ++tx_count;
    }
  }

  std::map<std::string, std::map<std::string, Bytes>, std::less<>> priv;
  try {
    if (snapshot.at("world_state").get<WorldState>() != ws) {
      return MakeError(ErrorCode::kIntegrityFailure,
                       "snapshot world state differs from block log replay");
    }
    for (const auto& [coll, entries] : snapshot.at("private").items()) {
      for (const auto& [k, hex] : entries.items()) {
        auto bytes = crypto::HexDecode(hex.get<std::string>());
        if (!bytes) return bytes.error();
        const auto slot = coll + "/" + k;
        auto recorded = ws.find(slot);
        if (recorded == ws.end() ||
            recorded->second != crypto::HexEncode(crypto::ComputeDigest(*bytes))) {
          return MakeError(ErrorCode::kIntegrityFailure,
                           "private value digest mismatch at " + slot);
        }
        priv[coll][k] = std::move(bytes).value();
      }
    }
  } catch (const Json::exception& e) {
    return MakeError(ErrorCode::kParseError, e.what());
  }
  for (const auto& [slot, hex] : ws) {
    if (hex == kTombstone) continue;
    const auto cut = slot.find('/');
    auto coll = priv.find(slot.substr(0, cut));
    if (coll == priv.end() || !coll->second.contains(slot.substr(cut + 1))) {
      return MakeError(ErrorCode::kIntegrityFailure,
                       "snapshot is missing private value " + slot);
    }
  }

  std::unique_lock lock(mu_);
  blocks_ = std::move(blocks).value();
  world_state_ = std::move(ws);
  private_ = std::move(priv);
  staged_.clear();
  next_tx_id_ = tx_count + 1;
  return OkStatus();
}

Status VerifyBlockLog(std::string_view block_log) {
  auto blocks = LoadBlockLog(block_log);
  if (!blocks) return blocks.error();
  return OkStatus();
}

std::optional<std::uint64_t> BrokenHeight(const Error& error) {
  if (error.code != ErrorCode::kChainBroken) return std::nullopt;
  std::uint64_t h = 0;
  std::size_t i = 0;
  for (; i < error.detail.size() && std::isdigit(
             static_cast<unsigned char>(error.detail[i])); ++i) {
    h = h * 10 + static_cast<std::uint64_t>(error.detail[i] - '0');
  }
  if (i == 0) return std::nullopt;
  return h;
}

Result<WorldState> ReplayBlockLog(std::string_view block_log) {
  auto blocks = LoadBlockLog(block_log);
  if (!blocks) return blocks.error();
  WorldState ws;
  for (const auto& b : *blocks) {
    for (const auto& tx : b.txs) ApplyDigests(tx, ws);
  }
  return ws;
}

}  // namespace trustloc::ledger
