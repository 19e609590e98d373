#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "trustloc/crypto.h"
#include "trustloc/domain.h"

namespace trustloc::ledger {

using crypto::Bytes;
using crypto::Digest;
using Transient = std::map<std::string, Bytes>;
// "collection/key" -> lowercase hex digest of the private value.
using WorldState = std::map<std::string, std::string>;

// World-state value recorded for a deleted private key.
inline constexpr std::string_view kTombstone =
    "0000000000000000000000000000000000000000000000000000000000000000";

struct CollectionDef {
  std::string name;
  std::string org;
  std::set<Role> readers;
  std::set<Role> writers;
};

enum class TxStatus { kCommitted, kRejected };

struct Transaction {
  std::string tx_id;
  Identity submitter;
  std::string op_name;
  std::vector<std::string> public_args;
  std::map<std::string, std::string> private_write_hashes;
  TxStatus status = TxStatus::kCommitted;
  std::string reject_reason;
};

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  std::vector<Transaction> txs;
  Digest block_hash{};
};

Json ToJson(const Transaction& tx);
Json ToJson(const Block& block);
Digest ComputeBlockHash(std::uint64_t height, const Digest& prev_hash,
                        const std::vector<Transaction>& txs);

// Decides how submitted transactions are grouped into blocks. Each call
// hands over one endorsed transaction and gets back the blocks (possibly
// none) that are ready to be appended, in order.
class OrderingService {
 public:
  virtual ~OrderingService() = default;
  virtual std::vector<std::vector<Transaction>> Order(Transaction tx) = 0;
};

// FIFO, one transaction per block.
class SequencerOrdering : public OrderingService {
 public:
  std::vector<std::vector<Transaction>> Order(Transaction tx) override;
};

class Ledger;

// Execution view handed to a contract operation. Reads see the
// committed state overlaid with this transaction's own writes; writes
// stay speculative until the ledger commits.
class TxContext {
 public:
  const Identity& caller() const { return caller_; }
  const std::vector<std::string>& args() const { return args_; }
  const Transient& transient() const { return transient_; }
  bool read_only() const { return read_only_; }

  // Policy check without touching data: kNotFound for an undefined
  // collection, kUnauthorized for an org or role mismatch.
  Status CheckAccess(std::string_view collection, bool write) const;

  // Returns std::nullopt (not an error) when the key is absent.
  Result<std::optional<Bytes>> GetPrivate(std::string_view collection,
                                          std::string_view key) const;
  Status PutPrivate(std::string_view collection, std::string_view key,
                    Bytes value);
  Status DeletePrivate(std::string_view collection, std::string_view key);
  Result<std::vector<std::string>> Keys(std::string_view collection) const;

  // When set, the writes made so far are committed even though the
  // operation returns an error to its caller.
  void CommitOnError() { commit_on_error_ = true; }

 private:
  friend class Ledger;
  TxContext(const Ledger& ledger, Identity caller,
            std::vector<std::string> args, Transient transient, bool read_only);

  std::string Slot(std::string_view collection, std::string_view key) const;

  const Ledger& ledger_;
  Identity caller_;
  std::vector<std::string> args_;
  Transient transient_;
  bool read_only_;
  bool commit_on_error_ = false;
  // slot -> value; std::nullopt marks a deletion
  std::map<std::string, std::optional<Bytes>> writes_;
};

using Handler = std::function<Result<Json>(TxContext&)>;

struct OperationDef {
  std::string name;
  bool read_only = false;
  Handler handler;
};

// In-process permissioned ledger. One shared world state holds only
// digests of private data; plaintext lives in per-collection private
// stores guarded by the collection policies. Submits are serialized;
// queries and private reads may run concurrently and see committed state.
class Ledger {
 public:
  explicit Ledger(std::unique_ptr<OrderingService> ordering =
                      std::make_unique<SequencerOrdering>());

  Status DefineCollection(CollectionDef def);
  Status RegisterOperation(OperationDef op);
  bool IsReadOnly(std::string_view op_name) const;
  const CollectionDef* FindCollection(std::string_view name) const;

  // Executes a state-changing operation and, on success, orders and
  // commits it. Transient data is used during execution only.
  // Read-only operations are routed to Query().
  Result<Json> Submit(const Identity& caller, std::string_view op_name,
                      std::vector<std::string> public_args,
                      Transient transient = {});
  Result<Json> Query(const Identity& caller, std::string_view op_name,
                     std::vector<std::string> public_args) const;

  Result<Bytes> GetPrivate(std::string_view collection, std::string_view key,
                           const Identity& caller) const;

  Status VerifyChain() const;

  std::uint64_t Height() const;  // number of blocks after genesis
  std::vector<Block> Blocks() const;
  WorldState GetWorldState() const;
  // Digest of the canonical world-state encoding.
  std::string WorldStateDigest() const;

  std::string SerializeBlockLog() const;
  Json Snapshot() const;
  // Rebuilds a ledger from a persisted block log plus a snapshot of the
  // private stores. Collections and operations must already be defined.
  Status Restore(std::string_view block_log, const Json& snapshot);

 private:
  friend class TxContext;

  Status CheckAccessLocked(std::string_view collection, const Identity& caller,
                           bool write) const;
  void CommitBlock(std::vector<Transaction> txs);

  mutable std::shared_mutex mu_;
  std::unique_ptr<OrderingService> ordering_;
  std::map<std::string, CollectionDef, std::less<>> collections_;
  std::map<std::string, OperationDef, std::less<>> operations_;
  std::vector<Block> blocks_;
  WorldState world_state_;
  // collection -> key -> value
  std::map<std::string, std::map<std::string, Bytes>, std::less<>> private_;
  // tx_id -> staged writes, waiting for the orderer to cut a block
  std::map<std::string, std::map<std::string, std::optional<Bytes>>> staged_;
  std::uint64_t next_tx_id_ = 1;
};

// Checks a persisted block log line by line. Each line must be the
// canonical encoding of its block, heights must count up from 0 and
// every hash and link must recompute. Fails with kChainBroken whose
// detail starts with the first bad height.
Status VerifyBlockLog(std::string_view block_log);
std::optional<std::uint64_t> BrokenHeight(const Error& error);

// Reapplies the private-write digests of every committed transaction.
Result<WorldState> ReplayBlockLog(std::string_view block_log);

std::string DigestOf(const WorldState& ws);

}  // namespace trustloc::ledger
