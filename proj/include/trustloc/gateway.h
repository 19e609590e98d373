#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "trustloc/crypto.h"
#include "trustloc/domain.h"
#include "trustloc/ledger.h"

namespace trustloc::gateway {

struct DeviceBuffer {
  std::string device_id;
  std::vector<Observation> pending;  // never longer than batch_size
};

struct BatchAverage {
  double dist_mm = 0.0;
  double conf = 0.0;
};

// Averages and empties a full buffer; std::nullopt while it holds fewer
// than batch_size observations.
std::optional<BatchAverage> FlushBatch(DeviceBuffer& buf,
                                       const ExperimentParams& p);

struct DeviceTrust {
  double evi = 0.0;
  double rep = 0.0;
  double trust = 0.0;
};

struct CycleReport {
  int cycle = 0;
  // Set when a Phase 1/2 submit failed; no later phase ran.
  std::optional<int> aborted_phase;
  std::string aborted_device;
  std::string abort_error;
  std::optional<Point> position;
  double residual = 0.0;
  std::vector<std::string> anchors;
  std::string failure;  // Phase 3 error, e.g. "NotComputable: ..."
  std::map<std::string, BatchAverage> batches;
  std::map<std::string, DeviceTrust> devices;
  std::map<std::string, int> rejections;
  double phase1_ms = 0.0;
  double phase2_ms = 0.0;
  double phase3_ms = 0.0;
};

Json ToJson(const CycleReport& report);

// Line-oriented envelope source polled by the gateway.
class FeedSource {
 public:
  virtual ~FeedSource() = default;
  // Envelope lines available since the previous poll.
  virtual std::vector<std::string> Poll() = 0;
  virtual bool Closed() const = 0;
};

// Reads an istream to EOF; closed once EOF is reached.
class StreamFeed : public FeedSource {
 public:
  explicit StreamFeed(std::istream& in) : in_(in) {}
  std::vector<std::string> Poll() override;
  bool Closed() const override { return closed_; }

 private:
  std::istream& in_;
  bool closed_ = false;
};

class FileFeed : public FeedSource {
 public:
  explicit FileFeed(const std::filesystem::path& path);
  bool ok() const { return static_cast<bool>(file_); }
  std::vector<std::string> Poll() override { return stream_.Poll(); }
  bool Closed() const override { return stream_.Closed(); }

 private:
  std::ifstream file_;
  StreamFeed stream_;
};

// Delivers a fixed list of lines, `chunk` lines per poll.
class VectorFeed : public FeedSource {
 public:
  VectorFeed(std::vector<std::string> lines, std::size_t chunk)
      : lines_(std::move(lines)), chunk_(chunk == 0 ? 1 : chunk) {}
  std::vector<std::string> Poll() override;
  bool Closed() const override { return next_ >= lines_.size(); }

 private:
  std::vector<std::string> lines_;
  std::size_t chunk_;
  std::size_t next_ = 0;
};

struct GatewayOptions {
  // Issue the per-device submits of Phases 1 and 2 concurrently.
  bool parallel_submit = false;
  // Reorders the device list before each phase (tests use it to permute
  // intra-phase submission order).
  std::function<void(std::vector<std::string>&)> reorder;
  std::function<void(std::chrono::milliseconds)> sleep;  // default: sleep_for
};

// Admin-side pipeline: authenticate, verify and decrypt envelopes, batch
// per device, then update observations, trust state and the target
// position in three barrier-separated phases.
class Gateway {
 public:
  Gateway(ledger::Ledger& ledger, Identity admin, ExperimentParams params,
          std::vector<std::string> device_ids, GatewayOptions options = {});

  // Opens the envelope with the device key from the ledger. When
  // `channel_device_id` is given, the envelope must claim that id.
  // Rejections are counted per claimed device id.
  Result<Observation> Ingest(const crypto::Envelope& env,
                             std::optional<std::string_view> channel_device_id = {});

  bool AllReady() const;

  // Requires every device to hold a full batch (kInvalidArgument otherwise).
  Result<CycleReport> RunCycle();

  // Drains the feed every time_read_obs; runs a cycle whenever all
  // devices are ready. Returns once the feed closes or stop is requested.
  std::vector<CycleReport> PollLoop(FeedSource& feed, std::stop_token stop = {});

  const std::map<std::string, int>& rejections() const { return rejections_; }
  const DeviceBuffer& buffer(const std::string& device_id) const;
  std::size_t backlog(const std::string& device_id) const;

 private:
  Result<std::uint8_t> KeyFor(const std::string& device_id);
  Error Reject(const std::string& device_id, Error error);
  // Returns the first failing device (in `order`) and its error.
  std::optional<std::pair<std::string, Error>> RunPhase(
      const std::vector<std::string>& order,
      const std::function<Result<Json>(const std::string&)>& step);
  std::vector<std::string> Ordered() const;

  ledger::Ledger& ledger_;
  Identity admin_;
  ExperimentParams params_;
  std::vector<std::string> device_ids_;
  std::set<std::string> known_;
  GatewayOptions options_;
  std::map<std::string, std::uint8_t> keys_;
  std::map<std::string, DeviceBuffer> buffers_;
  std::map<std::string, std::deque<Observation>> backlog_;
  std::map<std::string, int> rejections_;
  int cycles_ = 0;
};

}  // namespace trustloc::gateway
