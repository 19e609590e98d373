#include "trustloc/gateway.h"

#include <future>
#include <numeric>
#include <thread>

#include "trustloc/contract.h"
#include "trustloc/devicesim.h"

namespace trustloc::gateway {

std::optional<BatchAverage> FlushBatch(DeviceBuffer& buf,
                                       const ExperimentParams& p) {
  if (buf.pending.size() < static_cast<std::size_t>(p.batch_size)) {
    return std::nullopt;
  }
  BatchAverage avg;
  for (const auto& obs : buf.pending) {
    avg.dist_mm += static_cast<double>(obs.distance_mm);
    avg.conf += obs.confidence;
  }
  const double n = static_cast<double>(buf.pending.size());
  avg.dist_mm /= n;
  avg.conf /= n;
  buf.pending.clear();
  return avg;
}

Json ToJson(const CycleReport& r) {
  Json batches = Json::object();
  for (const auto& [id, b] : r.batches) {
    batches[id] = {{"dist_mm", b.dist_mm}, {"conf", b.conf}};
  }
  Json devices = Json::object();
  for (const auto& [id, d] : r.devices) {
    devices[id] = {{"evi", d.evi}, {"rep", d.rep}, {"trust", d.trust}};
  }
  Json j{{"cycle", r.cycle},
         {"batches", std::move(batches)},
         {"devices", std::move(devices)},
         {"rejections", r.rejections},
         {"latency_ms",
          {{"phase1", r.phase1_ms}, {"phase2", r.phase2_ms}, {"phase3", r.phase3_ms}}}};
  if (r.aborted_phase) {
    j["aborted"] = {{"phase", *r.aborted_phase},
                    {"device", r.aborted_device},
                    {"error", r.abort_error}};
  }
  if (r.position) {
    j["position"] = {{"x", r.position->x}, {"y", r.position->y}};
    j["residual"] = r.residual;
    j["anchors"] = r.anchors;
  } else if (!r.failure.empty()) {
    j["failure"] = r.failure;
  }
  return j;
}

std::vector<std::string> StreamFeed::Poll() {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in_, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  closed_ = true;
  return lines;
}

FileFeed::FileFeed(const std::filesystem::path& path)
    : file_(path, std::ios::binary), stream_(file_) {}

std::vector<std::string> VectorFeed::Poll() {
  const auto end = std::min(lines_.size(), next_ + chunk_);
  std::vector<std::string> out(lines_.begin() + static_cast<std::ptrdiff_t>(next_),
                               lines_.begin() + static_cast<std::ptrdiff_t>(end));
  next_ = end;
  return out;
}

Gateway::Gateway(ledger::Ledger& ledger, Identity admin, ExperimentParams params,
                 std::vector<std::string> device_ids, GatewayOptions options)
    : ledger_(ledger),
      admin_(std::move(admin)),
      params_(std::move(params)),
      device_ids_(std::move(device_ids)),
      known_(device_ids_.begin(), device_ids_.end()),
      options_(std::move(options)) {
  for (const auto& id : device_ids_) buffers_[id].device_id = id;
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

Error Gateway::Reject(const std::string& device_id, Error error) {
  ++rejections_[device_id];
  return error;
}

Result<std::uint8_t> Gateway::KeyFor(const std::string& device_id) {
  if (auto it = keys_.find(device_id); it != keys_.end()) return it->second;
  auto rec = ledger_.Query(
      admin_, contract::kReadDevice,
      {params_.collection_devices, device_id});
  if (!rec) return rec.error();
  auto d = DeviceFromJson(*rec);
  if (!d) return d.error();
  keys_[device_id] = d->decrypt_key;
  return d->decrypt_key;
}

Result<Observation> Gateway::Ingest(const crypto::Envelope& env,
                                    std::optional<std::string_view> channel_device_id) {
  const std::string& claimed = env.device_id;
  const std::string expected =
      channel_device_id ? std::string(*channel_device_id) : claimed;
  if (!known_.contains(expected)) {
    return Reject(claimed, MakeError(ErrorCode::kUnknownDevice, expected));
  }
  auto key = KeyFor(expected);
  if (!key) {
    return Reject(claimed, MakeError(ErrorCode::kUnknownDevice,
                                     expected + ": " + key.error().ToString()));
  }
  auto line = crypto::Open(env, *key, expected);
  if (!line) return Reject(claimed, line.error());
  auto obs = devicesim::ParseLogLine(*line);
  if (!obs) return Reject(claimed, obs.error());
  // The decrypted record must speak for the device that sent it.
  if (obs->device_id != expected) {
    return Reject(claimed, MakeError(ErrorCode::kAuthenticityFailure,
                                     "payload claims device '" + obs->device_id +
                                         "', sender is '" + expected + "'"));
  }

  auto& buf = buffers_[expected];
  if (buf.pending.size() < static_cast<std::size_t>(params_.batch_size)) {
    buf.pending.push_back(*obs);
  } else {
    backlog_[expected].push_back(*obs);
  }
  return obs;
}

bool Gateway::AllReady() const {
  if (device_ids_.empty()) return false;
  for (const auto& id : device_ids_) {
    if (buffers_.at(id).pending.size() < static_cast<std::size_t>(params_.batch_size)) {
      return false;
    }
  }
  return true;
}

const DeviceBuffer& Gateway::buffer(const std::string& device_id) const {
  return buffers_.at(device_id);
}

std::size_t Gateway::backlog(const std::string& device_id) const {
  auto it = backlog_.find(device_id);
  return it == backlog_.end() ? 0 : it->second.size();
}

std::vector<std::string> Gateway::Ordered() const {
  auto order = device_ids_;
  if (options_.reorder) options_.reorder(order);
  return order;
}

std::optional<std::pair<std::string, Error>> Gateway::RunPhase(
    const std::vector<std::string>& order,
    const std::function<Result<Json>(const std::string&)>& step) {
  std::vector<std::optional<Error>> errors(order.size());
  if (options_.parallel_submit) {
    std::vector<std::future<Result<Json>>> pending;
    pending.reserve(order.size());
    for (const auto& id : order) {
      pending.push_back(std::async(std::launch::async, step, id));
    }
    for (std::size_t i = 0; i < pending.size(); ++i) {
      auto r = pending[i].get();
      if (!r) errors[i] = r.error();
    }
  } else {
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto r = step(order[i]);
      if (!r) {
        errors[i] = r.error();
        break;
      }
    }
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (errors[i]) return std::make_pair(order[i], *errors[i]);
  }
  return std::nullopt;
}

Result<CycleReport> Gateway::RunCycle() {
  if (!AllReady()) {
    return MakeError(ErrorCode::kInvalidArgument, "not every device has a full batch");
  }
  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  CycleReport report;
  report.cycle = ++cycles_;
  for (const auto& id : device_ids_) {
    auto& buf = buffers_[id];
    report.batches[id] = *FlushBatch(buf, params_);
    auto& extra = backlog_[id];
    while (!extra.empty() &&
           buf.pending.size() < static_cast<std::size_t>(params_.batch_size)) {
      buf.pending.push_back(extra.front());
      extra.pop_front();
    }
  }
  const auto& devices = params_.collection_devices;

  auto abort = [&](int phase, std::pair<std::string, Error> failure) {
    report.aborted_phase = phase;
    report.aborted_device = failure.first;
    report.abort_error = failure.second.ToString();
    report.rejections = rejections_;
    return report;
  };

  auto t0 = Clock::now();
  auto failed = RunPhase(Ordered(), [&](const std::string& id) {
    const auto& b = report.batches.at(id);
    auto call = contract::UpdateObservation(devices, id, b.dist_mm, b.conf);
    return ledger_.Submit(admin_, call.op, call.args, call.transient);
  });
  report.phase1_ms = ms_since(t0);
  if (failed) return abort(1, *failed);

  t0 = Clock::now();
  failed = RunPhase(Ordered(), [&](const std::string& id) {
    auto call = contract::UpdateTrustState(devices, id);
    return ledger_.Submit(admin_, call.op, call.args, call.transient);
  });
  report.phase2_ms = ms_since(t0);
  if (failed) return abort(2, *failed);

  t0 = Clock::now();
  auto call = contract::CalculatePosition(devices, params_.collection_target);
  auto pos = ledger_.Submit(admin_, call.op, call.args, call.transient);
  report.phase3_ms = ms_since(t0);
  if (pos) {
    report.position = Point{(*pos)["target"]["x"].get<double>(),
                            (*pos)["target"]["y"].get<double>()};
    report.residual = (*pos)["residual"].get<double>();
    report.anchors = (*pos)["anchors"].get<std::vector<std::string>>();
  } else {
    report.failure = pos.error().ToString();
  }

  for (const auto& id : device_ids_) {
    auto rec = ledger_.Query(admin_, contract::kReadDevice, {devices, id});
    if (!rec) continue;
    auto d = DeviceFromJson(*rec);
    if (d) report.devices[id] = {d->evi, d->rep, d->trust};
  }
  report.rejections = rejections_;
  return report;
}

std::vector<CycleReport> Gateway::PollLoop(FeedSource& feed, std::stop_token stop) {
  std::vector<CycleReport> reports;
  while (!stop.stop_requested()) {
    for (const auto& line : feed.Poll()) {
      auto env = crypto::DecodeEnvelopeLine(line);
      if (!env) {
        Reject("<malformed>", env.error());
        continue;
      }
      if (!Ingest(*env)) continue;
      if (AllReady()) {
        auto report = RunCycle();
        if (report) reports.push_back(std::move(report).value());
      }
    }
    if (feed.Closed()) break;
    options_.sleep(std::chrono::milliseconds(params_.time_read_obs_ms));
  }
  return reports;
}

}  // namespace trustloc::gateway
