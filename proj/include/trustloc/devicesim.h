#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trustloc/domain.h"

namespace trustloc::devicesim {

struct SimAnchor {
  std::string id;
  Point position;
  std::uint8_t key = 0;
  // Fault injection: report this distance / confidence regardless of
  // geometry, e.g. a device with a broken radio or firmware.
  std::optional<std::int64_t> override_distance_mm;
  std::optional<double> override_confidence;
};

struct SimTarget {
  std::string id;
  Point position;
};

struct SimConfig {
  std::vector<SimAnchor> anchors;
  SimTarget target;
  double range_noise_sigma_mm = 0.0;
  double rssi_ref_dbm = -40.0;  // at 1 m
  double path_loss_exponent = 2.0;
  std::uint64_t seed = 1;
};

Status ValidateSimConfig(const SimConfig& cfg);
Json ToJson(const SimConfig& cfg);
Result<SimConfig> SimConfigFromJson(const Json& j);

// Responder turnaround used to synthesize two-way-ranging timestamps.
inline constexpr double kTurnaroundSeconds = 1e-3;

// Log-distance path loss, distance floored at 0.1 m.
double Rssi(const SimConfig& cfg, double distance_m);

// "OBS <device> <target> <distance_mm> <confidence>\n"
std::string RenderLogLine(const Observation& obs);
// Accepts the line with or without its trailing newline. Errors are
// kParseError with the detail starting "offset <n>".
Result<Observation> ParseLogLine(std::string_view line);

// `rounds` ranging exchanges between one anchor and the target, rendered
// as log lines. Each anchor draws noise from its own stream derived from
// the config seed, so output does not depend on which anchors run.
Result<std::vector<std::string>> SimulateRanging(const SimConfig& cfg,
                                                 std::string_view anchor_id,
                                                 int rounds,
                                                 const ExperimentParams& params);

struct Feed {
  std::vector<std::string> log_lines;       // plaintext OBS lines
  std::vector<std::string> envelope_lines;  // sealed, one JSON object each
};

// All anchors, interleaved round-robin by round.
Result<Feed> EmitFeed(const SimConfig& cfg, int rounds,
                      const ExperimentParams& params);

Status WriteFeed(const Feed& feed, const std::filesystem::path& log_path,
                 const std::filesystem::path& feed_path);

}  // namespace trustloc::devicesim
