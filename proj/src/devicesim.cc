#include "trustloc/devicesim.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "trustloc/crypto.h"
#include "trustloc/localization.h"
#include "trustloc/trust.h"

namespace trustloc::devicesim {

Status ValidateSimConfig(const SimConfig& cfg) {
  if (cfg.anchors.empty()) {
    return MakeError(ErrorCode::kInvalidArgument, "no anchors");
  }
  if (!(cfg.range_noise_sigma_mm >= 0)) {
    return MakeError(ErrorCode::kInvalidArgument, "range_noise_sigma < 0");
  }
  if (!(cfg.path_loss_exponent > 0)) {
    return MakeError(ErrorCode::kInvalidArgument, "path_loss_exponent <= 0");
  }
  if (cfg.target.id.empty()) {
    return MakeError(ErrorCode::kInvalidArgument, "empty target id");
  }
  for (const auto& a : cfg.anchors) {
    if (a.id.empty() || a.id.find(' ') != std::string::npos) {
      return MakeError(ErrorCode::kInvalidArgument, "bad anchor id '" + a.id + "'");
    }
    if (a.override_distance_mm && *a.override_distance_mm < 0) {
      return MakeError(ErrorCode::kInvalidArgument,
                       "negative override distance for anchor " + a.id);
    }
  }
  return OkStatus();
}

Json ToJson(const SimConfig& cfg) {
  Json anchors = Json::array();
  for (const auto& a : cfg.anchors) {
    Json j{{"id", a.id}, {"x", a.position.x}, {"y", a.position.y}, {"key", a.key}};
    if (a.override_distance_mm) j["override_distance_mm"] = *a.override_distance_mm;
    if (a.override_confidence) j["override_confidence"] = *a.override_confidence;
    anchors.push_back(std::move(j));
  }
  return Json{{"anchors", std::move(anchors)},
              {"target",
               {{"id", cfg.target.id},
                {"x", cfg.target.position.x},
                {"y", cfg.target.position.y}}},
              {"range_noise_sigma_mm", cfg.range_noise_sigma_mm},
              {"rssi_ref_dbm", cfg.rssi_ref_dbm},
              {"path_loss_exponent", cfg.path_loss_exponent},
              {"seed", cfg.seed}};
}

namespace {

// Keys accept either a one-character string ("P") or a byte value.
std::uint8_t KeyFromJson(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.size() != 1) throw Json::type_error::create(302, "key must be one character", &j);
    return static_cast<std::uint8_t>(s[0]);
  }
  return j.get<std::uint8_t>();
}

}  // namespace

Result<SimConfig> SimConfigFromJson(const Json& j) {
  try {
    SimConfig cfg;
    for (const auto& aj : j.at("anchors")) {
      SimAnchor a;
      a.id = aj.at("id").get<std::string>();
      a.position = {aj.at("x").get<double>(), aj.at("y").get<double>()};
      a.key = KeyFromJson(aj.at("key"));
      if (aj.contains("override_distance_mm")) {
        a.override_distance_mm = aj.at("override_distance_mm").get<std::int64_t>();
      }
      if (aj.contains("override_confidence")) {
        a.override_confidence = aj.at("override_confidence").get<double>();
      }
      cfg.anchors.push_back(std::move(a));
    }
    const auto& t = j.at("target");
    cfg.target.id = t.at("id").get<std::string>();
    cfg.target.position = {t.at("x").get<double>(), t.at("y").get<double>()};
    cfg.range_noise_sigma_mm = j.value("range_noise_sigma_mm", 0.0);
    cfg.rssi_ref_dbm = j.value("rssi_ref_dbm", -40.0);
    cfg.path_loss_exponent = j.value("path_loss_exponent", 2.0);
    cfg.seed = j.value("seed", std::uint64_t{1});
    if (auto s = ValidateSimConfig(cfg); !s) return s.error();
    return cfg;
  } catch (const Json::exception& e) {
    return MakeError(ErrorCode::kParseError, std::string("sim config: ") + e.what());
  }
}

double Rssi(const SimConfig& cfg, double distance_m) {
  return cfg.rssi_ref_dbm -
         10.0 * cfg.path_loss_exponent * std::log10(std::max(distance_m, 0.1));
}

std::string RenderLogLine(const Observation& obs) {
  char conf[64];
  std::snprintf(conf, sizeof(conf), "%.6f", obs.confidence);
  std::string c(conf);
  while (c.size() > 1 && c.back() == '0' && c[c.size() - 2] != '.') c.pop_back();
  return "OBS " + obs.device_id + " " + obs.target_id + " " +
         std::to_string(obs.distance_mm) + " " + c + "\n";
}

namespace {

Error ParseErrorAt(std::size_t offset, std::string_view what) {
  return MakeError(ErrorCode::kParseError,
                   "offset " + std::to_string(offset) + ": " + std::string(what));
}

}  // namespace

Result<Observation> ParseLogLine(std::string_view line) {
  if (line.ends_with('\n')) line.remove_suffix(1);

  std::vector<std::pair<std::size_t, std::string_view>> fields;
  std::size_t pos = 0;
  while (true) {
    const auto end = line.find(' ', pos);
    const auto field = line.substr(pos, end == std::string_view::npos ? end : end - pos);
    if (field.empty()) return ParseErrorAt(pos, "empty field");
    fields.emplace_back(pos, field);
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  if (fields[0].second != "OBS") return ParseErrorAt(0, "expected 'OBS'");
  if (fields.size() != 5) {
    return ParseErrorAt(fields.back().first, "expected 5 fields");
  }

  Observation obs;
  obs.device_id = std::string(fields[1].second);
  obs.target_id = std::string(fields[2].second);

  const auto [dist_off, dist] = fields[3];
  if (dist.front() == '-') return ParseErrorAt(dist_off, "negative distance");
  auto [dend, dec] = std::from_chars(dist.data(), dist.data() + dist.size(),
                                     obs.distance_mm);
  if (dec != std::errc() || dend != dist.data() + dist.size()) {
    return ParseErrorAt(dist_off + (dend - dist.data()), "bad distance");
  }

  const auto [conf_off, conf] = fields[4];
  auto [cend, cec] = std::from_chars(conf.data(), conf.data() + conf.size(),
                                     obs.confidence);
  if (cec != std::errc() || cend != conf.data() + conf.size() ||
      !std::isfinite(obs.confidence)) {
    return ParseErrorAt(conf_off + (cend - conf.data()), "bad confidence");
  }
  return obs;
}

namespace {

class AnchorStream {
 public:
  AnchorStream(const SimConfig& cfg, std::size_t index)
      : cfg_(cfg), anchor_(cfg.anchors[index]) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                      static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(index)};
    rng_.seed(seq);
  }

  std::string NextLine(const ExperimentParams& params) {
    using localization::kSpeedOfLight;
    const double true_m = Distance(anchor_.position, cfg_.target.position);
    double noise_m = 0.0;
    if (cfg_.range_noise_sigma_mm > 0) {
      std::normal_distribution<double> noise(0.0, cfg_.range_noise_sigma_mm / 1000.0);
      noise_m = noise(rng_);
    }
    const double ranged_m = std::max(0.0, true_m + noise_m);
    const double t2 = kTurnaroundSeconds;
    const double t1 = t2 + 2.0 * ranged_m / kSpeedOfLight;
    const double meters = localization::TofDistance(t1, t2).value();

    Observation obs;
    obs.device_id = anchor_.id;
    obs.target_id = cfg_.target.id;
    obs.distance_mm = anchor_.override_distance_mm
                          ? *anchor_.override_distance_mm
                          : static_cast<std::int64_t>(std::floor(meters * 1000.0 + 0.5));
    obs.confidence = anchor_.override_confidence
                         ? *anchor_.override_confidence
                         : trust::Confidence(Rssi(cfg_, true_m), params);
    return RenderLogLine(obs);
  }

 private:
  const SimConfig& cfg_;
  const SimAnchor& anchor_;
  std::mt19937_64 rng_;
};

}  // namespace

Result<std::vector<std::string>> SimulateRanging(const SimConfig& cfg,
                                                 std::string_view anchor_id,
                                                 int rounds,
                                                 const ExperimentParams& params) {
  for (std::size_t i = 0; i < cfg.anchors.size(); ++i) {
    if (cfg.anchors[i].id != anchor_id) continue;
    AnchorStream stream(cfg, i);
    std::vector<std::string> lines;
    for (int r = 0; r < rounds; ++r) lines.push_back(stream.NextLine(params));
    return lines;
  }
  return MakeError(ErrorCode::kUnknownAnchor, std::string(anchor_id));
}

Result<Feed> EmitFeed(const SimConfig& cfg, int rounds,
                      const ExperimentParams& params) {
  if (auto s = ValidateSimConfig(cfg); !s) return s.error();
  std::vector<AnchorStream> streams;
  streams.reserve(cfg.anchors.size());
  for (std::size_t i = 0; i < cfg.anchors.size(); ++i) streams.emplace_back(cfg, i);

  Feed feed;
  for (int r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < cfg.anchors.size(); ++i) {
      auto line = streams[i].NextLine(params);
      auto env = crypto::Seal(line, cfg.anchors[i].id, cfg.anchors[i].key);
      if (!env) return env.error();
      feed.envelope_lines.push_back(crypto::EncodeEnvelopeLine(*env));
      feed.log_lines.push_back(std::move(line));
    }
  }
  return feed;
}

Status WriteFeed(const Feed& feed, const std::filesystem::path& log_path,
                 const std::filesystem::path& feed_path) {
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  std::ofstream out(feed_path, std::ios::binary | std::ios::trunc);
  if (!log || !out) {
    return MakeError(ErrorCode::kIoError, "cannot open feed output files");
  }
  for (const auto& l : feed.log_lines) log << l;
  for (const auto& e : feed.envelope_lines) out << e << '\n';
  if (!log.flush() || !out.flush()) {
    return MakeError(ErrorCode::kIoError, "write failed");
  }
  return OkStatus();
}

}  // namespace trustloc::devicesim
