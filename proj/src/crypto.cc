#include "trustloc/crypto.h"

#include <openssl/sha.h>

#include "trustloc/domain.h"

namespace trustloc::crypto {

Bytes ToBytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string ToString(std::span<const std::uint8_t> bytes) {
  return std::string(bytes.begin(), bytes.end());
}

std::string HexEncode(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;  // uppercase is not canonical
}

}  // namespace

Result<Bytes> HexDecode(std::string_view hex) {
  if (hex.size() % 2 != 0) {
    return MakeError(ErrorCode::kParseError, "odd-length hex string");
  }
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = HexValue(hex[i]);
    int lo = HexValue(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      return MakeError(ErrorCode::kParseError,
                       "invalid hex digit at offset " + std::to_string(i));
    }
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

Result<Digest> DigestFromHex(std::string_view hex) {
  if (hex.size() != 64) {
    return MakeError(ErrorCode::kParseError, "digest must be 64 hex chars");
  }
  auto bytes = HexDecode(hex);
  if (!bytes) return bytes.error();
  Digest d;
  std::copy(bytes->begin(), bytes->end(), d.begin());
  return d;
}

Bytes XorTransform(std::span<const std::uint8_t> data, std::uint8_t key) {
  Bytes out(data.begin(), data.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i != out.size() - 1) out[i] ^= key;
  }
  return out;
}

Digest ComputeDigest(std::span<const std::uint8_t> data) {
  Digest d;
  SHA256(data.data(), data.size(), d.data());
  return d;
}

Digest ComputeDigest(std::string_view data) {
  return ComputeDigest(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

Result<Envelope> Seal(std::string_view observation_line,
                      std::string_view device_id, std::uint8_t key) {
  if (device_id.empty()) {
    return MakeError(ErrorCode::kInvalidDevice, "empty device id");
  }
  Bytes plain = ToBytes(observation_line);
  Envelope env;
  env.device_id = std::string(device_id);
  env.digest = ComputeDigest(plain);
  env.payload = XorTransform(plain, key);
  return env;
}

Result<std::string> Open(const Envelope& env, std::uint8_t key,
                         std::string_view expected_device_id) {
  if (env.device_id != expected_device_id) {
    return MakeError(ErrorCode::kAuthenticityFailure,
                     "envelope id '" + env.device_id + "' != expected '" +
                         std::string(expected_device_id) + "'");
  }
  Bytes plain = XorTransform(env.payload, key);
  if (ComputeDigest(plain) != env.digest) {
    return MakeError(ErrorCode::kIntegrityFailure,
                     "digest mismatch for device '" + env.device_id + "'");
  }
  return ToString(plain);
}

std::string EncodeEnvelopeLine(const Envelope& env) {
  return Canonical(Json{{"id", env.device_id},
                        {"digest", HexEncode(env.digest)},
                        {"payload", HexEncode(env.payload)}});
}

Result<Envelope> DecodeEnvelopeLine(std::string_view line) {
  auto j = ParseJson(line);
  if (!j) return j.error();
  if (!j->is_object() || !j->contains("id") || !j->contains("digest") ||
      !j->contains("payload") || !(*j)["id"].is_string() ||
      !(*j)["digest"].is_string() || !(*j)["payload"].is_string()) {
    return MakeError(ErrorCode::kParseError, "envelope fields missing");
  }
  Envelope env;
  env.device_id = (*j)["id"].get<std::string>();
  if (env.device_id.empty()) {
    return MakeError(ErrorCode::kInvalidDevice, "empty device id");
  }
  auto digest = DigestFromHex((*j)["digest"].get<std::string>());
  if (!digest) return digest.error();
  env.digest = *digest;
  auto payload = HexDecode((*j)["payload"].get<std::string>());
  if (!payload) return payload.error();
  env.payload = std::move(payload).value();
  return env;
}

}  // namespace trustloc::crypto
