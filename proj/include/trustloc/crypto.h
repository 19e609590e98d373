#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trustloc/status.h"

namespace trustloc::crypto {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

Bytes ToBytes(std::string_view s);
std::string ToString(std::span<const std::uint8_t> bytes);

std::string HexEncode(std::span<const std::uint8_t> bytes);
Result<Bytes> HexDecode(std::string_view hex);
Result<Digest> DigestFromHex(std::string_view hex);

// Single-byte XOR cipher. Every byte except the final one is XORed with
// `key`; the final byte passes through untouched. Applying it twice with
// the same key yields the input.
Bytes XorTransform(std::span<const std::uint8_t> data, std::uint8_t key);

// SHA-256.
Digest ComputeDigest(std::span<const std::uint8_t> data);
Digest ComputeDigest(std::string_view data);

// Device-to-gateway message. The device id travels in cleartext so the
// gateway can pick the key before decrypting.
struct Envelope {
  std::string device_id;
  Digest digest{};
  Bytes payload;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

Result<Envelope> Seal(std::string_view observation_line,
                      std::string_view device_id, std::uint8_t key);

// Fails with kAuthenticityFailure when the envelope id does not match
// `expected_device_id`, and kIntegrityFailure when the decrypted payload
// does not hash to the carried digest.
Result<std::string> Open(const Envelope& env, std::uint8_t key,
                         std::string_view expected_device_id);

// One JSON object per line: {"digest":<64 hex>,"id":...,"payload":<hex>}.
std::string EncodeEnvelopeLine(const Envelope& env);
Result<Envelope> DecodeEnvelopeLine(std::string_view line);

}  // namespace trustloc::crypto
