#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace vatika {

// Incremental SHA-256 (FIPS 180-2). Used for prompt hashes, split/plan/artifact
// content digests and manifest digests.
class Sha256 {
 public:
  Sha256() { reset(); }

  void reset();
  void update(const void* data, size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }

  // Finalizes and returns the digest as lowercase hex. The object must be
  // reset() before reuse.
  std::string hex_digest();

 private:
  void process_block(const uint8_t* block);

  std::array<uint32_t, 8> state_;
  uint64_t bit_count_;
  std::array<uint8_t, 64> buffer_;
  size_t buffer_len_;
};

std::string sha256_hex(std::string_view data);

}  // namespace vatika
