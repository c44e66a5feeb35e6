#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace empdis {

// Incremental FNV-1a (64 bit). Used for dataset identities, train
// fingerprints and combiner fit fingerprints. Stable across runs; the
// determinism contracts compare these values between executions.
class Fingerprint {
 public:
  Fingerprint& update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  Fingerprint& update(std::string_view s) {
    update_u64(s.size());
    return update(s.data(), s.size());
  }

  Fingerprint& update_u64(std::uint64_t v) { return update(&v, sizeof v); }

  Fingerprint& update_i64(std::int64_t v) { return update(&v, sizeof v); }

  Fingerprint& update_double(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return update_u64(bits);
  }

  Fingerprint& update_doubles(const std::vector<double>& vs) {
    update_u64(vs.size());
    for (double v : vs) update_double(v);
    return *this;
  }

  std::uint64_t digest() const { return state_; }

  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string fingerprint_hex(std::uint64_t value);

}  // namespace empdis
