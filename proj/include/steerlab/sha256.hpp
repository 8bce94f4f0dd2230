#ifndef STEERLAB_SHA256_HPP
#define STEERLAB_SHA256_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace steerlab {

// Streaming SHA-256, used for config hashes and manifest content digests.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  std::string hex_digest();  // finalizes; object not reusable afterwards

  static std::string of_string(const std::string& s);
  static std::string of_file(const std::string& path);  // throws ArtifactError if unreadable

 private:
  void process_block(const std::uint8_t* block);

  std::uint32_t h_[8];
  std::uint8_t buffer_[64];
  std::size_t buffer_len_ = 0;
  std::uint64_t total_len_ = 0;
};

}  // namespace steerlab

#endif  // STEERLAB_SHA256_HPP
