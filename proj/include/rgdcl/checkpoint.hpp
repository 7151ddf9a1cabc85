#pragma once

// Binary model checkpoints.
//
// Layout (all integers little-endian):
//   8 bytes  magic "RGDCLM01"
//   u64      seed
//   u64      context_len, embed_dim, hidden_dim
//   u64      flags (bit 0: direct window-to-output connections)
//   u64      vocabulary size, then per token: u32 byte length + UTF-8 bytes
//   u64      parameter count, then each parameter as IEEE-754 binary64 bits
// Parameters are stored as raw bit patterns, so load(save(m)) == m exactly.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rgdcl/error.hpp"
#include "rgdcl/tinylm.hpp"

namespace rgdcl {

namespace detail {

inline constexpr std::array<char, 8> checkpoint_magic{'R', 'G', 'D', 'C', 'L', 'M', '0', '1'};

inline void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xffU));
}

inline void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xffU));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return take(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    require(bytes_.size() - pos_ >= n, Errc::parse_error, "checkpoint truncated at byte " + std::to_string(pos_));
  }

  std::uint64_t take(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t x = 0;
    for (int i = 0; i < n; ++i) {
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return x;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const ModelState& m) {
  std::string out(detail::checkpoint_magic.begin(), detail::checkpoint_magic.end());
  detail::put_u64(out, m.seed());
  detail::put_u64(out, m.context_len());
  detail::put_u64(out, m.embed_dim());
  detail::put_u64(out, m.hidden_dim());
  detail::put_u64(out, m.has_direct() ? 1U : 0U);
  detail::put_u64(out, m.vocab_size());
  for (const auto& tok : m.vocab().tokens()) {
    detail::put_u32(out, static_cast<std::uint32_t>(tok.size()));
    out += tok;
  }
  detail::put_u64(out, m.parameter_count());
  for (double p : m.params()) detail::put_u64(out, std::bit_cast<std::uint64_t>(p));
  return out;
}

inline ModelState deserialize_model(const std::string& bytes) {
  detail::ByteReader in(bytes);
  const std::string magic = in.str(detail::checkpoint_magic.size());
  require(std::equal(magic.begin(), magic.end(), detail::checkpoint_magic.begin()), Errc::parse_error,
          "not a model checkpoint (bad magic)");
  const std::uint64_t seed = in.u64();
  const std::uint64_t ctx = in.u64();
  const std::uint64_t embed = in.u64();
  const std::uint64_t hidden = in.u64();
  const std::uint64_t flags = in.u64();
  require(flags <= 1, Errc::parse_error, "unknown checkpoint flags");
  const std::uint64_t vsize = in.u64();
  require(vsize < (1ULL << 24), Errc::parse_error, "implausible vocabulary size in checkpoint");
  std::vector<std::string> tokens;
  tokens.reserve(vsize);
  for (std::uint64_t i = 0; i < vsize; ++i) tokens.push_back(in.str(in.u32()));
  const std::vector<std::string> reserved{"<pad>", "<bos>", "<eos>", "<unk>"};
  require(vsize >= reserved.size() && std::equal(reserved.begin(), reserved.end(), tokens.begin()),
          Errc::parse_error, "checkpoint vocabulary lacks the reserved tokens");
  Vocab vocab(std::span<const std::string>(tokens).subspan(reserved.size()));
  require(vocab.size() == vsize, Errc::parse_error, "checkpoint vocabulary has duplicate tokens");

  ModelState m(std::move(vocab), ctx, embed, hidden, seed, flags == 1);
  const std::uint64_t count = in.u64();
  require(count == m.parameter_count(), Errc::parse_error, "checkpoint parameter count does not match dimensions");
  for (double& p : m.params()) p = std::bit_cast<double>(in.u64());
  require(in.at_end(), Errc::parse_error, "trailing bytes after checkpoint");
  require(m.all_finite(), Errc::parse_error, "checkpoint holds non-finite parameters");
  return m;
}

inline void save_model(const ModelState& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::io_error, "cannot open " + path.string() + " for writing");
  const std::string bytes = serialize_model(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::io_error, "write failed for " + path.string());
}

inline ModelState load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io_error, "cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace rgdcl
