#include "gfmate/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <openssl/evp.h>
#include <zlib.h>

#include "gfmate/error.hpp"

namespace gfmate {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kParamsMagic[4] = {'G', 'F', 'M', 'P'};
constexpr char kPromptsMagic[4] = {'G', 'F', 'M', 'Q'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }

  void finish(const std::filesystem::path& path) {
    const auto crc = static_cast<std::uint32_t>(crc32(0L, buf_.data(), static_cast<uInt>(buf_.size())));
    u32(crc);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) fail(ErrorKind::io, "failed writing " + path.string());
  }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::filesystem::path& path, const char (&magic)[4]) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (buf_.size() < 12 || std::memcmp(buf_.data(), magic, 4) != 0) corrupt("bad header");
    pos_ = 4;
    const std::uint32_t version = u32();
    if (version != kCheckpointVersion)
      fail(ErrorKind::unsupported_version, path.string() + ": checkpoint version " + std::to_string(version) +
                                               ", expected " + std::to_string(kCheckpointVersion));
  }

  std::uint32_t u32() {
    std::uint32_t v = 0;
    take(&v, sizeof v);
    return v;
  }
  void f64s(std::span<double> out) { take(out.data(), out.size() * sizeof(double)); }

  /// Payload must end exactly where the trailing CRC begins.
  void finish() {
    if (buf_.size() != pos_ + 4) corrupt("unexpected size");
    std::uint32_t stored = 0;
    std::memcpy(&stored, buf_.data() + pos_, 4);
    const auto actual = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf_.data()), static_cast<uInt>(pos_)));
    if (stored != actual) corrupt("checksum mismatch");
  }

  /// Guards against shape fields that would imply an absurd payload.
  void expect_payload(std::uint64_t doubles) {
    if (doubles * sizeof(double) + 4 + pos_ != buf_.size()) corrupt("payload size does not match header");
  }

 private:
  [[noreturn]] void corrupt(const std::string& why) {
    fail(ErrorKind::corrupt_checkpoint, path_.string() + ": " + why);
  }
  void take(void* dst, std::size_t n) {
    if (pos_ + n > buf_.size()) corrupt("truncated");
    std::memcpy(dst, buf_.data() + pos_, n);
    pos_ += n;
  }

  std::filesystem::path path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_params(const GcnParams& params, const std::filesystem::path& path) {
  params.validate();
  Writer w;
  w.bytes(kParamsMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.num_layers()));
  w.u32(static_cast<std::uint32_t>(params.dim()));
  for (const auto& m : params.weights) w.f64s(m.data());
  w.finish(path);
}

GcnParams load_params(const std::filesystem::path& path) {
  Reader r(path, kParamsMagic);
  const std::uint32_t layers = r.u32();
  const std::uint32_t dim = r.u32();
  r.expect_payload(static_cast<std::uint64_t>(layers) * dim * dim);
  GcnParams p;
  for (std::uint32_t l = 0; l < layers; ++l) {
    DenseMatrix m(dim, dim);
    r.f64s(m.data());
    p.weights.push_back(std::move(m));
  }
  r.finish();
  p.validate();
  return p;
}

void save_prompts(const Prompts& prompts, const std::filesystem::path& path) {
  if (prompts.beta.empty() || prompts.beta.size() != prompts.eta.size())
    fail(ErrorKind::shape, "save_prompts: inconsistent prompt shapes");
  Writer w;
  w.bytes(kPromptsMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(prompts.beta.size()));
  w.u32(static_cast<std::uint32_t>(prompts.beta.front().rows()));
  w.u32(static_cast<std::uint32_t>(prompts.beta.front().cols()));
  for (const auto& b : prompts.beta) w.f64s(b.data());
  w.f64s(prompts.eta);
  w.finish(path);
}

Prompts load_prompts(const std::filesystem::path& path) {
  Reader r(path, kPromptsMagic);
  const std::uint32_t depth = r.u32();
  const std::uint32_t classes = r.u32();
  const std::uint32_t dim = r.u32();
  r.expect_payload(static_cast<std::uint64_t>(depth) * classes * dim + depth);
  Prompts p;
  for (std::uint32_t l = 0; l < depth; ++l) {
    DenseMatrix b(classes, dim);
    r.f64s(b.data());
    p.beta.push_back(std::move(b));
  }
  p.eta.resize(depth);
  r.f64s(p.eta);
  r.finish();
  return p;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::io, "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace gfmate
