#include "embkit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "embkit/errors.hpp"

namespace embkit {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'K', 'C', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kFlagHead = 0x01;
constexpr std::uint8_t kFlagMoments = 0x02;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw FormatError("cannot open for write: " + path.string());
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void f64s(const std::vector<double>& v) { bytes(v.data(), v.size() * 8); }

  void close() {
    out_.flush();
    if (!out_) throw FormatError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path_);
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void bytes(void* p, std::size_t n) {
    if (pos_ + n > buf_.size())
      throw FormatError(path_ + ": truncated at byte " + std::to_string(pos_) +
                        " (needed " + std::to_string(n) + " more)");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
  std::int64_t i64() { std::int64_t v; bytes(&v, 8); return v; }
  double f64() { double v; bytes(&v, 8); return v; }
  void f64s(std::vector<double>& v, std::size_t n) {
    v.resize(n);
    bytes(v.data(), n * 8);
  }

  void expect_end() const {
    if (pos_ != buf_.size())
      throw FormatError(path_ + ": " + std::to_string(buf_.size() - pos_) +
                        " trailing bytes after checkpoint payload");
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

void write_affine(Writer& w, const Affine& a) {
  w.u32(static_cast<std::uint32_t>(a.in));
  w.u32(static_cast<std::uint32_t>(a.out));
  w.f64s(a.w);
  w.f64s(a.b);
}

Affine read_affine(Reader& r) {
  Affine a;
  a.in = static_cast<int>(r.u32());
  a.out = static_cast<int>(r.u32());
  if (a.in < 1 || a.out < 1)
    throw FormatError(r.path() + ": affine block with non-positive shape");
  const std::size_t wn = static_cast<std::size_t>(a.in) * static_cast<std::size_t>(a.out);
  r.f64s(a.w, wn);
  r.f64s(a.b, static_cast<std::size_t>(a.out));
  return a;
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  validate(ckpt.encoder.config);
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  std::uint8_t flags = 0;
  if (ckpt.head) flags |= kFlagHead;
  if (ckpt.moments) flags |= kFlagMoments;
  w.u8(flags);

  const EncoderConfig& cfg = ckpt.encoder.config;
  w.u32(static_cast<std::uint32_t>(cfg.dim_in));
  w.u32(static_cast<std::uint32_t>(cfg.backbone_widths.size()));
  for (int width : cfg.backbone_widths) w.u32(static_cast<std::uint32_t>(width));
  w.u8(cfg.with_projection ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(cfg.projection_width));
  w.u32(static_cast<std::uint32_t>(cfg.embed_dim));
  w.f64(cfg.dropout_rate);
  w.u64(cfg.seed);
  w.u8(ckpt.encoder.frozen_backbone ? 1 : 0);
  w.u64(ckpt.encoder.revision);

  for (const Affine& a : ckpt.encoder.backbone) write_affine(w, a);
  if (ckpt.encoder.projection) write_affine(w, *ckpt.encoder.projection);
  write_affine(w, ckpt.encoder.neck);

  if (ckpt.head) {
    w.u32(static_cast<std::uint32_t>(ckpt.head->class_count));
    w.u32(static_cast<std::uint32_t>(ckpt.head->embed_dim));
    w.f64(ckpt.head->scale);
    w.f64s(ckpt.head->weights);
  }
  if (ckpt.moments) {
    w.i64(ckpt.moments->t);
    w.u32(static_cast<std::uint32_t>(ckpt.moments->blocks.size()));
    for (const Moments& m : ckpt.moments->blocks) {
      w.u64(static_cast<std::uint64_t>(m.m.size()));
      w.f64s(m.m);
      w.f64s(m.v);
    }
  }
  w.close();
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(r.path() + ": bad magic (expected EKC1)");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError(r.path() + ": unsupported checkpoint version " +
                      std::to_string(version));
  const std::uint8_t flags = r.u8();
  if (flags & ~(kFlagHead | kFlagMoments))
    throw FormatError(r.path() + ": unknown section flags");

  Checkpoint ckpt;
  EncoderConfig cfg;
  cfg.dim_in = static_cast<int>(r.u32());
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > 64)
    throw FormatError(r.path() + ": implausible backbone layer count " +
                      std::to_string(layers));
  cfg.backbone_widths.resize(layers);
  for (auto& width : cfg.backbone_widths) width = static_cast<int>(r.u32());
  cfg.with_projection = r.u8() != 0;
  cfg.projection_width = static_cast<int>(r.u32());
  cfg.embed_dim = static_cast<int>(r.u32());
  cfg.dropout_rate = r.f64();
  cfg.seed = r.u64();
  validate(cfg);
  ckpt.encoder.config = cfg;
  ckpt.encoder.frozen_backbone = r.u8() != 0;
  ckpt.encoder.revision = r.u64();

  ckpt.encoder.backbone.reserve(layers);
  for (std::uint32_t i = 0; i < layers; ++i)
    ckpt.encoder.backbone.push_back(read_affine(r));
  if (cfg.with_projection) ckpt.encoder.projection = read_affine(r);
  ckpt.encoder.neck = read_affine(r);

  if (flags & kFlagHead) {
    ArcFaceParams head;
    head.class_count = static_cast<int>(r.u32());
    head.embed_dim = static_cast<int>(r.u32());
    head.scale = r.f64();
    if (head.class_count < 1 || head.embed_dim < 1)
      throw FormatError(r.path() + ": head block with non-positive shape");
    r.f64s(head.weights, static_cast<std::size_t>(head.class_count) *
                             static_cast<std::size_t>(head.embed_dim));
    ckpt.head = std::move(head);
  }
  if (flags & kFlagMoments) {
    AdamWMoments mom;
    mom.t = r.i64();
    const std::uint32_t blocks = r.u32();
    mom.blocks.resize(blocks);
    for (Moments& m : mom.blocks) {
      const std::uint64_t n = r.u64();
      r.f64s(m.m, static_cast<std::size_t>(n));
      r.f64s(m.v, static_cast<std::size_t>(n));
    }
    ckpt.moments = std::move(mom);
  }
  r.expect_end();
  return ckpt;
}

}  // namespace embkit
