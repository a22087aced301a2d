#include "vufold/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace vufold {

namespace {

constexpr char kMagic[4] = {'G', 'V', 'O', 'L'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void i16(std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    bytes_.push_back(static_cast<std::uint8_t>(u & 0xFF));
    bytes_.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }
  void reserve(std::size_t n) { bytes_.reserve(n); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() { return bytes_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * b);
    return v;
  }
  std::int16_t i16() {
    const auto lo = static_cast<std::uint16_t>(bytes_[pos_++]);
    const auto hi = static_cast<std::uint16_t>(bytes_[pos_++]);
    return static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
  }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void validate_for_write(const Volume<T>& volume) {
  const GridDims& d = volume.dims();
  if (!d.valid() || volume.data().size() != d.count()) {
    throw FormatError("cannot write volume: dimensions must be positive and match the data");
  }
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(volume.spacing()[a]) || volume.spacing()[a] <= 0.0) {
      throw FormatError("cannot write volume: spacing must be finite and positive");
    }
  }
}

template <typename T>
void write_header(ByteWriter& w, const Volume<T>& volume, VolumeDtype dtype) {
  w.raw(kMagic, 4);
  w.u32(kGvolVersion);
  w.u8(static_cast<std::uint8_t>(dtype));
  w.u32(static_cast<std::uint32_t>(volume.dims().nx));
  w.u32(static_cast<std::uint32_t>(volume.dims().ny));
  w.u32(static_cast<std::uint32_t>(volume.dims().nz));
  for (int a = 0; a < 3; ++a) w.f64(volume.spacing()[a]);
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const ScalarVolume& volume) {
  validate_for_write(volume);
  ByteWriter w;
  w.reserve(kGvolHeaderSize + 2 * volume.data().size());
  write_header(w, volume, VolumeDtype::kInt16);
  for (std::int16_t v : volume.data()) w.i16(v);
  return w.take();
}

std::vector<std::uint8_t> encode_volume(const LabelVolume& volume) {
  validate_for_write(volume);
  ByteWriter w;
  w.reserve(kGvolHeaderSize + volume.data().size());
  write_header(w, volume, VolumeDtype::kUint8);
  for (std::uint8_t v : volume.data()) w.u8(v);
  return w.take();
}

AnyVolume decode_volume(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (!r.has(4) || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic: expected \"GVOL\"");
  }
  for (int b = 0; b < 4; ++b) r.u8();
  if (!r.has(kGvolHeaderSize - 4)) throw FormatError("truncated header");
  const std::uint32_t version = r.u32();
  if (version != kGvolVersion) {
    throw FormatError("unsupported version " + std::to_string(version));
  }
  const std::uint8_t dtype = r.u8();
  if (dtype > 1) throw FormatError("unknown dtype code " + std::to_string(dtype));
  const std::uint32_t nx = r.u32(), ny = r.u32(), nz = r.u32();
  Vec3 spacing;
  for (int a = 0; a < 3; ++a) spacing[a] = r.f64();
  constexpr std::uint32_t kMaxDim = 1u << 20;
  if (nx == 0 || ny == 0 || nz == 0 || nx > kMaxDim || ny > kMaxDim || nz > kMaxDim) {
    throw FormatError("non-positive or oversized dimensions");
  }
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(spacing[a]) || spacing[a] <= 0.0) {
      throw FormatError("non-positive spacing");
    }
  }
  const GridDims dims{static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz)};
  const std::size_t count = dims.count();
  const std::size_t width = dtype == 0 ? 2 : 1;
  if (r.remaining() < count * width) throw FormatError("truncated payload");
  if (r.remaining() > count * width) throw FormatError("trailing bytes after payload");

  if (dtype == static_cast<std::uint8_t>(VolumeDtype::kInt16)) {
    std::vector<std::int16_t> data(count);
    for (auto& v : data) v = r.i16();
    return ScalarVolume(dims, spacing, std::move(data));
  }
  std::vector<std::uint8_t> data(count);
  for (auto& v : data) v = r.u8();
  return LabelVolume(dims, spacing, std::move(data));
}

AnyVolume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_volume(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ScalarVolume read_scalar_volume(const std::filesystem::path& path) {
  AnyVolume v = read_volume(path);
  if (auto* s = std::get_if<ScalarVolume>(&v)) return std::move(*s);
  throw FormatError(path.string() + ": expected an int16 scalar volume");
}

LabelVolume read_label_volume(const std::filesystem::path& path) {
  AnyVolume v = read_volume(path);
  if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
  throw FormatError(path.string() + ": expected a uint8 label volume");
}

void write_volume(const ScalarVolume& volume, const std::filesystem::path& path) {
  write_bytes(encode_volume(volume), path);
}

void write_volume(const LabelVolume& volume, const std::filesystem::path& path) {
  write_bytes(encode_volume(volume), path);
}

}  // namespace vufold
