#include "tbm/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "tbm/error.hpp"

namespace tbm {
namespace {

template <typename T>
T byteswap_value(T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  std::reverse(b, b + sizeof(T));
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& buf, T v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap_value(v);
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get(bool swap = std::endian::native == std::endian::big) {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw Error(ErrorKind::TruncatedFile, "unexpected end of file at byte " + std::to_string(pos_));
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return swap ? byteswap_value(v) : v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t size() const { return bytes_.size(); }
  const char* data() const { return bytes_.data(); }
  void seek(std::size_t p) { pos_ = p; }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void write_raw_volume(const std::filesystem::path& path, const RawVolume& raw) {
  const GridSpec& g = raw.header.grid;
  if (raw.header.encoding != VolumeHeader::kEncodingFloat64) {
    throw Error(ErrorKind::UnsupportedEncoding, "only float64 payloads are written");
  }
  if (raw.payload.size() != g.size() * raw.header.components) {
    throw Error(ErrorKind::InvalidArgument, "payload size does not match header");
  }
  std::string buf;
  buf.reserve(64 + raw.payload.size() * 8);
  buf.append(VolumeHeader::kMagic, 6);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.rank()));
  put_le<std::uint32_t>(buf, raw.header.components);
  put_le<std::uint32_t>(buf, raw.header.encoding);
  for (int a = 0; a < g.rank(); ++a) put_le<std::uint64_t>(buf, g.dim(a));
  for (int a = 0; a < g.rank(); ++a) put_le<double>(buf, g.spacing(a));
  for (double x : raw.payload) put_le<double>(buf, x);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

RawVolume read_raw_volume(const std::filesystem::path& path) {
  ByteReader r(slurp(path));
  if (r.size() < 6 || std::memcmp(r.data(), VolumeHeader::kMagic, 6) != 0) {
    throw Error(ErrorKind::BadMagic, path.string() + " is not a TBMV1 file");
  }
  r.seek(6);
  const auto ndim = r.get<std::uint32_t>();
  const auto components = r.get<std::uint32_t>();
  const auto encoding = r.get<std::uint32_t>();
  if (encoding != VolumeHeader::kEncodingFloat64) {
    throw Error(ErrorKind::UnsupportedEncoding, "encoding code " + std::to_string(encoding));
  }
  if (ndim != 2 && ndim != 3) {
    throw Error(ErrorKind::DimensionalityOutOfRange, "ndim " + std::to_string(ndim));
  }
  if (components < 1 || components > 3) {
    throw Error(ErrorKind::UnsupportedEncoding, "component count " + std::to_string(components));
  }
  std::vector<std::size_t> dims(ndim);
  std::vector<double> spacing(ndim);
  for (auto& d : dims) d = static_cast<std::size_t>(r.get<std::uint64_t>());
  for (auto& h : spacing) h = r.get<double>();

  RawVolume raw;
  raw.header.grid = GridSpec(dims, spacing);
  raw.header.components = components;
  raw.header.encoding = encoding;
  const std::size_t count = raw.header.grid.size() * components;
  if (r.remaining() < count * sizeof(double)) {
    throw Error(ErrorKind::TruncatedFile, path.string() + " payload is shorter than its header");
  }
  raw.payload.resize(count);
  for (auto& x : raw.payload) x = r.get<double>();
  return raw;
}

void write_volume(const DensityVolume& v, const std::filesystem::path& path) {
  RawVolume raw;
  raw.header.grid = v.grid();
  raw.payload.assign(v.values().begin(), v.values().end());
  write_raw_volume(path, raw);
}

DensityVolume read_volume(const std::filesystem::path& path) {
  RawVolume raw = read_raw_volume(path);
  if (raw.header.components != 1) {
    throw Error(ErrorKind::UnsupportedEncoding, path.string() + " holds a vector payload");
  }
  return DensityVolume(raw.header.grid, std::move(raw.payload));
}

namespace {

double read_nifti_scalar(ByteReader& r, std::int16_t datatype, bool swap) {
  switch (datatype) {
    case 2: return static_cast<double>(r.get<std::uint8_t>(false));
    case 4: return static_cast<double>(r.get<std::int16_t>(swap));
    case 8: return static_cast<double>(r.get<std::int32_t>(swap));
    case 16: return static_cast<double>(r.get<float>(swap));
    case 64: return r.get<double>(swap);
    default: break;
  }
  throw Error(ErrorKind::UnsupportedDatatype, "NIfTI datatype " + std::to_string(datatype));
}

}  // namespace

DensityVolume read_nifti1(const std::filesystem::path& path) {
  ByteReader r(slurp(path));
  if (r.size() < 348) throw Error(ErrorKind::TruncatedFile, "NIfTI header shorter than 348 bytes");

  bool swap = false;
  auto sizeof_hdr = r.get<std::int32_t>(false);
  if (sizeof_hdr != 348) {
    swap = true;
    if (byteswap_value(sizeof_hdr) != 348) {
      throw Error(ErrorKind::NotNifti1, "sizeof_hdr is not 348");
    }
  }
  if (std::memcmp(r.data() + 344, "n+1\0", 4) != 0) {
    throw Error(ErrorKind::NotNifti1, "magic is not \"n+1\"");
  }

  r.seek(40);
  std::int16_t dim[8];
  for (auto& d : dim) d = r.get<std::int16_t>(swap);
  r.seek(70);
  const auto datatype = r.get<std::int16_t>(swap);
  if (datatype != 2 && datatype != 4 && datatype != 8 && datatype != 16 && datatype != 64) {
    throw Error(ErrorKind::UnsupportedDatatype, "NIfTI datatype " + std::to_string(datatype));
  }
  r.seek(76);
  float pixdim[8];
  for (auto& p : pixdim) p = r.get<float>(swap);
  const auto vox_offset = r.get<float>(swap);
  const auto scl_slope = r.get<float>(swap);
  const auto scl_inter = r.get<float>(swap);

  if (dim[0] < 1 || dim[0] > 7) {
    throw Error(ErrorKind::NotNifti1, "dim[0] out of range");
  }
  for (int a = 4; a <= dim[0]; ++a) {
    if (dim[a] > 1) {
      throw Error(ErrorKind::DimensionalityOutOfRange, "more than three non-singleton axes");
    }
  }
  std::vector<std::size_t> dims;
  std::vector<double> spacing;
  for (int a = 1; a <= std::min<int>(dim[0], 3); ++a) {
    if (dim[a] < 1) throw Error(ErrorKind::NotNifti1, "nonpositive dimension");
    if (a == 3 && dim[a] == 1) break;
    dims.push_back(static_cast<std::size_t>(dim[a]));
    const double h = std::abs(static_cast<double>(pixdim[a]));
    spacing.push_back(h > 0.0 ? h : 1.0);
  }
  if (dims.size() < 2) {
    throw Error(ErrorKind::DimensionalityOutOfRange, "fewer than two spatial axes");
  }
  const GridSpec grid(dims, spacing);

  const std::size_t offset = static_cast<std::size_t>(std::max(352.0f, vox_offset));
  const std::size_t nx = dims[0];
  const std::size_t ny = dims[1];
  const std::size_t nz = dims.size() == 3 ? dims[2] : 1;
  static constexpr std::size_t kBytes[65] = {0, 0, 1, 0, 2, 0, 0, 0, 4, 0, 0, 0, 0, 0, 0, 0, 4,
                                             0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                                             0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
                                             0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 8};
  if (offset + nx * ny * nz * kBytes[datatype] > r.size()) {
    throw Error(ErrorKind::TruncatedFile, "NIfTI payload shorter than its header");
  }
  r.seek(offset);

  const bool scaled = scl_slope != 0.0f && std::isfinite(scl_slope);
  std::vector<double> values(grid.size());
  // NIfTI stores i fastest; our layout stores the last axis fastest.
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        double x = read_nifti_scalar(r, datatype, swap);
        if (scaled) x = x * scl_slope + scl_inter;
        values[(i * ny + j) * nz + k] = x;
      }
    }
  }
  return DensityVolume(grid, std::move(values));
}

}  // namespace tbm
