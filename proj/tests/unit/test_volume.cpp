#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "tbm/error.hpp"
#include "tbm/grid.hpp"
#include "tbm/volume.hpp"
#include "tbm/volume_io.hpp"

using namespace tbm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tbm_test_volume";
  fs::create_directories(dir);
  return dir / name;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected tbm::Error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("voxel centers sit at (i + 1/2) h and the last axis is fastest") {
  const GridSpec g = GridSpec::make3d(4, 5, 6, 0.5);
  CHECK(g.rank() == 3);
  CHECK(g.size() == 120);
  CHECK(g.center(1, 0) == doctest::Approx(0.25));
  CHECK(g.center(2, 3) == doctest::Approx(1.75));
  CHECK(g.stride(2) == 1);
  CHECK(g.stride(1) == 6);
  CHECK(g.stride(0) == 30);
  CHECK(g.voxel_volume() == doctest::Approx(0.125));
}

TEST_CASE("2D grids carry a unit third axis") {
  const GridSpec g = GridSpec::make2d(7, 4);
  CHECK(g.rank() == 2);
  CHECK(g.dim(2) == 1);
  CHECK(g.size() == 28);
  CHECK(g.voxel_volume() == doctest::Approx(1.0));
}

TEST_CASE("grids need 2 or 3 axes and positive spacing") {
  const std::vector<std::size_t> one{4};
  const std::vector<std::size_t> four{2, 2, 2, 2};
  const std::vector<std::size_t> two{4, 4};
  const std::vector<double> bad{1.0, 0.0};
  CHECK(kind_of([&] { GridSpec g(one); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { GridSpec g(four); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { GridSpec g(two, bad); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("resized keeps the physical extent") {
  const GridSpec g = GridSpec::make2d(64, 32, 1.0);
  const std::vector<std::size_t> half{32, 16};
  const GridSpec c = g.resized(half);
  CHECK(c.spacing(0) == doctest::Approx(2.0));
  CHECK(c.spacing(1) == doctest::Approx(2.0));
}

TEST_CASE("normalize_density scales, floors and rescales to the target mass") {
  const GridSpec g = GridSpec::make2d(4, 4);
  std::vector<double> x(16);
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
  const DensityVolume v(g, x);
  const DensityVolume n = normalize_density(v);
  // Independent arithmetic: x * M / 120 + 0.1, then times M / (M + 16 * 0.1).
  const double m = 1.0e6;
  for (std::size_t i = 0; i < 16; ++i) {
    const double expected = (static_cast<double>(i) * m / 120.0 + 0.1) * m / (m + 1.6);
    CHECK(n[i] == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK(n.mass() == doctest::Approx(m).epsilon(1e-14));
  CHECK(n.min() > 0.0);
}

TEST_CASE("normalize_density and DensityVolume reject bad input") {
  const GridSpec g = GridSpec::make2d(4, 4);
  std::vector<double> zeros(16, 0.0);
  CHECK(kind_of([&] { normalize_density(DensityVolume(g, zeros)); }) == ErrorKind::AllZeroVolume);
  std::vector<double> bad = zeros;
  bad[1] = NAN;
  CHECK(kind_of([&] { DensityVolume(g, bad); }) == ErrorKind::NonFiniteInput);
  bad[1] = -1.0;
  CHECK(kind_of([&] { DensityVolume(g, bad); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { DensityVolume(g, {1.0}); }) == ErrorKind::InvalidArgument);
  const std::vector<std::size_t> thin{3, 8};
  CHECK(kind_of([&] { GridSpec t(thin); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("resample preserves mass and reproduces a ramp away from the faces") {
  const GridSpec g = GridSpec::make2d(32, 32);
  std::vector<double> ramp(g.size());
  for (std::size_t i = 0; i < 32; ++i) {
    for (std::size_t j = 0; j < 32; ++j) ramp[i * 32 + j] = 1.0 + g.center(0, i) + 2.0 * g.center(1, j);
  }
  const DensityVolume v(g, ramp);
  const std::vector<std::size_t> dims{16, 16};
  const DensityVolume r = resample(v, dims);
  CHECK(r.mass() == doctest::Approx(v.mass()).epsilon(1e-12));
  const GridSpec& c = r.grid();
  // The mean-preserving rescale is ~1 for a ramp, so interior values follow it.
  for (std::size_t i = 2; i < 14; ++i) {
    for (std::size_t j = 2; j < 14; ++j) {
      const double expected = 1.0 + c.center(0, i) + 2.0 * c.center(1, j);
      CHECK(r[i * 16 + j] == doctest::Approx(expected).epsilon(0.02));
    }
  }
}

TEST_CASE("stable_sum compensates cancellation") {
  const std::vector<double> x{1e16, 1.0, -1e16, 1.0};
  CHECK(stable_sum(x) == 2.0);
}

TEST_CASE("TBMV1 round trip is bit exact for scalar and vector payloads") {
  const GridSpec g = GridSpec::make3d(4, 5, 6, 0.75);
  std::vector<double> vals(g.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = std::sqrt(static_cast<double>(i) + 0.3);
  const DensityVolume v(g, vals);
  const fs::path p = scratch("scalar.tbmv");
  write_volume(v, p);
  const DensityVolume back = read_volume(p);
  CHECK(back.grid() == g);
  CHECK(std::memcmp(back.values().data(), v.values().data(), vals.size() * sizeof(double)) == 0);

  RawVolume raw;
  raw.header.grid = g;
  raw.header.components = 3;
  raw.payload.resize(3 * g.size());
  for (std::size_t i = 0; i < raw.payload.size(); ++i) raw.payload[i] = -1.0 / (1.0 + static_cast<double>(i));
  const fs::path q = scratch("vector.tbmv");
  write_raw_volume(q, raw);
  const RawVolume rb = read_raw_volume(q);
  CHECK(rb.header.components == 3);
  CHECK(rb.payload == raw.payload);
  CHECK(kind_of([&] { read_volume(q); }) == ErrorKind::UnsupportedEncoding);
}

TEST_CASE("TBMV1 reader rejects foreign and truncated files") {
  const fs::path bad = scratch("bad.tbmv");
  std::ofstream(bad, std::ios::binary) << "NOTAVOLUME";
  CHECK(kind_of([&] { read_volume(bad); }) == ErrorKind::BadMagic);

  const GridSpec g = GridSpec::make2d(4, 4);
  const fs::path p = scratch("cut.tbmv");
  write_volume(DensityVolume(g, std::vector<double>(16, 1.0)), p);
  fs::resize_file(p, fs::file_size(p) - 8);
  CHECK(kind_of([&] { read_volume(p); }) == ErrorKind::TruncatedFile);
  CHECK(kind_of([&] { read_volume(scratch("missing.tbmv")); }) == ErrorKind::IoError);
}

namespace {

// Minimal single-file NIfTI-1 writer for int16 data, i fastest.
void write_nifti_i16(const fs::path& p, int nx, int ny, int nz, const std::vector<std::int16_t>& data,
                     float slope, float inter, float dx) {
  std::vector<char> hdr(352, 0);
  auto put = [&](std::size_t off, const auto& v) { std::memcpy(hdr.data() + off, &v, sizeof v); };
  put(0, std::int32_t{348});
  const std::int16_t dim[8] = {3, static_cast<std::int16_t>(nx), static_cast<std::int16_t>(ny),
                               static_cast<std::int16_t>(nz), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put(40 + 2 * i, dim[i]);
  put(70, std::int16_t{4});
  put(72, std::int16_t{16});
  const float pixdim[8] = {1.0f, dx, dx, dx, 1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) put(76 + 4 * i, pixdim[i]);
  put(108, 352.0f);
  put(112, slope);
  put(116, inter);
  std::memcpy(hdr.data() + 344, "n+1\0", 4);
  std::ofstream out(p, std::ios::binary);
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * 2));
}

}  // namespace

TEST_CASE("NIfTI-1 int16 volume: scaling applied and i axis becomes axis 0") {
  const int nx = 4, ny = 5, nz = 6;
  std::vector<std::int16_t> data;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) data.push_back(static_cast<std::int16_t>(100 * i + 10 * j + k));
  const fs::path p = scratch("vol.nii");
  write_nifti_i16(p, nx, ny, nz, data, 0.5f, 2.0f, 1.5f);
  const DensityVolume v = read_nifti1(p);
  REQUIRE(v.grid().rank() == 3);
  CHECK(v.grid().dim(0) == 4);
  CHECK(v.grid().dim(2) == 6);
  CHECK(v.grid().spacing(0) == doctest::Approx(1.5));
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        const double expected = 0.5 * (100 * i + 10 * j + k) + 2.0;
        CHECK(v[static_cast<std::size_t>((i * ny + j) * nz + k)] == doctest::Approx(expected));
      }

  const fs::path two = scratch("flat.nii");
  write_nifti_i16(two, 4, 5, 1, std::vector<std::int16_t>(20, 7), 0.0f, 0.0f, 1.0f);
  const DensityVolume f = read_nifti1(two);
  CHECK(f.grid().rank() == 2);
  CHECK(f[0] == 7.0);
}

TEST_CASE("NIfTI-1 reader rejects non-NIfTI headers") {
  const fs::path p = scratch("junk.nii");
  std::ofstream(p, std::ios::binary) << std::string(400, 'x');
  CHECK(kind_of([&] { read_nifti1(p); }) == ErrorKind::NotNifti1);
  const fs::path s = scratch("short.nii");
  std::ofstream(s, std::ios::binary) << "tiny";
  CHECK(kind_of([&] { read_nifti1(s); }) == ErrorKind::TruncatedFile);
}
