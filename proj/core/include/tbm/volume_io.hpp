#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tbm/grid.hpp"
#include "tbm/volume.hpp"

namespace tbm {

// TBMV1 container, all integers and floats little-endian:
//
//   "TBMV1\n"                  6 bytes magic
//   u32 ndim                   2 or 3
//   u32 components             1 for scalar volumes, ndim for vector payloads
//   u32 encoding               1 = float64
//   u64 dims[ndim]
//   f64 spacing[ndim]
//   f64 payload[components][prod(dims)]   component-major, row-major inside
struct VolumeHeader {
  static constexpr char kMagic[7] = "TBMV1\n";
  static constexpr std::uint32_t kEncodingFloat64 = 1;

  GridSpec grid;
  std::uint32_t components = 1;
  std::uint32_t encoding = kEncodingFloat64;
};

struct RawVolume {
  VolumeHeader header;
  std::vector<double> payload;
};

void write_raw_volume(const std::filesystem::path& path, const RawVolume& raw);
RawVolume read_raw_volume(const std::filesystem::path& path);

void write_volume(const DensityVolume& v, const std::filesystem::path& path);
DensityVolume read_volume(const std::filesystem::path& path);

/// Single-file NIfTI-1 (.nii). Datatypes 2, 4, 8, 16, 64; scl_slope/scl_inter
/// applied when the slope is nonzero. Axis 0 of the result is NIfTI's i axis.
DensityVolume read_nifti1(const std::filesystem::path& path);

}  // namespace tbm
