#pragma once

#include <cstdint>
#include <filesystem>

#include "vmb/state.hpp"

namespace vmb {

// Binary phase-space snapshot ("VMBS"), little endian.
//   magic "VMBS", u32 version, u32 dim, u32 spatial points per axis,
//   f64 box length, u32 velocity points per axis, f64 v_max, f64 eps, f64 t,
//   u32 field components (6), u64 FNV-1a checksum of the payload,
//   payload: f (species, spatial node, velocity node), E_1..3, B_1..3.
struct SnapshotHeader {
  std::uint32_t dim = 0;
  std::uint32_t spatial_points = 0;
  double box_length = 0.0;
  std::uint32_t velocity_points = 0;
  double v_max = 0.0;
  double eps = 0.0;
  double t = 0.0;
};

struct Snapshot {
  SnapshotHeader header;
  SpeciesPair f;
  EMState em;
};

// Returns the payload checksum written to the file.
std::uint64_t write_snapshot(const std::filesystem::path& path, const SnapshotHeader& header, const SpeciesPair& f,
                             const EMState& em);
// Throws IoError on malformed files and ChecksumError on a payload mismatch.
Snapshot read_snapshot(const std::filesystem::path& path);

// FNV-1a 64 of a file's bytes, for manifests.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace vmb
