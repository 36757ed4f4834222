#include "vmb/snapshot.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <vector>

#include "binary_io.hpp"
#include "vmb/errors.hpp"

namespace vmb {

namespace {

constexpr char kMagic[4] = {'V', 'M', 'B', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFieldComponents = 6;

std::uint64_t payload_hash(const SpeciesPair& f, const EMState& em) {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&h](std::span<const double> xs) {
    for (double x : xs) {
      const double le = detail::to_little(x);
      h = detail::fnv1a(&le, sizeof le, h);
    }
  };
  feed(f.values());
  for (const auto& c : em.E) feed(c);
  for (const auto& c : em.B) feed(c);
  return h;
}

std::size_t pow_dim(std::uint32_t n, std::uint32_t d) {
  std::size_t r = 1;
  for (std::uint32_t i = 0; i < d; ++i) r *= n;
  return r;
}

}  // namespace

std::uint64_t write_snapshot(const std::filesystem::path& path, const SnapshotHeader& header, const SpeciesPair& f,
                             const EMState& em) {
  const std::size_t nx = pow_dim(header.spatial_points, header.dim);
  const std::size_t nv = pow_dim(header.velocity_points, 3);
  if (f.spatial_nodes() != nx || f.velocity_nodes() != nv || em.spatial_nodes() != nx)
    throw ShapeError("write_snapshot: header does not match the state");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const std::uint64_t h = payload_hash(f, em);
  os.write(kMagic, 4);
  detail::write_le(os, kVersion);
  detail::write_le(os, header.dim);
  detail::write_le(os, header.spatial_points);
  detail::write_le(os, header.box_length);
  detail::write_le(os, header.velocity_points);
  detail::write_le(os, header.v_max);
  detail::write_le(os, header.eps);
  detail::write_le(os, header.t);
  detail::write_le(os, kFieldComponents);
  detail::write_le(os, h);
  for (double x : f.values()) detail::write_le(os, x);
  for (const auto& c : em.E)
    for (double x : c) detail::write_le(os, x);
  for (const auto& c : em.B)
    for (double x : c) detail::write_le(os, x);
  if (!os) throw IoError("write failed for " + path.string());
  return h;
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kMagic)) throw IoError("not a VMBS file: " + path.string());
  if (const auto v = detail::read_le<std::uint32_t>(is); v != kVersion)
    throw IoError("unsupported VMBS version " + std::to_string(v));
  Snapshot s;
  auto& hd = s.header;
  hd.dim = detail::read_le<std::uint32_t>(is);
  hd.spatial_points = detail::read_le<std::uint32_t>(is);
  hd.box_length = detail::read_le<double>(is);
  hd.velocity_points = detail::read_le<std::uint32_t>(is);
  hd.v_max = detail::read_le<double>(is);
  hd.eps = detail::read_le<double>(is);
  hd.t = detail::read_le<double>(is);
  if (detail::read_le<std::uint32_t>(is) != kFieldComponents) throw IoError("VMBS: unexpected field component count");
  const auto stored = detail::read_le<std::uint64_t>(is);
  if (hd.dim < 1 || hd.dim > 3 || hd.spatial_points == 0 || hd.velocity_points == 0 || hd.spatial_points > 4096 ||
      hd.velocity_points > 256)
    throw IoError("VMBS: implausible header");
  const std::size_t nx = pow_dim(hd.spatial_points, hd.dim);
  const std::size_t nv = pow_dim(hd.velocity_points, 3);
  s.f = SpeciesPair(nx, nv);
  s.em = EMState(nx);
  for (double& x : s.f.values()) x = detail::read_le<double>(is);
  for (auto& c : s.em.E)
    for (double& x : c) x = detail::read_le<double>(is);
  for (auto& c : s.em.B)
    for (double& x : c) x = detail::read_le<double>(is);
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("VMBS: trailing bytes");
  if (payload_hash(s.f, s.em) != stored) throw ChecksumError("VMBS checksum mismatch in " + path.string());
  s.f.time_stamp = hd.t;
  s.em.t = hd.t;
  return s;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return detail::fnv1a(bytes.data(), bytes.size());
}

}  // namespace vmb
