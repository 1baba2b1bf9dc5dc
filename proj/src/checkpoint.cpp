#include "mpnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "mpnet/common.hpp"

namespace mp {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'P', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxNameLen = 1 << 16;
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path, const char* what) {
  char b[4];
  if (!in.read(b, 4)) fail(Errc::parse, path, ": truncated checkpoint (reading ", what, ")");
  std::uint32_t v;
  std::memcpy(&v, b, 4);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.name.empty()) fail(Errc::invalid_argument, "checkpoint: empty tensor name");
    if (e.name.size() >= kMaxNameLen)
      fail(Errc::invalid_argument, "checkpoint: tensor name too long: ", e.name);
    if (!seen.insert(e.name).second)
      fail(Errc::invalid_argument, "checkpoint: duplicate tensor name: ", e.name);
    if (e.value.rank() == 0 || e.value.rank() > static_cast<int>(kMaxRank))
      fail(Errc::invalid_argument, "checkpoint: tensor ", e.name, " has unsupported rank ",
           e.value.rank());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u32(out, static_cast<std::uint32_t>(e.value.rank()));
    for (int d : e.value.shape) put_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(e.value.data.data()),
              static_cast<std::streamsize>(e.value.numel() * sizeof(float)));
  }
  if (!out) fail(Errc::io, "write failed: ", path);
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    fail(Errc::parse, path, ": not a checkpoint file (bad magic)");
  const std::uint32_t version = get_u32(in, path, "version");
  if (version != kVersion)
    fail(Errc::parse, path, ": unsupported checkpoint version ", version);
  const std::uint32_t count = get_u32(in, path, "tensor count");
  if (count > (1u << 20)) fail(Errc::parse, path, ": implausible tensor count ", count);

  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in, path, "name length");
    if (name_len == 0 || name_len >= kMaxNameLen)
      fail(Errc::parse, path, ": bad tensor name length ", name_len);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) fail(Errc::parse, path, ": truncated tensor name");
    if (!seen.insert(name).second) fail(Errc::parse, path, ": duplicate tensor name: ", name);
    const std::uint32_t rank = get_u32(in, path, "rank");
    if (rank == 0 || rank > kMaxRank)
      fail(Errc::parse, path, ": tensor ", name, " has bad rank ", rank);
    std::vector<int> shape;
    std::int64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = get_u32(in, path, "dim");
      if (dim == 0 || dim > (1u << 28)) fail(Errc::parse, path, ": tensor ", name, " has bad dim ", dim);
      shape.push_back(static_cast<int>(dim));
      numel *= dim;
      if (numel > (std::int64_t{1} << 32))
        fail(Errc::parse, path, ": tensor ", name, " is implausibly large");
    }
    CheckpointEntry e;
    e.name = std::move(name);
    e.value = Tensor<float>(shape);
    if (!in.read(reinterpret_cast<char*>(e.value.data.data()),
                 static_cast<std::streamsize>(numel * sizeof(float))))
      fail(Errc::parse, path, ": truncated data for tensor ", e.name);
    entries.push_back(std::move(e));
  }
  if (in.peek() != std::char_traits<char>::eof())
    fail(Errc::parse, path, ": trailing bytes after last tensor");
  return entries;
}

const Tensor<float>* find_entry(const std::vector<CheckpointEntry>& entries,
                                const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return &e.value;
  return nullptr;
}

}  // namespace mp
