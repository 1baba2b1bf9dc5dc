#pragma once

#include <string>
#include <vector>

#include "mpnet/tensor.hpp"

namespace mp {

// One named parameter tensor inside a checkpoint file. Entry order is
// preserved on round trip; names must be unique within a file.
struct CheckpointEntry {
  std::string name;
  Tensor<float> value;
};

// Binary layout: magic "MPNN", u32 version (=1), u32 tensor count, then per
// tensor: u32 name length + name bytes, u32 rank, u32 dims[rank], f32 data.
// All integers and floats little-endian.
void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

// nullptr when absent.
const Tensor<float>* find_entry(const std::vector<CheckpointEntry>& entries,
                                const std::string& name);

}  // namespace mp
