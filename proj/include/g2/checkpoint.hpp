#pragma once

#include <map>
#include <string>
#include <vector>

#include "g2/tensor.hpp"

namespace g2 {

// Checkpoint container: an ordered list of named tensors serialized as
//   magic "G2CK" | version u32 | blobs...
// where each blob is
//   name_len u32 | name bytes | rank u32 | extents u32[rank] | doubles[]
// All integers little-endian, doubles little-endian IEEE-754. Blobs repeat
// until end of file. Optimizer state travels in the same container under
// reserved name prefixes ("adam.m.", "adam.v.", "adam.t.") and scalar
// metadata under "meta.".
struct CheckpointBlob {
  std::string name;
  Tensor tensor;
};

constexpr uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const std::vector<CheckpointBlob>& blobs);
std::vector<CheckpointBlob> read_checkpoint(const std::string& path);

// Lookup helper; throws if absent.
const Tensor& checkpoint_get(const std::vector<CheckpointBlob>& blobs, const std::string& name);
bool checkpoint_has(const std::vector<CheckpointBlob>& blobs, const std::string& name);

}  // namespace g2
