#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "iasdet/tensor.hpp"

namespace iasdet {

// Named-tensor container persisted as a single self-describing binary file:
// magic, format version, string metadata, then per-tensor name + shape + raw
// little-endian doubles. Round-trips are bit-exact.
struct Checkpoint {
    std::map<std::string, Tensor> tensors;
    std::map<std::string, std::string> metadata;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace iasdet
