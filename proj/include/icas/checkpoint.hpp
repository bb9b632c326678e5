#pragma once

#include <string>
#include <utility>
#include <vector>

#include "icas/tensor.hpp"

namespace icas::train {

// Checkpoint wire format: magic "ICAS1\n"; u64 entry count; per entry:
// u64 name length, UTF-8 name, u8 dtype code (1 = f64), u64 rank, u64
// extents, row-major f64 payload; all integers little-endian; trailing
// SHA-256 of every preceding byte.
std::string checkpoint_bytes(
    const std::vector<std::pair<std::string, num::Tensor>>& params);

void save_checkpoint(const std::vector<std::pair<std::string, num::Tensor>>& params,
                     const std::string& path);

std::vector<std::pair<std::string, num::Tensor>> parse_checkpoint(
    const std::string& bytes);

std::vector<std::pair<std::string, num::Tensor>> load_checkpoint(
    const std::string& path);

// Copies checkpoint values into matching named parameters; throws on name or
// shape mismatch.
void restore_parameters(std::vector<std::pair<std::string, num::Tensor>>& target,
                        const std::vector<std::pair<std::string, num::Tensor>>& loaded);

}  // namespace icas::train
