#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace icas::util {

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len);
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& bytes);
std::string sha256_hex(const std::vector<double>& values);

}  // namespace icas::util
