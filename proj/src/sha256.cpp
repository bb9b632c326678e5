#include "icas/sha256.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace icas::util {

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len) {
    std::array<std::uint8_t, 32> digest{};
    unsigned int out_len = 0;
    if (EVP_Digest(data, len, digest.data(), &out_len, EVP_sha256(), nullptr) != 1 ||
        out_len != digest.size())
        throw std::runtime_error("sha256: digest computation failed");
    return digest;
}

std::string sha256_hex(const void* data, std::size_t len) {
    static const char* hex = "0123456789abcdef";
    const auto d = sha256(data, len);
    std::string out;
    out.reserve(64);
    for (std::uint8_t b : d) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    return sha256_hex(bytes.data(), bytes.size());
}

std::string sha256_hex(const std::vector<double>& values) {
    return sha256_hex(values.data(), values.size() * sizeof(double));
}

}  // namespace icas::util
