#include "icas/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "icas/sha256.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace icas::train {

using num::Tensor;

namespace {
constexpr char kMagic[] = "ICAS1\n";
constexpr std::size_t kMagicLen = 6;
constexpr std::uint8_t kDtypeF64 = 1;

void put_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
    if (pos + 8 > in.size()) throw std::runtime_error("checkpoint: truncated");
    std::uint64_t v;
    std::memcpy(&v, in.data() + pos, 8);
    pos += 8;
    return v;
}
}  // namespace

std::string checkpoint_bytes(
    const std::vector<std::pair<std::string, Tensor>>& params) {
    std::string out(kMagic, kMagicLen);
    put_u64(out, params.size());
    for (const auto& [name, t] : params) {
        put_u64(out, name.size());
        out.append(name);
        out.push_back(static_cast<char>(kDtypeF64));
        put_u64(out, t.shape().size());
        for (std::size_t e : t.shape()) put_u64(out, e);
        const auto& v = t.values();
        out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    const auto digest = util::sha256(out.data(), out.size());
    out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
    return out;
}

void save_checkpoint(const std::vector<std::pair<std::string, Tensor>>& params,
                     const std::string& path) {
    const std::string bytes = checkpoint_bytes(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for write");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> parse_checkpoint(const std::string& bytes) {
    if (bytes.size() < kMagicLen + 8 + 32 ||
        bytes.compare(0, kMagicLen, kMagic, kMagicLen) != 0)
        throw std::runtime_error("checkpoint: bad magic or truncated file");
    const std::size_t payload_len = bytes.size() - 32;
    const auto digest = util::sha256(bytes.data(), payload_len);
    if (std::memcmp(digest.data(), bytes.data() + payload_len, 32) != 0)
        throw std::runtime_error("checkpoint: SHA-256 mismatch, file corrupted");

    std::size_t pos = kMagicLen;
    const std::uint64_t count = get_u64(bytes, pos);
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t name_len = get_u64(bytes, pos);
        if (pos + name_len > payload_len) throw std::runtime_error("checkpoint: truncated");
        std::string name = bytes.substr(pos, name_len);
        pos += name_len;
        const auto dtype = static_cast<std::uint8_t>(bytes[pos++]);
        if (dtype != kDtypeF64)
            throw std::runtime_error("checkpoint: unknown dtype code " +
                                     std::to_string(dtype));
        const std::uint64_t rank = get_u64(bytes, pos);
        std::vector<std::size_t> shape(rank);
        std::size_t n = 1;
        for (auto& e : shape) {
            e = get_u64(bytes, pos);
            n *= e;
        }
        if (pos + n * sizeof(double) > payload_len)
            throw std::runtime_error("checkpoint: truncated payload for " + name);
        std::vector<double> data(n);
        std::memcpy(data.data(), bytes.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

void restore_parameters(std::vector<std::pair<std::string, Tensor>>& target,
                        const std::vector<std::pair<std::string, Tensor>>& loaded) {
    if (target.size() != loaded.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < target.size(); ++i) {
        auto& [name, t] = target[i];
        const auto& [lname, lt] = loaded[i];
        if (name != lname)
            throw std::runtime_error("checkpoint: parameter order mismatch at " + name +
                                     " vs " + lname);
        if (t.shape() != lt.shape())
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        t.mutable_values() = lt.values();
    }
}

}  // namespace icas::train
