#include "wavebeat/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "wavebeat/errors.hpp"

namespace wavebeat::nn {

namespace {

constexpr char kMagic[8] = {'W', 'A', 'V', 'E', 'B', 'E', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated checkpoint: " + path);
    return v;
}

} // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<std::uint32_t>(tensor->rank()));
        for (std::size_t d : tensor->shape()) write_pod(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(tensor->data()),
                  static_cast<std::streamsize>(tensor->numel() * sizeof(float)));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

std::map<std::string, Tensor> load_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a model checkpoint: " + path);
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    const auto count = read_pod<std::uint32_t>(in, path);
    std::map<std::string, Tensor> result;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw DataError("truncated checkpoint: " + path);
        const auto rank = read_pod<std::uint32_t>(in, path);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in, path));
        Tensor tensor(shape);
        in.read(reinterpret_cast<char*>(tensor.data()),
                static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
        if (!in) throw DataError("truncated checkpoint: " + path);
        result.emplace(std::move(name), std::move(tensor));
    }
    return result;
}

} // namespace wavebeat::nn
