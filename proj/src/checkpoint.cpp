#include "cpm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cpm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; big-endian hosts need swapping");

namespace cpm {

namespace {
constexpr char kMagic[9] = "CPMCKPT1";  // 8 payload bytes + NUL
}

void save_checkpoint(const std::string& path, const ad::ParamMap& params,
                     const nlohmann::json& meta) {
    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, arr] : params) {
        manifest.push_back({{"name", name}, {"shape", arr.shape()}, {"offset", offset}});
        offset += arr.numel() * sizeof(double);
    }
    nlohmann::json header = {{"meta", meta}, {"tensors", manifest}};
    const std::string header_bytes = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 8);
    std::uint64_t hlen = header_bytes.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    for (const auto& [name, arr] : params)
        out.write(reinterpret_cast<const char*>(arr.data()),
                  static_cast<std::streamsize>(arr.numel() * sizeof(double)));
    if (!out) throw IoError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a CPMCKPT1 checkpoint: " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header_bytes(hlen, '\0');
    in.read(header_bytes.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw IoError("truncated checkpoint header: " + path);

    nlohmann::json header = nlohmann::json::parse(header_bytes, nullptr, false);
    if (header.is_discarded()) throw IoError("corrupt checkpoint header: " + path);

    Checkpoint ck;
    ck.meta = header.at("meta");
    const std::streampos payload_start = in.tellg();
    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        ad::Array arr(shape);
        in.seekg(payload_start + static_cast<std::streamoff>(offset));
        in.read(reinterpret_cast<char*>(arr.data()),
                static_cast<std::streamsize>(arr.numel() * sizeof(double)));
        if (!in) throw IoError("truncated checkpoint payload: " + path);
        ck.params.emplace(name, std::move(arr));
    }
    return ck;
}

}  // namespace cpm
