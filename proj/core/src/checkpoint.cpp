#include "hypnos/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace hypnos {

namespace {

constexpr char kMagic[8] = {'H', 'Y', 'P', 'N', 'O', 'S', 'C', 'K'};

void write_doubles_le(std::ofstream& out, const Tensor& t) {
    // Host is little-endian on every supported target; assert once.
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * 8));
}

}  // namespace

void save_checkpoint(const CheckpointData& ckpt, const std::filesystem::path& path) {
    nlohmann::json header;
    header["schema_version"] = ckpt.schema_version;
    header["step"] = ckpt.step;
    header["config"] = ckpt.config_json.empty()
                           ? nlohmann::json(nullptr)
                           : nlohmann::json::parse(ckpt.config_json);
    nlohmann::json arrays = nlohmann::json::array();
    std::int64_t offset = 0;
    for (const auto& [ks, tensors] : ckpt.keyspaces)
        for (const auto& [name, t] : tensors) {
            arrays.push_back({{"keyspace", ks},
                              {"name", name},
                              {"shape", t.shape()},
                              {"dtype", "f64le"},
                              {"offset", offset},
                              {"count", t.numel()}});
            offset += t.numel();
        }
    header["arrays"] = std::move(arrays);
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out.write(kMagic, 8);
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [ks, tensors] : ckpt.keyspaces)
        for (const auto& [name, t] : tensors) write_doubles_le(out, t);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path.string());
    const auto header = nlohmann::json::parse(hs);

    CheckpointData ckpt;
    ckpt.schema_version = header.at("schema_version").get<int>();
    ckpt.step = header.at("step").get<int>();
    if (!header.at("config").is_null()) ckpt.config_json = header.at("config").dump();
    for (const auto& a : header.at("arrays")) {
        const auto shape = a.at("shape").get<std::vector<int>>();
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
        if (!in) throw std::runtime_error("truncated checkpoint payload: " + path.string());
        ckpt.keyspaces[a.at("keyspace").get<std::string>()]
            .emplace(a.at("name").get<std::string>(), std::move(t));
    }
    return ckpt;
}

void store_to_keyspace(const nn::ParamStore& store, std::map<std::string, Tensor>& out) {
    for (const auto& [name, t] : store.all()) out[name] = t;
}

void keyspace_to_store(const std::map<std::string, Tensor>& in, nn::ParamStore& store) {
    for (auto& [name, t] : store.all()) {
        auto it = in.find(name);
        if (it == in.end()) throw std::runtime_error("checkpoint missing parameter: " + name);
        if (it->second.shape() != t.shape())
            throw std::runtime_error("checkpoint shape mismatch for: " + name);
        t = it->second;
    }
}

}  // namespace hypnos
