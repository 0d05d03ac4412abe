#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "hypnos/nn.hpp"

namespace hypnos {

// Self-describing checkpoint container. Layout:
//   8-byte magic "HYPNOSCK", u32 little-endian header length, JSON header,
//   then all parameter arrays as raw IEEE-754 doubles, little endian, in the
//   order listed in the header. Round trips are bit-exact.
//
// Parameter stores are grouped under named keyspaces (denoiser, text_encoder,
// discriminator, perceptual) so each component owns its slice.
struct CheckpointData {
    int schema_version = 1;
    int step = 0;
    std::string config_json;  // run configuration echo, verbatim
    std::map<std::string, std::map<std::string, Tensor>> keyspaces;
};

void save_checkpoint(const CheckpointData& ckpt, const std::filesystem::path& path);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Copies tensors between a keyspace and a ParamStore (shapes must agree).
void store_to_keyspace(const nn::ParamStore& store, std::map<std::string, Tensor>& out);
void keyspace_to_store(const std::map<std::string, Tensor>& in, nn::ParamStore& store);

}  // namespace hypnos
