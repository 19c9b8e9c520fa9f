#pragma once

#include "srt/model.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace srt {

using TensorMap = std::map<std::string, Matrix>;

// Blob file: "SRTBLOB1", u32 count, then per tensor u32 name length, name,
// u32 ndim, u64 dims, little-endian float32 data (row-major).
void write_blob(const std::string& path, const TensorMap& tensors);
TensorMap read_blob(const std::string& path);
std::string encode_blob(const TensorMap& tensors);
TensorMap decode_blob(const std::string& bytes, const std::string& origin);

struct CheckpointMeta {
    std::vector<std::string> provenance;  // stages trained so far, oldest first
    int64_t step = 0;
    std::string config_hash;
    std::string rng_state;
    KeyValueConfig config;
    std::vector<double> losses;  // per-step training loss of the last stage

    std::string stage() const { return provenance.empty() ? "init" : provenance.back(); }
};

struct Checkpoint {
    std::shared_ptr<SrtModel> model;
    CheckpointMeta meta;
};

// Directory with manifest.json, one blob per parameter namespace and loss.tsv.
void save_checkpoint(const std::string& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& dir);

std::vector<std::string> namespaces_of(const ParameterStore& store);
TensorMap namespace_tensors(const ParameterStore& store, const std::string& ns);

}  // namespace srt
