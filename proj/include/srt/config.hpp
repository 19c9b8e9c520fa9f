#pragma once

#include "srt/adapter.hpp"
#include "srt/audio.hpp"
#include "srt/language_model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace srt {

// Flat `key = value` file with dotted keys. '#' starts a comment.
class KeyValueConfig {
public:
    static KeyValueConfig load(const std::string& path);
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    // "key=value" override as given on a command line.
    void set_override(const std::string& assignment);
    void merge(const KeyValueConfig& other);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get(const std::string& key, double fallback) const;
    int get(const std::string& key, int fallback) const;
    uint64_t get_u64(const std::string& key, uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    std::string to_string() const;

private:
    std::map<std::string, std::string> values_;
};

struct ModelConfig {
    MelConfig mel;
    EncoderConfig encoder;
    AdapterConfig adapter;
    LmConfig lm;
    uint64_t seed = 0;

    static ModelConfig from(const KeyValueConfig& kv);
    KeyValueConfig to_kv() const;
    void validate() const;
    // Fills the widths that follow from other settings (vocab size, encoder
    // input, adapter input/output).
    ModelConfig resolved(const TagRegistry& tags = TagRegistry::builtin()) const;
    // Stable fingerprint of everything that fixes parameter shapes.
    std::string shape_hash() const;
};

}  // namespace srt
