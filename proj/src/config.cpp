#include "srt/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace srt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
    fail(ErrorCode::kInvalidConfig, "config key '" + key + "': '" + value + "' is not " + want);
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::kIo, "cannot open config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCode::kParseError, origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            fail(ErrorCode::kParseError, origin + ":" + std::to_string(lineno) + ": empty key");
        }
        kv.values_[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

void KeyValueConfig::set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        fail(ErrorCode::kInvalidConfig, "override '" + assignment + "' is not key=value");
    }
    values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) bad_value(key, it->second, "a number");
        return v;
    } catch (const std::logic_error&) {
        bad_value(key, it->second, "a number");
    }
}

int KeyValueConfig::get(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t used = 0;
        const int v = std::stoi(it->second, &used);
        if (used != it->second.size()) bad_value(key, it->second, "an integer");
        return v;
    } catch (const std::logic_error&) {
        bad_value(key, it->second, "an integer");
    }
}

uint64_t KeyValueConfig::get_u64(const std::string& key, uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        size_t used = 0;
        const uint64_t v = std::stoull(it->second, &used);
        if (used != it->second.size()) bad_value(key, it->second, "an unsigned integer");
        return v;
    } catch (const std::logic_error&) {
        bad_value(key, it->second, "an unsigned integer");
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::string> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string KeyValueConfig::to_string() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

ModelConfig ModelConfig::from(const KeyValueConfig& kv) {
    ModelConfig m;
    m.seed = kv.get_u64("seed", m.seed);
    m.mel.n_mels = kv.get("model.mel.n_mels", m.mel.n_mels);
    m.mel.n_fft = kv.get("model.mel.n_fft", m.mel.n_fft);
    m.mel.hop = kv.get("model.mel.hop", m.mel.hop);
    m.mel.sample_rate = kv.get("model.mel.sample_rate", m.mel.sample_rate);

    m.encoder.backend = kv.get("model.encoder.backend", m.encoder.backend);
    m.encoder.n_mels = m.mel.n_mels;
    m.encoder.dim = kv.get("model.encoder.dim", m.encoder.dim);
    m.encoder.layers = kv.get("model.encoder.layers", m.encoder.layers);
    m.encoder.heads = kv.get("model.encoder.heads", m.encoder.heads);
    m.encoder.ffn = kv.get("model.encoder.ffn", 4 * m.encoder.dim);
    m.encoder.stride = kv.get("model.encoder.stride", m.encoder.stride);

    m.lm.dim = kv.get("model.llm.dim", m.lm.dim);
    m.lm.layers = kv.get("model.llm.layers", m.lm.layers);
    m.lm.heads = kv.get("model.llm.heads", m.lm.heads);
    m.lm.ffn = kv.get("model.llm.ffn", 4 * m.lm.dim);
    m.lm.max_positions = kv.get("model.llm.max_positions", m.lm.max_positions);
    m.lm.init_std = kv.get("model.llm.init_std", m.lm.init_std);

    m.adapter.enc_dim = m.encoder.dim;
    m.adapter.d_llm = m.lm.dim;
    m.adapter.n_q = kv.get("model.adapter.n_q", m.adapter.n_q);
    m.adapter.d_q = kv.get("model.adapter.d_q", m.adapter.d_q);
    m.adapter.layers = kv.get("model.adapter.layers", m.adapter.layers);
    m.adapter.heads = kv.get("model.adapter.heads", m.adapter.heads);
    m.adapter.mlp_hidden = kv.get("model.adapter.mlp_hidden", m.adapter.mlp_hidden);
    m.adapter.init_std = kv.get("model.adapter.init_std", m.adapter.init_std);
    m.validate();
    return m;
}

KeyValueConfig ModelConfig::to_kv() const {
    KeyValueConfig kv;
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    kv.set("seed", std::to_string(seed));
    kv.set("model.mel.n_mels", std::to_string(mel.n_mels));
    kv.set("model.mel.n_fft", std::to_string(mel.n_fft));
    kv.set("model.mel.hop", std::to_string(mel.hop));
    kv.set("model.mel.sample_rate", std::to_string(mel.sample_rate));
    kv.set("model.encoder.backend", encoder.backend);
    kv.set("model.encoder.dim", std::to_string(encoder.dim));
    kv.set("model.encoder.layers", std::to_string(encoder.layers));
    kv.set("model.encoder.heads", std::to_string(encoder.heads));
    kv.set("model.encoder.ffn", std::to_string(encoder.ffn));
    kv.set("model.encoder.stride", std::to_string(encoder.stride));
    kv.set("model.llm.dim", std::to_string(lm.dim));
    kv.set("model.llm.layers", std::to_string(lm.layers));
    kv.set("model.llm.heads", std::to_string(lm.heads));
    kv.set("model.llm.ffn", std::to_string(lm.ffn));
    kv.set("model.llm.max_positions", std::to_string(lm.max_positions));
    kv.set("model.llm.init_std", num(lm.init_std));
    kv.set("model.adapter.n_q", std::to_string(adapter.n_q));
    kv.set("model.adapter.d_q", std::to_string(adapter.d_q));
    kv.set("model.adapter.layers", std::to_string(adapter.layers));
    kv.set("model.adapter.heads", std::to_string(adapter.heads));
    kv.set("model.adapter.mlp_hidden", std::to_string(adapter.mlp_hidden));
    kv.set("model.adapter.init_std", num(adapter.init_std));
    return kv;
}

void ModelConfig::validate() const {
    if (encoder.n_mels != mel.n_mels) {
        fail(ErrorCode::kInvalidConfig, "encoder n_mels differs from the mel front end");
    }
    if (adapter.enc_dim != encoder.dim) {
        fail(ErrorCode::kInvalidConfig, "adapter enc_dim differs from encoder dim");
    }
    if (adapter.d_llm != lm.dim) fail(ErrorCode::kInvalidConfig, "adapter d_llm differs from llm dim");
    if (lm.heads < 1 || lm.dim % lm.heads != 0) {
        fail(ErrorCode::kInvalidConfig, "llm dim not divisible by heads");
    }
    if (encoder.heads < 1 || encoder.dim % encoder.heads != 0) {
        fail(ErrorCode::kInvalidConfig, "encoder dim not divisible by heads");
    }
    adapter.validate();
}

ModelConfig ModelConfig::resolved(const TagRegistry& tags) const {
    ModelConfig cfg = *this;
    cfg.lm.vocab_size = Vocabulary(tags).size();
    cfg.encoder.n_mels = cfg.mel.n_mels;
    cfg.adapter.enc_dim = cfg.encoder.dim;
    cfg.adapter.d_llm = cfg.lm.dim;
    cfg.validate();
    return cfg;
}

std::string ModelConfig::shape_hash() const {
    std::ostringstream os;
    os << mel.n_mels << '/' << mel.n_fft << '/' << mel.hop << '/' << mel.sample_rate << '|'
       << encoder.backend << '/' << encoder.dim << '/' << encoder.layers << '/' << encoder.heads
       << '/' << encoder.ffn << '/' << encoder.stride << '|' << adapter.enc_dim << '/'
       << adapter.n_q << '/' << adapter.d_q << '/' << adapter.layers << '/' << adapter.heads
       << '/' << adapter.d_llm << '/' << adapter.mlp_hidden << '|' << lm.vocab_size << '/'
       << lm.dim << '/' << lm.layers << '/' << lm.heads << '/' << lm.ffn << '/'
       << lm.max_positions;
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
    return buf;
}

}  // namespace srt
