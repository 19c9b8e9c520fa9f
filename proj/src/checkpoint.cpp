#include "srt/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace srt {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[] = "SRTBLOB1";
constexpr char kFormat[] = "srt-checkpoint/1";

template <typename T>
void put(std::string& out, T v) {
    unsigned char b[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& pos, const std::string& origin) {
    if (pos + sizeof(T) > in.size()) fail(ErrorCode::kParseError, origin + ": truncated blob");
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += sizeof(T);
    return static_cast<T>(v);
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::kIo, "cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::kIo, "cannot write " + path);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) fail(ErrorCode::kIo, "short write to " + path);
}

std::string blob_file(const std::string& ns) { return ns + ".bin"; }

}  // namespace

std::string encode_blob(const TensorMap& tensors) {
    std::string out(kMagic, 8);
    put<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        put<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out += name;
        put<uint32_t>(out, 2);
        put<uint64_t>(out, static_cast<uint64_t>(m.rows()));
        put<uint64_t>(out, static_cast<uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const float f = static_cast<float>(m.data()[i]);
            uint32_t u;
            std::memcpy(&u, &f, 4);
            put<uint32_t>(out, u);
        }
    }
    return out;
}

TensorMap decode_blob(const std::string& bytes, const std::string& origin) {
    if (bytes.size() < 12 || bytes.compare(0, 8, kMagic) != 0) {
        fail(ErrorCode::kParseError, origin + ": not a parameter blob");
    }
    size_t pos = 8;
    const auto count = take<uint32_t>(bytes, pos, origin);
    TensorMap out;
    for (uint32_t t = 0; t < count; ++t) {
        const auto len = take<uint32_t>(bytes, pos, origin);
        if (pos + len > bytes.size()) fail(ErrorCode::kParseError, origin + ": truncated name");
        std::string name = bytes.substr(pos, len);
        pos += len;
        const auto ndim = take<uint32_t>(bytes, pos, origin);
        if (ndim < 1 || ndim > 2) fail(ErrorCode::kParseError, origin + ": unsupported rank for " + name);
        uint64_t dims[2] = {1, 1};
        for (uint32_t d = 0; d < ndim; ++d) dims[d] = take<uint64_t>(bytes, pos, origin);
        const Eigen::Index rows = ndim == 1 ? 1 : static_cast<Eigen::Index>(dims[0]);
        const Eigen::Index cols = static_cast<Eigen::Index>(ndim == 1 ? dims[0] : dims[1]);
        if (pos + static_cast<size_t>(rows * cols) * 4 > bytes.size()) {
            fail(ErrorCode::kParseError, origin + ": truncated data for " + name);
        }
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const auto u = take<uint32_t>(bytes, pos, origin);
            float f;
            std::memcpy(&f, &u, 4);
            m.data()[i] = f;
        }
        if (!out.emplace(std::move(name), std::move(m)).second) {
            fail(ErrorCode::kParseError, origin + ": duplicate tensor name");
        }
    }
    if (pos != bytes.size()) fail(ErrorCode::kParseError, origin + ": trailing bytes");
    return out;
}

void write_blob(const std::string& path, const TensorMap& tensors) {
    write_file(path, encode_blob(tensors));
}

TensorMap read_blob(const std::string& path) { return decode_blob(read_file(path), path); }

std::vector<std::string> namespaces_of(const ParameterStore& store) {
    std::set<std::string> ns;
    for (const auto& [name, p] : store.items()) ns.insert(namespace_of(name));
    return {ns.begin(), ns.end()};
}

TensorMap namespace_tensors(const ParameterStore& store, const std::string& ns) {
    TensorMap out;
    for (const auto& [name, p] : store.items()) {
        if (namespace_of(name) == ns) out.emplace(name, p.value);
    }
    return out;
}

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt) {
    if (!ckpt.model) fail(ErrorCode::kInvalidInput, "checkpoint has no model");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());

    const SrtModel& model = *ckpt.model;
    nlohmann::json j;
    j["format"] = kFormat;
    j["stage"] = ckpt.meta.stage();
    j["provenance"] = ckpt.meta.provenance;
    j["step"] = ckpt.meta.step;
    j["config_hash"] = model.config().shape_hash();
    j["rng_state"] = ckpt.meta.rng_state;
    nlohmann::json cfg = nlohmann::json::object();
    KeyValueConfig all = ckpt.meta.config;
    all.merge(model.config().to_kv());
    for (const auto& [k, v] : all.values()) cfg[k] = v;
    j["config"] = cfg;
    std::vector<std::string> tags;
    for (const auto& t : model.vocab().tags()) tags.push_back(t.code);
    j["language_tags"] = tags;
    if (const auto& lora = model.lm().lora()) {
        j["lora"] = {{"rank", lora->rank},
                     {"alpha", lora->alpha},
                     {"dropout", lora->dropout},
                     {"targets", lora->targets}};
    }
    nlohmann::json blobs = nlohmann::json::object();
    for (const auto& ns : namespaces_of(model.params())) {
        write_blob((fs::path(dir) / blob_file(ns)).string(), namespace_tensors(model.params(), ns));
        blobs[ns] = blob_file(ns);
    }
    j["blobs"] = blobs;
    write_file((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");

    std::string tsv = "step\tloss\n";
    char buf[64];
    for (size_t i = 0; i < ckpt.meta.losses.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.9g\n", i + 1, ckpt.meta.losses[i]);
        tsv += buf;
    }
    write_file((fs::path(dir) / "loss.tsv").string(), tsv);
}

Checkpoint load_checkpoint(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kParseError, manifest_path + ": " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat) {
            fail(ErrorCode::kParseError, manifest_path + ": unknown format");
        }
        Checkpoint ck;
        ck.meta.provenance = j.at("provenance").get<std::vector<std::string>>();
        ck.meta.step = j.at("step").get<int64_t>();
        ck.meta.config_hash = j.at("config_hash").get<std::string>();
        ck.meta.rng_state = j.at("rng_state").get<std::string>();
        for (const auto& [k, v] : j.at("config").items()) ck.meta.config.set(k, v.get<std::string>());

        TagRegistry tags;
        for (const auto& code : j.at("language_tags")) tags.add(code.get<std::string>());
        ModelConfig mc = ModelConfig::from(ck.meta.config);
        auto model = std::make_shared<SrtModel>(mc, tags);
        if (model->config().shape_hash() != ck.meta.config_hash) {
            fail(ErrorCode::kConfigMismatch, manifest_path + ": config hash does not match its config");
        }
        if (j.contains("lora")) {
            LoraSpec spec;
            spec.rank = j["lora"].at("rank").get<int>();
            spec.alpha = j["lora"].at("alpha").get<double>();
            spec.dropout = j["lora"].at("dropout").get<double>();
            spec.targets = j["lora"].at("targets").get<std::vector<std::string>>();
            model->apply_lora(spec);
        }
        std::set<std::string> seen;
        for (const auto& [ns, file] : j.at("blobs").items()) {
            const TensorMap tensors = read_blob((fs::path(dir) / file.get<std::string>()).string());
            for (const auto& [name, m] : tensors) {
                if (namespace_of(name) != ns) {
                    fail(ErrorCode::kParseError, "tensor " + name + " stored under namespace " + ns);
                }
                if (!model->params().contains(name)) {
                    fail(ErrorCode::kConfigMismatch, "checkpoint has unknown parameter " + name);
                }
                Parameter& p = model->params().at(name);
                if (p.value.rows() != m.rows() || p.value.cols() != m.cols()) {
                    fail(ErrorCode::kConfigMismatch, "shape mismatch for " + name);
                }
                p.value = m;
                seen.insert(name);
            }
        }
        for (const auto& [name, p] : model->params().items()) {
            if (!seen.count(name)) fail(ErrorCode::kConfigMismatch, "checkpoint lacks parameter " + name);
        }
        const std::string loss_path = (fs::path(dir) / "loss.tsv").string();
        if (fs::exists(loss_path)) {
            std::istringstream in(read_file(loss_path));
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                const auto tab = line.find('\t');
                if (tab != std::string::npos) ck.meta.losses.push_back(std::stod(line.substr(tab + 1)));
            }
        }
        ck.model = std::move(model);
        return ck;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kParseError, manifest_path + ": " + e.what());
    }
}

}  // namespace srt
