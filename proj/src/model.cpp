#include "srt/model.hpp"

namespace srt {

SrtModel::SrtModel(const ModelConfig& cfg, const TagRegistry& tags)
    : cfg_(cfg.resolved(tags)),
      encoder_(store_, cfg_.encoder, cfg_.seed),
      adapter_(store_, cfg_.adapter, cfg_.seed),
      lm_(store_, cfg_.lm, Vocabulary(tags), cfg_.seed) {}

LoraHandle SrtModel::apply_lora(const LoraSpec& spec) {
    Rng rng = component_rng(cfg_.seed, "llm_lora");
    return lm_.apply_lora(spec, rng);
}

FusedInput SrtModel::fused_prefix(const Matrix& states, const std::string& instruction) const {
    const Matrix speech = adapter_.adapt(states);
    const std::vector<int> ids = vocab().encode(instruction);
    return fuse(speech, lm_.embed_text(ids));
}

std::unique_ptr<SrtModel> SrtModel::clone() const {
    TagRegistry tags;
    for (const auto& t : vocab().tags()) tags.add(t.code);
    auto out = std::make_unique<SrtModel>(cfg_, tags);
    if (lm_.lora()) out->apply_lora(*lm_.lora());
    out->copy_values_from(*this);
    return out;
}

void SrtModel::copy_values_from(const SrtModel& other) {
    if (other.cfg_.shape_hash() != cfg_.shape_hash()) {
        fail(ErrorCode::kConfigMismatch, "model shapes differ (" + other.cfg_.shape_hash() +
                                             " vs " + cfg_.shape_hash() + ")");
    }
    for (auto& [name, p] : store_.items()) {
        if (!other.store_.contains(name)) {
            fail(ErrorCode::kConfigMismatch, "source model lacks parameter " + name);
        }
        p.value = other.store_.at(name).value;
    }
    for (const auto& [name, p] : other.store_.items()) {
        if (!store_.contains(name)) fail(ErrorCode::kConfigMismatch, "unexpected parameter " + name);
    }
}

}  // namespace srt
