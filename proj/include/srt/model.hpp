#pragma once

#include "srt/config.hpp"

#include <memory>
#include <optional>

namespace srt {

// Frozen encoder + trainable adapter + decoder-only LM sharing one store.
class SrtModel {
public:
    explicit SrtModel(const ModelConfig& cfg, const TagRegistry& tags = TagRegistry::builtin());
    SrtModel(const SrtModel&) = delete;
    SrtModel& operator=(const SrtModel&) = delete;

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& params() { return store_; }
    const ParameterStore& params() const { return store_; }
    const SpeechEncoder& encoder() const { return encoder_; }
    const SpeechAdapter& adapter() const { return adapter_; }
    LanguageModel& lm() { return lm_; }
    const LanguageModel& lm() const { return lm_; }
    const Vocabulary& vocab() const { return lm_.vocab(); }

    LoraHandle apply_lora(const LoraSpec& spec);

    Matrix encode(const MelFeatures& f) const { return encoder_.encode(f); }
    // E^Z for encoder states and an instruction string.
    FusedInput fused_prefix(const Matrix& states, const std::string& instruction) const;

    // Same architecture, LoRA wrapping and parameter values.
    std::unique_ptr<SrtModel> clone() const;
    void copy_values_from(const SrtModel& other);

private:
    ModelConfig cfg_;
    ParameterStore store_;
    SpeechEncoder encoder_;
    SpeechAdapter adapter_;
    LanguageModel lm_;
};

}  // namespace srt
