#pragma once

#include "srt/layers.hpp"

#include <vector>

namespace srt {

struct AdapterConfig {
    int enc_dim = 128;  // width of the encoder states fed in
    int n_q = 80;
    int d_q = 768;
    int layers = 2;
    int heads = 8;
    int d_llm = 64;
    int mlp_hidden = 1024;
    double init_std = 0.02;

    void validate() const;
};

// Q-Former (learned queries; self-attention, cross-attention to H, FFN per
// block) followed by a two-layer ReLU MLP into the LM embedding space.
class SpeechAdapter {
public:
    SpeechAdapter(ParameterStore& store, const AdapterConfig& cfg, uint64_t seed);
    SpeechAdapter(const SpeechAdapter&) = delete;
    SpeechAdapter& operator=(const SpeechAdapter&) = delete;

    const AdapterConfig& config() const { return cfg_; }

    ag::Var qformer(ag::Graph& g, ag::Var h, const ForwardMode& mode) const;
    ag::Var project(ag::Graph& g, ag::Var q_prime, const ForwardMode& mode) const;
    ag::Var forward(ag::Graph& g, ag::Var h, const ForwardMode& mode) const;

    // Plain evaluation (n_q x d_q), (n_q x d_llm).
    Matrix qformer_forward(const Matrix& h) const;
    Matrix mlp_project(const Matrix& q_prime) const;
    Matrix adapt(const Matrix& h) const;

private:
    struct Block {
        LayerNorm ln_self;
        Attention self_attn;
        LayerNorm ln_cross;
        Attention cross_attn;
        LayerNorm ln_ffn;
        FeedForward ffn;
    };

    AdapterConfig cfg_;
    Parameter* query_ = nullptr;
    Linear in_proj_;
    LayerNorm ln_kv_;
    std::vector<Block> blocks_;
    LayerNorm ln_out_;
    Linear fc1_;
    Linear fc2_;
};

}  // namespace srt
