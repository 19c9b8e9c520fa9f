#include "srt/adapter.hpp"

namespace srt {

void AdapterConfig::validate() const {
    if (enc_dim < 1 || n_q < 1 || d_q < 1 || layers < 0 || d_llm < 1 || mlp_hidden < 1) {
        fail(ErrorCode::kInvalidConfig, "adapter dims must be >= 1");
    }
    if (heads < 1 || d_q % heads != 0) {
        fail(ErrorCode::kInvalidConfig, "adapter d_q " + std::to_string(d_q) +
                                            " not divisible by heads " + std::to_string(heads));
    }
}

SpeechAdapter::SpeechAdapter(ParameterStore& store, const AdapterConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
    cfg_.validate();
    Rng rng = component_rng(seed, "adapter");
    const double sd = cfg_.init_std;
    query_ = &store.add("adapter/query", truncated_normal(cfg_.n_q, cfg_.d_q, sd, rng));
    in_proj_ = Linear::make(store, "adapter/in_proj", cfg_.enc_dim, cfg_.d_q, sd, rng);
    ln_kv_ = LayerNorm::make(store, "adapter/ln_kv", cfg_.d_q);
    for (int i = 0; i < cfg_.layers; ++i) {
        const std::string p = "adapter/blocks." + std::to_string(i);
        Block b;
        b.ln_self = LayerNorm::make(store, p + ".ln_self", cfg_.d_q);
        b.self_attn = Attention::make(store, p + ".self_attn", cfg_.d_q, cfg_.heads, sd, rng);
        b.ln_cross = LayerNorm::make(store, p + ".ln_cross", cfg_.d_q);
        b.cross_attn = Attention::make(store, p + ".cross_attn", cfg_.d_q, cfg_.heads, sd, rng);
        b.ln_ffn = LayerNorm::make(store, p + ".ln_ffn", cfg_.d_q);
        b.ffn = FeedForward::make(store, p + ".ffn", cfg_.d_q, 4 * cfg_.d_q, sd, rng);
        blocks_.push_back(b);
    }
    ln_out_ = LayerNorm::make(store, "adapter/ln_out", cfg_.d_q);
    fc1_ = Linear::make(store, "adapter/mlp.fc1", cfg_.d_q, cfg_.mlp_hidden, sd, rng);
    fc2_ = Linear::make(store, "adapter/mlp.fc2", cfg_.mlp_hidden, cfg_.d_llm, sd, rng);
}

ag::Var SpeechAdapter::qformer(ag::Graph& g, ag::Var h, const ForwardMode& mode) const {
    if (h.cols() != cfg_.enc_dim) {
        fail(ErrorCode::kConfigMismatch, "encoder states have width " + std::to_string(h.cols()) +
                                             ", adapter expects " + std::to_string(cfg_.enc_dim));
    }
    if (h.rows() < 1) fail(ErrorCode::kInvalidInput, "encoder states are empty");
    ag::Var kv = ln_kv_(g, in_proj_(g, h, mode));
    ag::Var q = g.param(*query_);
    for (const Block& b : blocks_) {
        ag::Var s = b.ln_self(g, q);
        q = ag::add(q, b.self_attn(g, s, s, false, mode));
        q = ag::add(q, b.cross_attn(g, b.ln_cross(g, q), kv, false, mode));
        q = ag::add(q, b.ffn(g, b.ln_ffn(g, q), mode));
    }
    return ln_out_(g, q);
}

ag::Var SpeechAdapter::project(ag::Graph& g, ag::Var q_prime, const ForwardMode& mode) const {
    if (q_prime.cols() != cfg_.d_q) {
        fail(ErrorCode::kConfigMismatch, "query width " + std::to_string(q_prime.cols()) +
                                             " != d_q " + std::to_string(cfg_.d_q));
    }
    return fc2_(g, ag::relu(fc1_(g, q_prime, mode)), mode);
}

ag::Var SpeechAdapter::forward(ag::Graph& g, ag::Var h, const ForwardMode& mode) const {
    return project(g, qformer(g, h, mode), mode);
}

Matrix SpeechAdapter::qformer_forward(const Matrix& h) const {
    ag::Graph g(false);
    return qformer(g, g.input(h), ForwardMode{}).value();
}

Matrix SpeechAdapter::mlp_project(const Matrix& q_prime) const {
    ag::Graph g(false);
    return project(g, g.input(q_prime), ForwardMode{}).value();
}

Matrix SpeechAdapter::adapt(const Matrix& h) const {
    ag::Graph g(false);
    return forward(g, g.input(h), ForwardMode{}).value();
}

}  // namespace srt
