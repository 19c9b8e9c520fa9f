#pragma once

#include "srt/layers.hpp"
#include "srt/tasks.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srt {

// Byte-level base vocabulary (ids 0..255) followed by BOS, EOS, PAD and one
// atomic token per registered language tag.
class Vocabulary {
public:
    explicit Vocabulary(const TagRegistry& tags = TagRegistry::builtin());

    int size() const { return static_cast<int>(kBaseTokens + 3 + tags_.size()); }
    int bos() const { return kBaseTokens; }
    int eos() const { return kBaseTokens + 1; }
    int pad() const { return kBaseTokens + 2; }
    int tag_id(std::string_view code) const;
    bool is_tag(int id) const { return id >= kBaseTokens + 3 && id < size(); }

    std::vector<int> encode(std::string_view text) const;
    // Specials are dropped; tags render as their surface form.
    std::string decode(std::span<const int> ids) const;
    const std::vector<LanguageTag>& tags() const { return tags_; }

private:
    static constexpr int kBaseTokens = 256;
    std::vector<LanguageTag> tags_;
};

struct LmConfig {
    int vocab_size = 0;
    int dim = 64;
    int layers = 2;
    int heads = 4;
    int ffn = 256;
    int max_positions = 512;
    double init_std = 0.02;
};

struct LoraSpec {
    int rank = 8;
    double alpha = 32.0;
    double dropout = 0.05;
    std::vector<std::string> targets = {"q", "v"};

    void validate() const;
};

struct LoraHandle {
    std::vector<std::string> parameter_names;
    size_t trainable_values = 0;
};

// E^Z = E^X rows followed by E^T rows.
struct FusedInput {
    Matrix embeddings;
    Eigen::Index speech_rows = 0;
    Eigen::Index text_rows = 0;

    Eigen::Index rows() const { return embeddings.rows(); }
};

FusedInput fuse(const Matrix& speech, const Matrix& text);

// Per-position next-token targets for the sequence prefix ++ target: -1 on every
// position whose prediction is excluded from the loss, target/EOS ids on the rest.
std::vector<int> loss_targets(Eigen::Index prefix_rows, std::span<const int> target, int eos);

class LanguageModel {
public:
    LanguageModel(ParameterStore& store, const LmConfig& cfg, Vocabulary vocab, uint64_t seed);
    LanguageModel(const LanguageModel&) = delete;
    LanguageModel& operator=(const LanguageModel&) = delete;

    const LmConfig& config() const { return cfg_; }
    const Vocabulary& vocab() const { return vocab_; }

    Matrix embed_text(std::span<const int> ids) const;
    ag::Var embed_text(ag::Graph& g, std::span<const int> ids) const;

    // Logits for every row of the input sequence.
    ag::Var logits(ag::Graph& g, ag::Var sequence, const ForwardMode& mode) const;

    // Mean cross-entropy of target ++ EOS given speech ++ instruction.
    ag::Var loss(ag::Graph& g, ag::Var speech, std::span<const int> instruction,
                 std::span<const int> target, const ForwardMode& mode) const;
    ag::Var loss(ag::Graph& g, ag::Var fused_prefix, std::span<const int> target,
                 const ForwardMode& mode) const;
    double forward_loss(const FusedInput& z, std::span<const int> target) const;

    LoraHandle apply_lora(const LoraSpec& spec, Rng& rng);
    bool has_lora() const { return lora_.has_value(); }
    const std::optional<LoraSpec>& lora() const { return lora_; }

    // KV-cached inference ------------------------------------------------
    struct KvCache {
        std::vector<Matrix> keys;    // per layer, capacity x dim
        std::vector<Matrix> values;
        Eigen::Index length = 0;
    };

    KvCache make_cache(Eigen::Index capacity) const;
    static void copy_cache(const KvCache& from, KvCache& to);

    // Appends rows to caches and returns logits for the last appended row of
    // each cache. rows[i] rows of `inputs` (in order) belong to caches[i].
    void append(std::span<KvCache* const> caches, std::span<const Eigen::Index> rows,
                const Matrix& inputs, Matrix& last_logits) const;
    void prefill(const FusedInput& z, KvCache& cache, Matrix& last_logits) const;
    void step(std::span<KvCache* const> caches, std::span<const int> tokens,
              Matrix& logits) const;

private:
    LmConfig cfg_;
    Vocabulary vocab_;
    ParameterStore& store_;
    Parameter* tok_emb_ = nullptr;
    Parameter* pos_emb_ = nullptr;
    std::vector<TransformerBlock> blocks_;
    LayerNorm ln_f_;
    Parameter* lm_head_ = nullptr;
    std::optional<LoraSpec> lora_;
};

}  // namespace srt
