#include "srt/language_model.hpp"

#include <algorithm>
#include <cmath>

namespace srt {

Vocabulary::Vocabulary(const TagRegistry& tags) : tags_(tags.tags()) {}

int Vocabulary::tag_id(std::string_view code) const {
    for (size_t i = 0; i < tags_.size(); ++i) {
        if (tags_[i].code == code) return kBaseTokens + 3 + static_cast<int>(i);
    }
    fail(ErrorCode::kInvalidInput, "no token for language tag '" + std::string(code) + "'");
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        bool matched = false;
        if (text[i] == '<' && i + 1 < text.size() && text[i + 1] == '|') {
            for (size_t t = 0; t < tags_.size(); ++t) {
                const std::string& s = tags_[t].surface;
                if (text.compare(i, s.size(), s) == 0) {
                    ids.push_back(kBaseTokens + 3 + static_cast<int>(t));
                    i += s.size();
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) {
            ids.push_back(static_cast<unsigned char>(text[i]));
            ++i;
        }
    }
    return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id >= 0 && id < kBaseTokens) {
            out.push_back(static_cast<char>(id));
        } else if (is_tag(id)) {
            out += tags_[static_cast<size_t>(id - kBaseTokens - 3)].surface;
        }
    }
    return out;
}

void LoraSpec::validate() const {
    if (rank < 1) fail(ErrorCode::kInvalidConfig, "lora rank must be >= 1");
    if (!(alpha > 0.0)) fail(ErrorCode::kInvalidConfig, "lora alpha must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        fail(ErrorCode::kInvalidConfig, "lora dropout must be in [0, 1)");
    }
    if (targets.empty()) fail(ErrorCode::kInvalidConfig, "lora needs at least one target");
    for (const auto& t : targets) {
        if (t != "q" && t != "k" && t != "v" && t != "o") {
            fail(ErrorCode::kInvalidConfig, "unknown lora target '" + t + "' (q|k|v|o)");
        }
    }
}

FusedInput fuse(const Matrix& speech, const Matrix& text) {
    if (speech.cols() != text.cols()) {
        fail(ErrorCode::kConfigMismatch,
             "speech width " + std::to_string(speech.cols()) + " != text width " +
                 std::to_string(text.cols()));
    }
    FusedInput z;
    z.embeddings.resize(speech.rows() + text.rows(), speech.cols());
    z.embeddings.topRows(speech.rows()) = speech;
    z.embeddings.bottomRows(text.rows()) = text;
    z.speech_rows = speech.rows();
    z.text_rows = text.rows();
    return z;
}

std::vector<int> loss_targets(Eigen::Index prefix_rows, std::span<const int> target, int eos) {
    const auto total = static_cast<size_t>(prefix_rows) + target.size();
    std::vector<int> out(total, -1);
    for (size_t i = 0; i < target.size(); ++i) {
        out[static_cast<size_t>(prefix_rows) - 1 + i] = target[i];
    }
    out[total - 1] = eos;
    return out;
}

LanguageModel::LanguageModel(ParameterStore& store, const LmConfig& cfg, Vocabulary vocab,
                             uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)), store_(store) {
    if (cfg_.vocab_size == 0) cfg_.vocab_size = vocab_.size();
    if (cfg_.vocab_size != vocab_.size()) {
        fail(ErrorCode::kConfigMismatch, "lm vocab_size " + std::to_string(cfg_.vocab_size) +
                                             " != tokenizer size " +
                                             std::to_string(vocab_.size()));
    }
    if (cfg_.dim < 1 || cfg_.layers < 1 || cfg_.ffn < 1 || cfg_.max_positions < 1) {
        fail(ErrorCode::kInvalidConfig, "lm dims must be >= 1");
    }
    Rng rng = component_rng(seed, "llm");
    const double sd = cfg_.init_std;
    tok_emb_ = &store.add("llm/tok_emb", truncated_normal(cfg_.vocab_size, cfg_.dim, sd, rng));
    pos_emb_ = &store.add("llm/pos_emb", truncated_normal(cfg_.max_positions, cfg_.dim, sd, rng));
    for (int i = 0; i < cfg_.layers; ++i) {
        blocks_.push_back(TransformerBlock::make(store, "llm/layers." + std::to_string(i),
                                                 cfg_.dim, cfg_.heads, cfg_.ffn, sd, rng));
    }
    ln_f_ = LayerNorm::make(store, "llm/ln_f", cfg_.dim);
    lm_head_ = &store.add("llm/lm_head.weight", truncated_normal(cfg_.dim, cfg_.vocab_size, sd, rng));
}

Matrix LanguageModel::embed_text(std::span<const int> ids) const {
    if (ids.empty()) fail(ErrorCode::kInvalidToken, "empty token sequence");
    Matrix out(static_cast<Eigen::Index>(ids.size()), cfg_.dim);
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= cfg_.vocab_size) {
            fail(ErrorCode::kInvalidToken, "token id " + std::to_string(ids[i]) + " out of range");
        }
        out.row(static_cast<Eigen::Index>(i)) = tok_emb_->value.row(ids[i]);
    }
    return out;
}

ag::Var LanguageModel::embed_text(ag::Graph& g, std::span<const int> ids) const {
    if (ids.empty()) fail(ErrorCode::kInvalidToken, "empty token sequence");
    return ag::gather_rows(g.param(*tok_emb_), ids);
}

ag::Var LanguageModel::logits(ag::Graph& g, ag::Var sequence, const ForwardMode& mode) const {
    const Eigen::Index n = sequence.rows();
    if (sequence.cols() != cfg_.dim) {
        fail(ErrorCode::kConfigMismatch, "lm input width " + std::to_string(sequence.cols()) +
                                             " != " + std::to_string(cfg_.dim));
    }
    if (n > cfg_.max_positions) {
        fail(ErrorCode::kInvalidInput, "sequence of " + std::to_string(n) +
                                           " exceeds max_positions " +
                                           std::to_string(cfg_.max_positions));
    }
    ag::Var x = ag::add(sequence, ag::slice_rows(g.param(*pos_emb_), 0, n));
    for (const auto& b : blocks_) x = b(g, x, true, mode);
    return ag::matmul(ln_f_(g, x), g.param(*lm_head_));
}

ag::Var LanguageModel::loss(ag::Graph& g, ag::Var speech, std::span<const int> instruction,
                            std::span<const int> target, const ForwardMode& mode) const {
    const ag::Var parts[] = {speech, embed_text(g, instruction)};
    return loss(g, ag::concat_rows(parts), target, mode);
}

ag::Var LanguageModel::loss(ag::Graph& g, ag::Var fused_prefix, std::span<const int> target,
                            const ForwardMode& mode) const {
    if (target.empty()) fail(ErrorCode::kInvalidInput, "empty target");
    const Eigen::Index prefix = fused_prefix.rows();
    if (prefix < 1) fail(ErrorCode::kInvalidInput, "empty prefix");
    const ag::Var parts[] = {fused_prefix, embed_text(g, target)};
    ag::Var seq = ag::concat_rows(parts);
    const Eigen::Index n = seq.rows();
    if (n > cfg_.max_positions) {
        fail(ErrorCode::kInvalidInput, "sequence of " + std::to_string(n) +
                                           " exceeds max_positions " +
                                           std::to_string(cfg_.max_positions));
    }
    ag::Var x = ag::add(seq, ag::slice_rows(g.param(*pos_emb_), 0, n));
    for (const auto& b : blocks_) x = b(g, x, true, mode);
    // Only rows that predict a target token reach the head.
    const Eigen::Index first = prefix - 1;
    x = ag::slice_rows(x, first, n - first);
    ag::Var lg = ag::matmul(ln_f_(g, x), g.param(*lm_head_));
    std::vector<int> tg(target.begin(), target.end());
    tg.push_back(vocab_.eos());
    return ag::cross_entropy(lg, tg);
}

double LanguageModel::forward_loss(const FusedInput& z, std::span<const int> target) const {
    ag::Graph g(false);
    ForwardMode mode;
    ag::Var l = loss(g, g.input(z.embeddings), target, mode);
    return l.value()(0, 0);
}

LoraHandle LanguageModel::apply_lora(const LoraSpec& spec, Rng& rng) {
    spec.validate();
    if (lora_) fail(ErrorCode::kAlreadyWrapped, "language model already carries LoRA adapters");
    LoraHandle handle;
    const double scale = spec.alpha / spec.rank;
    for (size_t i = 0; i < blocks_.size(); ++i) {
        Attention& at = blocks_[i].attn;
        for (const auto& t : spec.targets) {
            Linear* lin = t == "q" ? &at.q : t == "k" ? &at.k : t == "v" ? &at.v : &at.o;
            const std::string base = "llm_lora/layers." + std::to_string(i) + ".attn." + t;
            const Eigen::Index in = lin->in();
            const Eigen::Index out = lin->out();
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            std::uniform_real_distribution<double> u(-bound, bound);
            Matrix a(in, spec.rank);
            for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = round_to_float(u(rng));
            lin->lora.a = &store_.add(base + ".lora_a", std::move(a));
            lin->lora.b = &store_.add(base + ".lora_b", Matrix::Zero(spec.rank, out));
            lin->lora.scale = scale;
            lin->lora.dropout = spec.dropout;
            handle.parameter_names.push_back(base + ".lora_a");
            handle.parameter_names.push_back(base + ".lora_b");
            handle.trainable_values += static_cast<size_t>(in * spec.rank + spec.rank * out);
        }
    }
    lora_ = spec;
    return handle;
}

LanguageModel::KvCache LanguageModel::make_cache(Eigen::Index capacity) const {
    if (capacity > cfg_.max_positions) {
        fail(ErrorCode::kInvalidInput, "cache capacity " + std::to_string(capacity) +
                                           " exceeds max_positions " +
                                           std::to_string(cfg_.max_positions));
    }
    KvCache c;
    for (int l = 0; l < cfg_.layers; ++l) {
        c.keys.emplace_back(capacity, cfg_.dim);
        c.values.emplace_back(capacity, cfg_.dim);
    }
    return c;
}

void LanguageModel::copy_cache(const KvCache& from, KvCache& to) {
    to.length = from.length;
    to.keys.resize(from.keys.size());
    to.values.resize(from.values.size());
    for (size_t l = 0; l < from.keys.size(); ++l) {
        if (to.keys[l].rows() != from.keys[l].rows() || to.keys[l].cols() != from.keys[l].cols()) {
            to.keys[l].resize(from.keys[l].rows(), from.keys[l].cols());
            to.values[l].resize(from.values[l].rows(), from.values[l].cols());
        }
        to.keys[l].topRows(from.length) = from.keys[l].topRows(from.length);
        to.values[l].topRows(from.length) = from.values[l].topRows(from.length);
    }
}

void LanguageModel::append(std::span<KvCache* const> caches, std::span<const Eigen::Index> rows,
                           const Matrix& inputs, Matrix& last_logits) const {
    if (caches.size() != rows.size()) {
        fail(ErrorCode::kInvalidInput, "caches and row counts differ in length");
    }
    Eigen::Index total = 0;
    for (size_t c = 0; c < caches.size(); ++c) {
        if (rows[c] < 1) fail(ErrorCode::kInvalidInput, "append needs at least one row per cache");
        if (caches[c]->length + rows[c] > caches[c]->keys.front().rows()) {
            fail(ErrorCode::kBatchTooLarge, "kv cache capacity exceeded");
        }
        total += rows[c];
    }
    if (inputs.rows() != total || inputs.cols() != cfg_.dim) {
        fail(ErrorCode::kConfigMismatch, "append input shape " + shape_string(inputs));
    }

    // Position of every input row within its own sequence.
    std::vector<Eigen::Index> owner(static_cast<size_t>(total));
    std::vector<Eigen::Index> pos(static_cast<size_t>(total));
    {
        Eigen::Index r = 0;
        for (size_t c = 0; c < caches.size(); ++c) {
            for (Eigen::Index j = 0; j < rows[c]; ++j, ++r) {
                owner[static_cast<size_t>(r)] = static_cast<Eigen::Index>(c);
                pos[static_cast<size_t>(r)] = caches[c]->length + j;
            }
        }
    }

    Matrix x = inputs;
    for (Eigen::Index r = 0; r < total; ++r) x.row(r) += pos_emb_->value.row(pos[static_cast<size_t>(r)]);

    const int heads = cfg_.heads;
    const Eigen::Index dh = cfg_.dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix h, q, k, v, att(total, cfg_.dim), o, f;
    std::vector<double> scores;
    for (size_t l = 0; l < blocks_.size(); ++l) {
        const TransformerBlock& b = blocks_[l];
        b.ln1.apply(x, h);
        b.attn.q.apply(h, q);
        b.attn.k.apply(h, k);
        b.attn.v.apply(h, v);
        for (Eigen::Index r = 0; r < total; ++r) {
            KvCache& c = *caches[static_cast<size_t>(owner[static_cast<size_t>(r)])];
            c.keys[l].row(pos[static_cast<size_t>(r)]) = k.row(r);
            c.values[l].row(pos[static_cast<size_t>(r)]) = v.row(r);
        }
        for (Eigen::Index r = 0; r < total; ++r) {
            const KvCache& c = *caches[static_cast<size_t>(owner[static_cast<size_t>(r)])];
            const Eigen::Index span_len = pos[static_cast<size_t>(r)] + 1;
            scores.resize(static_cast<size_t>(span_len));
            for (int hd = 0; hd < heads; ++hd) {
                const Eigen::Index off = hd * dh;
                const double* qr = q.row(r).data() + off;
                double mx = -INFINITY;
                for (Eigen::Index j = 0; j < span_len; ++j) {
                    const double* kr = c.keys[l].row(j).data() + off;
                    double s = 0.0;
                    for (Eigen::Index d = 0; d < dh; ++d) s += qr[d] * kr[d];
                    s *= inv_sqrt;
                    scores[static_cast<size_t>(j)] = s;
                    mx = std::max(mx, s);
                }
                double z = 0.0;
                for (Eigen::Index j = 0; j < span_len; ++j) {
                    scores[static_cast<size_t>(j)] = std::exp(scores[static_cast<size_t>(j)] - mx);
                    z += scores[static_cast<size_t>(j)];
                }
                double* ar = att.row(r).data() + off;
                for (Eigen::Index d = 0; d < dh; ++d) ar[d] = 0.0;
                for (Eigen::Index j = 0; j < span_len; ++j) {
                    const double p = scores[static_cast<size_t>(j)] / z;
                    const double* vr = c.values[l].row(j).data() + off;
                    for (Eigen::Index d = 0; d < dh; ++d) ar[d] += p * vr[d];
                }
            }
        }
        b.attn.o.apply(att, o);
        x += o;
        b.ln2.apply(x, h);
        b.ffn.fc1.apply(h, f);
        gelu_inplace(f);
        b.ffn.fc2.apply(f, o);
        x += o;
    }

    Matrix last(static_cast<Eigen::Index>(caches.size()), cfg_.dim);
    {
        Eigen::Index r = 0;
        for (size_t c = 0; c < caches.size(); ++c) {
            r += rows[c];
            last.row(static_cast<Eigen::Index>(c)) = x.row(r - 1);
            caches[c]->length += rows[c];
        }
    }
    ln_f_.apply(last, h);
    dense_rows(h, lm_head_->value, nullptr, last_logits);
}

void LanguageModel::prefill(const FusedInput& z, KvCache& cache, Matrix& last_logits) const {
    KvCache* cs[] = {&cache};
    const Eigen::Index rows[] = {z.rows()};
    append(cs, rows, z.embeddings, last_logits);
}

void LanguageModel::step(std::span<KvCache* const> caches, std::span<const int> tokens,
                         Matrix& logits) const {
    if (caches.size() != tokens.size()) {
        fail(ErrorCode::kInvalidInput, "caches and tokens differ in length");
    }
    Matrix emb = embed_text(tokens);
    std::vector<Eigen::Index> rows(caches.size(), 1);
    append(caches, rows, emb, logits);
}

}  // namespace srt
