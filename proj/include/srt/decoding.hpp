#pragma once

#include "srt/language_model.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace srt {

enum class Strategy { kGreedy, kBeam };

struct DecodeConfig {
    Strategy strategy = Strategy::kGreedy;
    int beam_size = 5;
    int max_new_tokens = 128;
    double length_penalty = 1.0;
    int eos_id = -1;  // -1: taken from the scorer

    void validate() const;
};

Strategy parse_strategy(const std::string& name);
const char* strategy_name(Strategy s);

struct Generation {
    std::vector<int> tokens;  // EOS excluded
    bool truncated = false;   // budget ran out before EOS
    double score = 0.0;       // sum log p / length^length_penalty
};

// Next-token log-probabilities over a set of growing sequences. States are
// integer handles owned by the scorer.
class StepScorer {
public:
    virtual ~StepScorer() = default;
    virtual int vocab_size() const = 0;
    virtual int eos() const = 0;
    // One root state per prefix; row i of logp belongs to the returned state i.
    virtual std::vector<int> roots(size_t count, Matrix& logp) = 0;
    // New state = parents[i] followed by tokens[i].
    virtual std::vector<int> extend(std::span<const int> parents, std::span<const int> tokens,
                                    Matrix& logp) = 0;
    virtual void release(int state) = 0;
    // Like extend, but each parent is consumed; used when no parent is shared.
    virtual std::vector<int> advance(std::span<const int> states, std::span<const int> tokens,
                                     Matrix& logp);
};

// Scorer backed by the language model's KV cache, over a batch of fused prefixes.
class LmScorer : public StepScorer {
public:
    LmScorer(const LanguageModel& lm, std::span<const FusedInput> prefixes, int max_new_tokens);

    int vocab_size() const override;
    int eos() const override;
    std::vector<int> roots(size_t count, Matrix& logp) override;
    std::vector<int> extend(std::span<const int> parents, std::span<const int> tokens,
                            Matrix& logp) override;
    void release(int state) override;
    std::vector<int> advance(std::span<const int> states, std::span<const int> tokens,
                             Matrix& logp) override;

private:
    int allocate();

    const LanguageModel& lm_;
    std::span<const FusedInput> prefixes_;
    Eigen::Index capacity_ = 0;
    std::vector<std::unique_ptr<LanguageModel::KvCache>> pool_;
    std::vector<int> free_;
};

// Scorer over an arbitrary function of the token prefix (tests, analysis).
class FunctionScorer : public StepScorer {
public:
    using Fn = std::function<RowVector(size_t root, const std::vector<int>& prefix)>;
    FunctionScorer(int vocab_size, int eos, Fn fn);

    int vocab_size() const override { return vocab_; }
    int eos() const override { return eos_; }
    std::vector<int> roots(size_t count, Matrix& logp) override;
    std::vector<int> extend(std::span<const int> parents, std::span<const int> tokens,
                            Matrix& logp) override;
    void release(int) override {}

private:
    struct State {
        size_t root;
        std::vector<int> prefix;
    };
    int vocab_;
    int eos_;
    Fn fn_;
    std::vector<State> states_;
};

void log_softmax_rows(Matrix& m);

// Decodes `count` independent sequences whose roots the scorer provides.
std::vector<Generation> search(StepScorer& scorer, size_t count, const DecodeConfig& cfg);

Generation generate(const LanguageModel& lm, const FusedInput& z, const DecodeConfig& cfg);
std::vector<Generation> generate_batch(const LanguageModel& lm, std::span<const FusedInput> batch,
                                       const DecodeConfig& cfg);

// Reference search: scores every sequence of at most `horizon` tokens
// (ending at EOS or truncated at the horizon) and returns the best.
Generation exhaustive_search(StepScorer& scorer, int horizon, double length_penalty);

struct BenchRow {
    std::string strategy;
    int batch = 0;
    double wall_seconds = 0.0;
    size_t items = 0;

    double per_item() const { return items == 0 ? 0.0 : wall_seconds / static_cast<double>(items); }
};

// Decodes every prefix in batches of `batch_size`; wall_seconds is the best of
// `repeats` runs.
BenchRow bench_decode(const LanguageModel& lm, std::span<const FusedInput> items,
                      const DecodeConfig& cfg, int batch_size, int repeats);

}  // namespace srt
