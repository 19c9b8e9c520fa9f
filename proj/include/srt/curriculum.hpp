#pragma once

#include "srt/checkpoint.hpp"
#include "srt/datasets.hpp"
#include "srt/decoding.hpp"
#include "srt/optimizer.hpp"

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace srt {

enum class Trainables { kAdapterOnly, kAdapterPlusLora };

struct StageConfig {
    TaskKind stage = TaskKind::kAsr;
    double lr_peak = 1e-4;
    int warmup_steps = 1000;
    int max_steps = 1000;
    int batch_size = 16;
    std::vector<std::string> datasets;
    Trainables trainables = Trainables::kAdapterOnly;
    std::optional<LoraSpec> lora;
    AdamWConfig adamw;
    uint64_t seed = 0;
    // A non-ASR stage normally refuses to start from an untrained model.
    bool allow_fresh_start = false;
    // Shape hash the init checkpoint must carry; empty accepts any.
    std::string expected_config_hash;

    // lr, warmup and batch from the published schedule; SRT also unfreezes LoRA.
    static StageConfig defaults(TaskKind stage);
    // Keys under stage.<asr|smt|srt>.*, lora.* and seed.
    static StageConfig from(const KeyValueConfig& kv, TaskKind stage);
    void validate() const;
};

std::set<std::string> trainable_parameters(const SrtModel& model, const StageConfig& cfg);

// Linear warmup from 0 to lr_peak, then constant.
double lr_schedule(int64_t step, const StageConfig& cfg);

// A sample with its (frozen) encoder states computed once.
struct Utterance {
    SrtSample sample;
    Matrix states;
};

std::vector<Utterance> encode_rows(const SrtModel& model, const std::vector<ManifestRow>& rows,
                                   FeatureStore& features, const std::string& base_dir);
std::vector<Utterance> load_utterances(const SrtModel& model, const std::string& manifest);

// Untrained checkpoint for a model configuration.
Checkpoint initial_checkpoint(const KeyValueConfig& config, const TagRegistry& tags = TagRegistry::builtin());

using StepCallback = std::function<void(int64_t step, double loss, double lr)>;

// Trains one stage starting from `init` and returns the new checkpoint. The
// init checkpoint is left untouched.
Checkpoint run_stage(const StageConfig& cfg, const Checkpoint& init,
                     const std::vector<Utterance>& data, const StepCallback& on_step = {});

// Mean teacher-forced loss over `data` in the format of `kind`.
double dataset_loss(const SrtModel& model, const std::vector<Utterance>& data, TaskKind kind);

struct EvalResult {
    TaskKind task = TaskKind::kAsr;
    size_t items = 0;
    double exact_match = 0.0;             // whole output vs. target
    double transcription_match = 0.0;     // SRT only, after parsing
    double translation_match = 0.0;       // SRT only, after parsing
    size_t parse_misses = 0;
    std::vector<std::string> outputs;
};

// Decodes every utterance with the instruction of `kind`. For SRT the exact
// match counts samples whose parsed transcription and translation both match.
EvalResult evaluate(const SrtModel& model, const std::vector<Utterance>& data, TaskKind kind,
                    const DecodeConfig& decode, int batch_size = 16);

// Text-only training of the base LM on bilingual text. Plays the part of
// the pretrained LLM the curriculum starts from.
struct PretrainConfig {
    int steps = 0;
    double lr = 1e-3;
    int warmup_steps = 100;
    int batch_size = 16;
    uint64_t seed = 0;

    static PretrainConfig from(const KeyValueConfig& kv);
};

Checkpoint pretrain_language_model(const PretrainConfig& cfg, const Checkpoint& init,
                                   const std::vector<ManifestRow>& text,
                                   const StepCallback& on_step = {});

struct AblationSetup {
    Checkpoint base;
    std::vector<Utterance> asr, smt, srt;
    std::vector<Utterance> eval;  // scored with the SRT instruction
    StageConfig asr_cfg, smt_cfg, srt_cfg;
    DecodeConfig decode;
};

struct AblationRow {
    std::string name;
    std::vector<TaskKind> pipeline;
    EvalResult result;
    double delta = 0.0;  // joint exact match minus the full pipeline's
};

struct AblationReport {
    std::vector<AblationRow> rows;

    std::string to_json() const;
    std::string to_table() const;
};

// Trains the listed stages in order from setup.base and scores SRT output.
AblationRow run_pipeline(const AblationSetup& setup, const std::vector<TaskKind>& pipeline,
                         const StepCallback& on_step = {});
// Full, w/o ASR, w/o SMT, w/o SRT.
AblationReport ablate(const AblationSetup& setup, const StepCallback& on_step = {});
AblationReport ablate(const AblationSetup& setup, const std::vector<std::vector<TaskKind>>& pipelines,
                      const StepCallback& on_step = {});

}  // namespace srt
