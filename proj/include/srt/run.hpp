#pragma once

#include "srt/curriculum.hpp"
#include "srt/metrics.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace srt {

// Everything one command needs, resolved from a key-value config.
struct RunConfig {
    KeyValueConfig kv;
    ModelConfig model;
    StageConfig asr, smt, srt;
    PretrainConfig pretrain;
    DecodeConfig decode;
    SyntheticSpec synth;
    std::string data_dir;    // data.dir; default home of asr/smt/srt.jsonl
    std::string report_dir;  // paths.reports
    uint64_t seed = 0;

    static RunConfig from(const KeyValueConfig& kv);
    const StageConfig& stage(TaskKind kind) const;
    // stage.<name>.datasets, or <data.dir>/<name>.jsonl.
    std::vector<std::string> manifests(TaskKind kind) const;
};

// decode.strategy, decode.beam_size, decode.max_new_tokens, decode.length_penalty.
DecodeConfig decode_config_from(const KeyValueConfig& kv);

using LogFn = std::function<void(const std::string& line)>;

// Fresh model, text-pretrained when pretrain.steps > 0.
Checkpoint base_checkpoint(const RunConfig& rc, const LogFn& log = {});

// ASR may start without init (from base_checkpoint); later stages may not.
Checkpoint train_stage(const RunConfig& rc, TaskKind stage, const std::optional<Checkpoint>& init,
                       const LogFn& log = {});

// ASR -> SMT -> SRT; each checkpoint is saved under out_dir/<stage> when
// out_dir is non-empty.
Checkpoint run_curriculum(const RunConfig& rc, const std::string& out_dir, const LogFn& log = {});

struct InferResult {
    std::string transcription;
    std::string translation;
    std::string raw;
    bool parse_miss = false;
    bool truncated = false;
};

InferResult infer(const SrtModel& model, const std::string& audio_ref, const std::string& src,
                  const std::string& tgt, const DecodeConfig& decode);

// Decodes an SRT manifest and scores every direction: BLEU on translations,
// WER on transcriptions.
EvalReport evaluate_manifest(const SrtModel& model, const std::string& manifest,
                             const DecodeConfig& decode);

// Line-aligned hypothesis and reference files for one direction.
DirectionScore score_files(const std::string& hyp_path, const std::string& ref_path,
                           const std::string& src, const std::string& tgt, bool with_wer);

// Decodes `items` synthetic SRT prefixes once per batch size.
std::vector<BenchRow> bench(const RunConfig& rc, const SrtModel& model, size_t items,
                            const std::vector<int>& batch_sizes, int repeats = 1);
std::string bench_csv(const std::vector<BenchRow>& rows);

AblationReport run_ablation(const RunConfig& rc, const LogFn& log = {});

}  // namespace srt
