#pragma once

#include "srt/audio.hpp"
#include "srt/checkpoint.hpp"
#include "srt/tasks.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace srt {

struct ManifestRow {
    std::string audio;
    std::string src;
    std::string transcription;
    std::optional<std::string> tgt;
    std::optional<std::string> translation;

    bool operator==(const ManifestRow&) const = default;
};

// JSON lines; one object per line with audio, src, transcription and, for
// translation tasks, tgt and translation.
std::vector<ManifestRow> load_manifest(const std::string& path,
                                       const TagRegistry& tags = TagRegistry::builtin());
void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
SrtSample to_sample(const ManifestRow& row, const TagRegistry& tags = TagRegistry::builtin());

// Resolves manifest audio references to features. "file.bin#key" names a
// tensor inside a feature blob; anything else is a WAV path. Relative paths
// are taken from `base_dir`.
class FeatureStore {
public:
    explicit FeatureStore(MelConfig mel = {}) : mel_(mel) {}
    MelFeatures get(const std::string& audio_ref, const std::string& base_dir);

private:
    MelConfig mel_;
    std::map<std::string, TensorMap> blobs_;
};

enum class AudioMode { kSynthMel, kSynthWav };

struct SyntheticSpec {
    uint64_t seed = 0;
    int n_samples = 64;
    std::vector<std::string> languages = {"eng", "deu"};
    int concepts = 24;  // word inventory size per language
    int min_words = 2;
    int max_words = 3;
    AudioMode audio = AudioMode::kSynthMel;
    int n_mels = 80;
    int frames_per_char = 2;
    std::set<TaskKind> tasks = {TaskKind::kAsr, TaskKind::kSmt, TaskKind::kSrt};
};

struct SyntheticCorpus {
    std::vector<ManifestRow> asr, smt, srt;
    // concept -> word per language, same order as spec.languages
    std::vector<std::vector<std::string>> dictionary;
    std::vector<std::string> languages;
    TensorMap features;                      // synth-mel
    std::map<std::string, Waveform> audio;   // synth-wav, keyed by relative path

    const std::vector<ManifestRow>& rows(TaskKind kind) const;
};

SyntheticCorpus synth_corpus(const SyntheticSpec& spec);
void write_corpus(const std::string& dir, const SyntheticCorpus& corpus);

// Word-by-word translation through the corpus dictionary.
std::string dictionary_translate(const SyntheticCorpus& corpus, const std::string& text,
                                 const std::string& from, const std::string& to);

// Feature matrix the synth-mel mode assigns to a string.
Matrix synth_mel_features(const std::string& text, const SyntheticSpec& spec);
Waveform synth_waveform(const std::string& text, const SyntheticSpec& spec);

}  // namespace srt
