#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace srt {

// Lowercase, punctuation to spaces, whitespace collapsed, NFC.
std::string normalize_text(std::string_view text);

struct WerStats {
    size_t substitutions = 0;
    size_t deletions = 0;
    size_t insertions = 0;
    size_t ref_words = 0;

    double rate() const;
};

WerStats wer_stats(const std::vector<std::string>& refs, const std::vector<std::string>& hyps);
double wer(const std::vector<std::string>& refs, const std::vector<std::string>& hyps);

enum class BleuTokenizer { k13a, kChar };

struct BleuSignature {
    BleuTokenizer tokenizer = BleuTokenizer::k13a;
    int max_order = 4;

    std::string to_string() const;
};

// char for jpn, kor, tha, yue, zho targets; 13a otherwise.
BleuTokenizer bleu_tokenizer_for(std::string_view target_language);

std::string tokenize_13a(std::string_view line);
std::string tokenize_char(std::string_view line);
// Splits on the same whitespace set as Python's str.split().
std::vector<std::string> split_whitespace(std::string_view text);

struct BleuStats {
    std::array<size_t, 4> correct{};
    std::array<size_t, 4> total{};
    size_t sys_len = 0;
    size_t ref_len = 0;
};

BleuStats bleu_stats(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
                     const BleuSignature& sig);
double bleu_from_stats(const BleuStats& st, int max_order = 4);
double bleu(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
            const BleuSignature& sig = {});

struct DirectionScore {
    std::string src;
    std::string tgt;
    double bleu = 0.0;
    std::optional<double> wer;
};

struct EvalReport {
    std::vector<DirectionScore> directions;
    std::vector<std::pair<std::string, double>> source_averages;  // BLEU, in first-seen order
    double global_average = 0.0;

    std::string to_json() const;
    std::string to_table() const;
};

EvalReport aggregate(const std::vector<DirectionScore>& scores);

}  // namespace srt
