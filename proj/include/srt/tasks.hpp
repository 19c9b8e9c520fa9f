#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace srt {

struct LanguageTag {
    std::string code;     // ISO 639-3, e.g. "eng"
    std::string surface;  // "<|eng|>"

    bool operator==(const LanguageTag& o) const { return code == o.code; }
};

// Ordered table of language tags. The built-in table ships with the library;
// more codes can be registered at runtime.
class TagRegistry {
public:
    static const TagRegistry& builtin();
    static TagRegistry parse(std::string_view table);

    const std::vector<LanguageTag>& tags() const { return tags_; }
    std::optional<LanguageTag> find(std::string_view code) const;
    LanguageTag require(std::string_view code) const;
    void add(std::string_view code);
    int version() const { return version_; }

private:
    std::vector<LanguageTag> tags_;
    int version_ = 0;
};

std::string tag_surface(std::string_view code);

enum class TaskKind { kAsr, kSmt, kSrt };

const char* task_name(TaskKind kind);
TaskKind parse_task(std::string_view name);

struct SrtSample {
    std::string audio_ref;
    LanguageTag src;
    std::optional<LanguageTag> tgt;
    std::string transcription;
    std::optional<std::string> translation;
};

std::string build_instruction(TaskKind kind, const SrtSample& s);
std::string build_target(TaskKind kind, const SrtSample& s);

struct SrtOutput {
    std::string transcription;
    std::string translation;
};

// Delimiter pair not found; the raw text is kept for fallback scoring.
struct ParseMiss {
    std::string raw;
};

std::variant<SrtOutput, ParseMiss> parse_srt_output(std::string_view text, const LanguageTag& src,
                                                    const LanguageTag& tgt);

// ParseMiss scores the whole output as the translation with an empty transcription.
SrtOutput parse_srt_or_fallback(std::string_view text, const LanguageTag& src,
                                const LanguageTag& tgt);

bool contains_tag_surface(std::string_view text, const TagRegistry& registry = TagRegistry::builtin());

}  // namespace srt
