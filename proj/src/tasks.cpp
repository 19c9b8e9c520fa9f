#include "srt/tasks.hpp"

#include "srt/common.hpp"

#include <cctype>
#include <sstream>

namespace srt {

namespace {
#include "language_tags.inc"

bool valid_code(std::string_view code) {
    if (code.size() != 3) return false;
    for (char c : code) {
        if (c < 'a' || c > 'z') return false;
    }
    return true;
}
}  // namespace

const TagRegistry& TagRegistry::builtin() {
    static const TagRegistry registry = parse(kBuiltinTagTable);
    return registry;
}

TagRegistry TagRegistry::parse(std::string_view table) {
    TagRegistry reg;
    std::istringstream in{std::string(table)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("version");
            if (pos != std::string::npos) reg.version_ = std::stoi(line.substr(pos + 7));
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) fail(ErrorCode::kParseError, "bad tag table line: " + line);
        const std::string code = line.substr(0, tab);
        const std::string surface = line.substr(tab + 1);
        if (surface != tag_surface(code)) {
            fail(ErrorCode::kParseError, "tag surface does not match code: " + line);
        }
        reg.add(code);
    }
    return reg;
}

std::optional<LanguageTag> TagRegistry::find(std::string_view code) const {
    for (const auto& t : tags_) {
        if (t.code == code) return t;
    }
    return std::nullopt;
}

LanguageTag TagRegistry::require(std::string_view code) const {
    auto t = find(code);
    if (!t) {
        std::string known;
        for (const auto& tag : tags_) known += (known.empty() ? "" : ", ") + tag.code;
        fail(ErrorCode::kInvalidInput,
             "unknown language tag '" + std::string(code) + "' (registered: " + known + ")");
    }
    return *t;
}

void TagRegistry::add(std::string_view code) {
    if (!valid_code(code)) {
        fail(ErrorCode::kInvalidInput, "language code must be three lowercase letters: " +
                                           std::string(code));
    }
    if (find(code)) return;
    tags_.push_back(LanguageTag{std::string(code), tag_surface(code)});
}

std::string tag_surface(std::string_view code) { return "<|" + std::string(code) + "|>"; }

const char* task_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::kAsr: return "asr";
        case TaskKind::kSmt: return "smt";
        case TaskKind::kSrt: return "srt";
    }
    return "?";
}

TaskKind parse_task(std::string_view name) {
    std::string lower(name);
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "asr") return TaskKind::kAsr;
    if (lower == "smt") return TaskKind::kSmt;
    if (lower == "srt") return TaskKind::kSrt;
    fail(ErrorCode::kInvalidConfig, "unknown task '" + std::string(name) + "' (asr|smt|srt)");
}

namespace {

const LanguageTag& require_tgt(TaskKind kind, const SrtSample& s) {
    if (!s.tgt) {
        fail(ErrorCode::kInvalidSample,
             std::string(task_name(kind)) + " sample needs a target language");
    }
    if (s.tgt->code == s.src.code) {
        fail(ErrorCode::kInvalidSample, "source and target language are both " + s.src.code);
    }
    return *s.tgt;
}

const std::string& require_translation(TaskKind kind, const SrtSample& s) {
    if (!s.translation) {
        fail(ErrorCode::kInvalidSample,
             std::string(task_name(kind)) + " sample needs a translation");
    }
    return *s.translation;
}

}  // namespace

std::string build_instruction(TaskKind kind, const SrtSample& s) {
    switch (kind) {
        case TaskKind::kAsr:
            return s.src.surface;
        case TaskKind::kSmt:
            return s.transcription + s.src.surface + require_tgt(kind, s).surface;
        case TaskKind::kSrt:
            return s.src.surface + require_tgt(kind, s).surface;
    }
    return {};
}

std::string build_target(TaskKind kind, const SrtSample& s) {
    switch (kind) {
        case TaskKind::kAsr:
            return s.transcription;
        case TaskKind::kSmt:
            require_tgt(kind, s);
            return require_translation(kind, s);
        case TaskKind::kSrt: {
            const LanguageTag& tgt = require_tgt(kind, s);
            return s.transcription + s.src.surface + tgt.surface + require_translation(kind, s);
        }
    }
    return {};
}

std::variant<SrtOutput, ParseMiss> parse_srt_output(std::string_view text, const LanguageTag& src,
                                                    const LanguageTag& tgt) {
    const std::string delim = src.surface + tgt.surface;
    const auto pos = text.find(delim);
    if (pos == std::string_view::npos) return ParseMiss{std::string(text)};
    return SrtOutput{std::string(text.substr(0, pos)), std::string(text.substr(pos + delim.size()))};
}

SrtOutput parse_srt_or_fallback(std::string_view text, const LanguageTag& src,
                                const LanguageTag& tgt) {
    auto parsed = parse_srt_output(text, src, tgt);
    if (auto* out = std::get_if<SrtOutput>(&parsed)) return *out;
    return SrtOutput{std::string(), std::get<ParseMiss>(parsed).raw};
}

bool contains_tag_surface(std::string_view text, const TagRegistry& registry) {
    for (const auto& t : registry.tags()) {
        if (text.find(t.surface) != std::string_view::npos) return true;
    }
    return false;
}

}  // namespace srt
