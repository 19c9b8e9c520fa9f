#include <doctest.h>

#include "srt/tasks.hpp"
#include "srt/common.hpp"

#include <variant>

using namespace srt;

namespace {

SrtSample sample(const std::string& src, const std::string& tgt, std::string y, std::string z) {
    const auto& reg = TagRegistry::builtin();
    SrtSample s;
    s.audio_ref = "a.wav";
    s.src = reg.require(src);
    s.tgt = reg.require(tgt);
    s.transcription = std::move(y);
    s.translation = std::move(z);
    return s;
}

}  // namespace

TEST_SUITE("tasks") {

TEST_CASE("builtin registry") {
    const auto& reg = TagRegistry::builtin();
    REQUIRE(reg.tags().size() == 15);
    CHECK(reg.tags().front().code == "deu");
    CHECK(reg.find("zho").has_value());
    CHECK_FALSE(reg.find("xxx").has_value());
    CHECK(tag_surface("deu") == "<|deu|>");
    try {
        reg.require("xxx");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kInvalidInput);
        CHECK(std::string(e.what()).find("eng") != std::string::npos);
    }
}

TEST_CASE("registry extension and table parsing") {
    TagRegistry r = TagRegistry::parse("# version 2\neng\t<|eng|>\nfra\t<|fra|>\n");
    CHECK(r.version() == 2);
    CHECK(r.tags().size() == 2);
    r.add("xho");
    r.add("xho");
    CHECK(r.tags().size() == 3);
    CHECK_THROWS_AS(r.add("EN"), Error);
    CHECK_THROWS_AS(TagRegistry::parse("eng\t<eng>\n"), Error);
}

TEST_CASE("instruction and target formats") {
    const SrtSample s = sample("eng", "deu", "hello there", "hallo da");
    CHECK(build_instruction(TaskKind::kAsr, s) == "<|eng|>");
    CHECK(build_target(TaskKind::kAsr, s) == "hello there");
    CHECK(build_instruction(TaskKind::kSmt, s) == "hello there<|eng|><|deu|>");
    CHECK(build_target(TaskKind::kSmt, s) == "hallo da");
    CHECK(build_instruction(TaskKind::kSrt, s) == "<|eng|><|deu|>");
    CHECK(build_target(TaskKind::kSrt, s) == "hello there<|eng|><|deu|>hallo da");
}

TEST_CASE("invalid samples") {
    SrtSample s = sample("eng", "deu", "a", "b");
    s.tgt = s.src;
    CHECK_THROWS_AS(build_instruction(TaskKind::kSrt, s), Error);
    s = sample("eng", "deu", "a", "b");
    s.translation.reset();
    CHECK_THROWS_AS(build_target(TaskKind::kSmt, s), Error);
    // ASR needs neither
    s.tgt.reset();
    CHECK(build_target(TaskKind::kAsr, s) == "a");
    try {
        build_instruction(TaskKind::kSrt, s);
        FAIL("expected InvalidSample");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kInvalidSample);
    }
}

TEST_CASE("parser splits at the first delimiter") {
    const auto& reg = TagRegistry::builtin();
    const auto eng = reg.require("eng"), deu = reg.require("deu");
    auto r = parse_srt_output("ab<|eng|><|deu|>cd<|eng|><|deu|>ef", eng, deu);
    REQUIRE(std::holds_alternative<SrtOutput>(r));
    CHECK(std::get<SrtOutput>(r).transcription == "ab");
    CHECK(std::get<SrtOutput>(r).translation == "cd<|eng|><|deu|>ef");
    // wrong direction is a miss
    r = parse_srt_output("ab<|deu|><|eng|>cd", eng, deu);
    REQUIRE(std::holds_alternative<ParseMiss>(r));
    CHECK(std::get<ParseMiss>(r).raw == "ab<|deu|><|eng|>cd");
    const SrtOutput fb = parse_srt_or_fallback("just text", eng, deu);
    CHECK(fb.transcription.empty());
    CHECK(fb.translation == "just text");
    r = parse_srt_output("<|eng|><|deu|>", eng, deu);
    REQUIRE(std::holds_alternative<SrtOutput>(r));
    CHECK(std::get<SrtOutput>(r).transcription.empty());
}

TEST_CASE("parser inverts the target format for every direction") {
    const auto& tags = TagRegistry::builtin().tags();
    int n = 0;
    for (const auto& a : tags) {
        for (const auto& b : tags) {
            if (a == b) continue;
            const SrtSample s = sample(a.code, b.code, "y " + a.code, "z " + b.code + " <|x");
            auto r = parse_srt_output(build_target(TaskKind::kSrt, s), a, b);
            REQUIRE(std::holds_alternative<SrtOutput>(r));
            CHECK(std::get<SrtOutput>(r).transcription == s.transcription);
            CHECK(std::get<SrtOutput>(r).translation == *s.translation);
            ++n;
        }
    }
    CHECK(n == 210);
}

TEST_CASE("tag surface detection and task names") {
    CHECK(contains_tag_surface("a<|fra|>b"));
    CHECK_FALSE(contains_tag_surface("a<|xxx|>b"));
    CHECK(parse_task("SRT") == TaskKind::kSrt);
    CHECK(std::string(task_name(TaskKind::kSmt)) == "smt");
    CHECK_THROWS_AS(parse_task("mt"), Error);
}

}
