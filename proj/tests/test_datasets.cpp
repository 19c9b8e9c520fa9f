#include <doctest.h>

#include "srt/datasets.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using namespace srt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("srt_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ErrorCode manifest_error(const std::string& text) {
    const fs::path p = scratch("manifest_err") / "m.jsonl";
    std::ofstream(p) << text;
    try {
        load_manifest(p.string());
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::kIo;  // not reached when the manifest is bad
}

}  // namespace

TEST_SUITE("datasets") {

TEST_CASE("manifest round trip") {
    const fs::path p = scratch("manifest") / "m.jsonl";
    std::vector<ManifestRow> rows = {
        {"a.wav", "eng", "hello world", std::string("deu"), std::string("hallo welt")},
        {"b.wav", "fra", "bonjour", std::nullopt, std::nullopt},
    };
    write_manifest(p.string(), rows);
    CHECK(load_manifest(p.string()) == rows);
    const SrtSample s = to_sample(rows[0]);
    CHECK(s.src.surface == "<|eng|>");
    CHECK(s.tgt->code == "deu");
}

TEST_CASE("manifest schema errors") {
    CHECK(manifest_error("{\"audio\": \"a\", \"src\": \"eng\"}\n") == ErrorCode::kSchemaError);
    CHECK(manifest_error("{\"audio\": \"a\", \"src\": \"xxx\", \"transcription\": \"t\"}\n") == ErrorCode::kSchemaError);
    CHECK(manifest_error("{\"audio\": 3, \"src\": \"eng\", \"transcription\": \"t\"}\n") == ErrorCode::kSchemaError);
    CHECK(manifest_error("{\"audio\": \"a\", \"src\": \"eng\", \"transcription\": \"t\", \"tgt\": \"eng\", \"translation\": \"u\"}\n") == ErrorCode::kSchemaError);
    CHECK(manifest_error("{\"audio\": \"a\", \"src\": \"eng\", \"transcription\": \"t\", \"tgt\": \"deu\"}\n") == ErrorCode::kSchemaError);
    CHECK(manifest_error("{\"audio\": \"a\", \"src\": \"eng\", \"transcription\": \"t\", \"translation\": \"u\"}\n") == ErrorCode::kSchemaError);
    CHECK(manifest_error("{\"audio\": \"a\", \"src\": \"eng\", \"transcription\": \"t<|deu|>\"}\n") == ErrorCode::kSchemaError);
    CHECK(manifest_error("{\"audio\": \"a\",\n") == ErrorCode::kParseError);
    CHECK(manifest_error("[1, 2]\n") == ErrorCode::kParseError);
}

TEST_CASE("parse errors name the line") {
    const fs::path p = scratch("manifest_line") / "m.jsonl";
    std::ofstream(p) << "{\"audio\": \"a\", \"src\": \"eng\", \"transcription\": \"t\"}\n\nnot json\n";
    try {
        load_manifest(p.string());
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("m.jsonl:3") != std::string::npos);
    }
}

TEST_CASE("synthetic corpus shape") {
    SyntheticSpec spec;
    const SyntheticCorpus c = synth_corpus(spec);
    CHECK(c.asr.size() == 64);
    CHECK(c.smt.size() == 64);
    CHECK(c.srt.size() == 64);
    CHECK(c.features.size() == 64);
    std::set<std::string> transcriptions;
    for (const auto& r : c.srt) {
        transcriptions.insert(r.transcription);
        REQUIRE(r.tgt.has_value());
        CHECK(*r.tgt != r.src);
        CHECK(dictionary_translate(c, r.transcription, r.src, *r.tgt) == *r.translation);
        CHECK(dictionary_translate(c, *r.translation, *r.tgt, r.src) == r.transcription);
        const auto words = std::count(r.transcription.begin(), r.transcription.end(), ' ') + 1;
        CHECK(words >= spec.min_words);
        CHECK(words <= spec.max_words);
        const std::string key = r.audio.substr(r.audio.find('#') + 1);
        CHECK(c.features.at(key).rows() == static_cast<Eigen::Index>(r.transcription.size()) * spec.frames_per_char);
        CHECK(c.features.at(key).cols() == 80);
    }
    CHECK(transcriptions.size() == 64);
    // both directions occur
    std::set<std::string> srcs;
    for (const auto& r : c.srt) srcs.insert(r.src);
    CHECK(srcs.size() == 2);
}

TEST_CASE("synthetic corpus is deterministic per seed") {
    SyntheticSpec spec;
    spec.n_samples = 16;
    const SyntheticCorpus a = synth_corpus(spec), b = synth_corpus(spec);
    CHECK(a.srt == b.srt);
    CHECK(a.features == b.features);
    spec.seed = 1;
    CHECK(synth_corpus(spec).srt != a.srt);
}

TEST_CASE("synthetic spec validation") {
    SyntheticSpec spec;
    spec.languages = {"eng"};
    try {
        synth_corpus(spec);
        FAIL("expected InvalidSpec");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kInvalidSpec);
    }
    spec.tasks = {TaskKind::kAsr};
    CHECK(synth_corpus(spec).asr.size() == 64);
}

TEST_CASE("written corpus loads back through the feature store") {
    const fs::path dir = scratch("corpus");
    SyntheticSpec spec;
    spec.n_samples = 6;
    const SyntheticCorpus c = synth_corpus(spec);
    write_corpus(dir.string(), c);
    for (const char* f : {"asr.jsonl", "smt.jsonl", "srt.jsonl", "features.bin", "dictionary.tsv"}) {
        CHECK(fs::exists(dir / f));
    }
    const auto rows = load_manifest((dir / "srt.jsonl").string());
    CHECK(rows == c.srt);
    FeatureStore store;
    const MelFeatures f = store.get(rows[0].audio, dir.string());
    CHECK(f.frames == synth_mel_features(rows[0].transcription, spec));
}

TEST_CASE("wav mode writes audio the store can featurize") {
    const fs::path dir = scratch("corpus_wav");
    SyntheticSpec spec;
    spec.n_samples = 2;
    spec.audio = AudioMode::kSynthWav;
    const SyntheticCorpus c = synth_corpus(spec);
    write_corpus(dir.string(), c);
    const auto rows = load_manifest((dir / "asr.jsonl").string());
    FeatureStore store;
    const MelFeatures f = store.get(rows[0].audio, dir.string());
    const Waveform w = synth_waveform(rows[0].transcription, spec);
    CHECK(f.n_frames() == static_cast<Eigen::Index>((w.samples.size() + 159) / 160));
    CHECK(f.n_mels() == 80);
}

}
