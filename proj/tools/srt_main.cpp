// srt: command-line front end over the C API.

#include "srt/srt.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CallError {
    int status;
    std::string message;
};

void check(int status) {
    if (status != SRT_OK) throw CallError{status, srt_last_error()};
}

struct StrDeleter {
    void operator()(char* p) const { srt_string_free(p); }
};
using CStr = std::unique_ptr<char, StrDeleter>;

struct ConfigDeleter {
    void operator()(srt_config* c) const { srt_config_free(c); }
};
struct ModelDeleter {
    void operator()(srt_model* m) const { srt_model_free(m); }
};
using Config = std::unique_ptr<srt_config, ConfigDeleter>;
using Model = std::unique_ptr<srt_model, ModelDeleter>;

std::string take(char* p) {
    CStr holder(p);
    return p != nullptr ? std::string(p) : std::string();
}

Config make_config(const std::string& path, const std::vector<std::string>& sets, const long long* seed) {
    srt_config* c = nullptr;
    check(srt_config_load(path.empty() ? nullptr : path.c_str(), &c));
    Config cfg(c);
    if (seed != nullptr && *seed >= 0) check(srt_config_set(c, ("seed=" + std::to_string(*seed)).c_str()));
    for (const auto& s : sets) check(srt_config_set(c, s.c_str()));
    return cfg;
}

Model load_model(const std::string& dir) {
    srt_model* m = nullptr;
    check(srt_model_load(dir.c_str(), &m));
    return Model(m);
}

std::string ckpt_root() {
    const char* env = std::getenv("SRT_CKPT_DIR");
    return env != nullptr && *env != '\0' ? env : "checkpoints";
}

void log_line(const char* line, void*) {
    std::fprintf(stderr, "%s\n", line);
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os || !(os << text)) throw CallError{SRT_ERR_IO, "cannot write " + path.string()};
}

std::vector<std::string> tag_codes() {
    char* out = nullptr;
    check(srt_language_tags(&out));
    std::istringstream in(take(out));
    std::vector<std::string> codes;
    std::string line;
    while (std::getline(in, line)) codes.push_back(line.substr(0, line.find('\t')));
    return codes;
}

void require_tag(const std::string& code) {
    const auto codes = tag_codes();
    for (const auto& c : codes) {
        if (c == code) return;
    }
    std::string msg = "unknown language tag '" + code + "'; registered tags:";
    for (const auto& c : codes) msg += " " + c;
    throw CallError{SRT_ERR_INVALID_INPUT, msg};
}

std::vector<int> parse_ints(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw CallError{SRT_ERR_INVALID_INPUT, "bad integer '" + item + "' in '" + csv + "'"};
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Speech recognition and translation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(srt_version()));

    std::string config_path, out, init, ckpt, audio, src, tgt, manifest, stage;
    std::vector<std::string> sets, hyps, refs, srcs, tgts;
    long long seed = -1;
    int beam = 0, repeats = 1;
    size_t items = 1000;
    std::string batches = "4,8,16";
    bool with_wer = false;

    auto common = [&](CLI::App* c, bool config_required) {
        auto* o = c->add_option("--config", config_path, "key = value config file");
        if (config_required) o->required();
        o->check(CLI::ExistingFile);
        c->add_option("--set", sets, "override, key=value (repeatable)");
        c->add_option("--seed", seed, "seed override");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    common(synth, false);
    synth->add_option("--out", out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train one curriculum stage");
    common(train, true);
    train->add_option("--stage", stage, "asr | smt | srt")->required()->check(CLI::IsMember({"asr", "smt", "srt"}));
    train->add_option("--init", init, "checkpoint to resume from");
    train->add_option("--out", out, "checkpoint directory (default $SRT_CKPT_DIR/<stage>)");

    auto* curriculum = app.add_subcommand("curriculum", "run ASR, SMT and SRT in sequence");
    common(curriculum, true);
    curriculum->add_option("--out", out, "checkpoint root (default $SRT_CKPT_DIR)");

    auto* infer = app.add_subcommand("infer", "transcribe and translate one utterance");
    infer->add_option("--ckpt", ckpt, "checkpoint directory (default $SRT_CKPT_DIR/srt)");
    infer->add_option("--audio", audio, "WAV path or features.bin#key")->required();
    infer->add_option("--src", src, "source language code")->required();
    infer->add_option("--tgt", tgt, "target language code")->required();
    infer->add_option("--beam", beam, "beam size (1 = greedy)");
    infer->add_option("--set", sets, "override, key=value (repeatable)");

    auto* eval = app.add_subcommand("eval", "score model output or hypothesis files");
    eval->add_option("--ckpt", ckpt, "checkpoint to decode --manifest with");
    eval->add_option("--manifest", manifest, "SRT manifest to decode and score");
    eval->add_option("--hyp", hyps, "hypothesis file (repeatable, aligned with --ref)");
    eval->add_option("--ref", refs, "reference file (repeatable)");
    eval->add_option("--src", srcs, "source code per direction");
    eval->add_option("--tgt", tgts, "target code per direction");
    eval->add_flag("--wer", with_wer, "also report WER for file pairs");
    eval->add_option("--set", sets, "override, key=value (repeatable)");
    eval->add_option("--out", out, "report directory (report.json, report.txt)");

    auto* bench = app.add_subcommand("bench", "decode throughput across batch sizes");
    bench->add_option("--ckpt", ckpt, "checkpoint directory");
    bench->add_option("--config", config_path, "build an untrained model from this config instead")->check(CLI::ExistingFile);
    bench->add_option("--items", items, "utterances per batch size");
    bench->add_option("--batches", batches, "comma-separated batch sizes");
    bench->add_option("--repeats", repeats, "timing repeats, best kept");
    bench->add_option("--set", sets, "override, key=value (repeatable)");
    bench->add_option("--out", out, "CSV path (stdout when omitted)");

    auto* ablate = app.add_subcommand("ablate", "train and score the four pipeline variants");
    common(ablate, true);
    ablate->add_option("--out", out, "report directory (default reports)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and --version exit 0; usage errors exit 2.
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            Config cfg = make_config(config_path, sets, &seed);
            check(srt_synth(cfg.get(), out.c_str()));
            std::printf("wrote corpus to %s\n", out.c_str());
        } else if (train->parsed()) {
            Config cfg = make_config(config_path, sets, &seed);
            Model start;
            if (!init.empty()) {
                start = load_model(init);
            } else if (stage != "asr") {
                std::string up = stage;
                for (char& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
                throw CallError{SRT_ERR_INVALID_CONFIG, up + " requires an ASR checkpoint (pass --init)"};
            }
            srt_model* m = nullptr;
            check(srt_train_stage(cfg.get(), stage.c_str(), start.get(), log_line, nullptr, &m));
            Model trained(m);
            const std::string dir = out.empty() ? (fs::path(ckpt_root()) / stage).string() : out;
            check(srt_model_save(trained.get(), dir.c_str()));
            std::printf("saved %s checkpoint to %s\n", stage.c_str(), dir.c_str());
        } else if (curriculum->parsed()) {
            Config cfg = make_config(config_path, sets, &seed);
            const std::string root = out.empty() ? ckpt_root() : out;
            srt_model* m = nullptr;
            check(srt_curriculum(cfg.get(), root.c_str(), log_line, nullptr, &m));
            Model done(m);
            std::printf("provenance %s\n", take([&] {
                            char* p = nullptr;
                            check(srt_model_provenance(done.get(), &p));
                            return p;
                        }()).c_str());
        } else if (infer->parsed()) {
            require_tag(src);
            require_tag(tgt);
            Config cfg = make_config("", sets, nullptr);
            Model model = load_model(ckpt.empty() ? (fs::path(ckpt_root()) / "srt").string() : ckpt);
            srt_infer_result r{};
            check(srt_infer(model.get(), cfg.get(), audio.c_str(), src.c_str(), tgt.c_str(), beam, &r));
            if (r.parse_miss) {
                std::fprintf(stderr, "warning: no %s/%s delimiter in output; raw text follows\n", src.c_str(), tgt.c_str());
                std::printf("raw: %s\n", r.raw);
            } else {
                std::printf("transcription: %s\n", r.transcription);
                std::printf("translation: %s\n", r.translation);
            }
            if (r.truncated) std::fprintf(stderr, "warning: output hit the token budget\n");
            srt_infer_result_free(&r);
        } else if (eval->parsed()) {
            char* json = nullptr;
            char* table = nullptr;
            if (!manifest.empty()) {
                if (ckpt.empty()) throw CallError{SRT_ERR_INVALID_INPUT, "--manifest needs --ckpt"};
                Config cfg = make_config("", sets, nullptr);
                Model model = load_model(ckpt);
                check(srt_eval_manifest(model.get(), cfg.get(), manifest.c_str(), &json, &table));
            } else {
                if (hyps.empty() || hyps.size() != refs.size()) {
                    throw CallError{SRT_ERR_INVALID_INPUT, "give --manifest, or matching --hyp/--ref pairs"};
                }
                if (srcs.empty()) srcs.assign(hyps.size(), "eng");
                if (tgts.empty()) tgts.assign(hyps.size(), "eng");
                if (srcs.size() != hyps.size() || tgts.size() != hyps.size()) {
                    throw CallError{SRT_ERR_INVALID_INPUT, "--src/--tgt must be given once per --hyp"};
                }
                std::vector<const char*> s, t, h, r;
                for (size_t i = 0; i < hyps.size(); ++i) {
                    s.push_back(srcs[i].c_str());
                    t.push_back(tgts[i].c_str());
                    h.push_back(hyps[i].c_str());
                    r.push_back(refs[i].c_str());
                }
                check(srt_eval_files(s.data(), t.data(), h.data(), r.data(), hyps.size(), with_wer ? 1 : 0, &json, &table));
            }
            const std::string j = take(json), tb = take(table);
            std::printf("%s", tb.c_str());
            if (!out.empty()) {
                write_file(fs::path(out) / "report.json", j);
                write_file(fs::path(out) / "report.txt", tb);
            }
        } else if (bench->parsed()) {
            Config cfg = make_config(config_path, sets, nullptr);
            Model model;
            if (!ckpt.empty()) {
                model = load_model(ckpt);
            } else if (!config_path.empty()) {
                srt_model* m = nullptr;
                check(srt_model_create(cfg.get(), &m));
                model.reset(m);
            } else {
                throw CallError{SRT_ERR_INVALID_INPUT, "bench needs --ckpt or --config"};
            }
            const std::vector<int> sizes = parse_ints(batches);
            char* csv = nullptr;
            check(srt_bench(model.get(), cfg.get(), items, sizes.data(), sizes.size(), repeats, &csv));
            const std::string text = take(csv);
            if (out.empty()) {
                std::printf("%s", text.c_str());
            } else {
                write_file(out, text);
                std::printf("wrote %s\n", out.c_str());
            }
        } else if (ablate->parsed()) {
            Config cfg = make_config(config_path, sets, &seed);
            char* json = nullptr;
            char* table = nullptr;
            check(srt_ablate(cfg.get(), log_line, nullptr, &json, &table));
            const std::string j = take(json), tb = take(table);
            const fs::path dir = out.empty() ? fs::path("reports") : fs::path(out);
            write_file(dir / "ablation.json", j);
            write_file(dir / "ablation.txt", tb);
            std::printf("%s", tb.c_str());
        }
    } catch (const CallError& e) {
        std::fprintf(stderr, "error (%s): %s\n", srt_status_name(e.status), e.message.c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
