#include "srt/run.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace srt {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorCode::kIo, "cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    return out;
}

std::vector<Utterance> load_all(const SrtModel& model, const std::vector<std::string>& manifests) {
    std::vector<Utterance> out;
    for (const auto& m : manifests) {
        auto part = load_utterances(model, m);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

std::vector<ManifestRow> load_rows(const std::vector<std::string>& manifests) {
    std::vector<ManifestRow> out;
    for (const auto& m : manifests) {
        auto part = load_manifest(m);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

StepCallback stage_logger(const LogFn& log, const std::string& name, int every) {
    if (!log) return {};
    return [log, name, every](int64_t step, double loss, double lr) {
        if (step == 1 || step % every == 0) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%s step %lld loss %.6f lr %.3g", name.c_str(),
                          static_cast<long long>(step), loss, lr);
            log(buf);
        }
    };
}

}  // namespace

DecodeConfig decode_config_from(const KeyValueConfig& kv) {
    DecodeConfig d;
    d.strategy = parse_strategy(kv.get("decode.strategy", std::string("greedy")));
    d.beam_size = kv.get("decode.beam_size", d.beam_size);
    d.max_new_tokens = kv.get("decode.max_new_tokens", d.max_new_tokens);
    d.length_penalty = kv.get("decode.length_penalty", d.length_penalty);
    d.validate();
    return d;
}

RunConfig RunConfig::from(const KeyValueConfig& kv) {
    RunConfig rc;
    rc.kv = kv;
    rc.seed = kv.get_u64("seed", 0);
    rc.model = ModelConfig::from(kv);
    rc.model.validate();
    rc.asr = StageConfig::from(kv, TaskKind::kAsr);
    rc.smt = StageConfig::from(kv, TaskKind::kSmt);
    rc.srt = StageConfig::from(kv, TaskKind::kSrt);
    rc.pretrain = PretrainConfig::from(kv);

    rc.decode = decode_config_from(kv);

    rc.synth.seed = kv.get_u64("synth.seed", rc.seed);
    rc.synth.n_samples = kv.get("synth.samples", rc.synth.n_samples);
    rc.synth.languages = kv.get_list("synth.languages", rc.synth.languages);
    rc.synth.concepts = kv.get("synth.concepts", rc.synth.concepts);
    rc.synth.min_words = kv.get("synth.min_words", rc.synth.min_words);
    rc.synth.max_words = kv.get("synth.max_words", rc.synth.max_words);
    rc.synth.frames_per_char = kv.get("synth.frames_per_char", rc.synth.frames_per_char);
    rc.synth.n_mels = rc.model.mel.n_mels;
    const std::string mode = kv.get("synth.mode", std::string("synth-mel"));
    if (mode == "synth-mel") {
        rc.synth.audio = AudioMode::kSynthMel;
    } else if (mode == "synth-wav") {
        rc.synth.audio = AudioMode::kSynthWav;
    } else {
        fail(ErrorCode::kInvalidConfig, "synth.mode must be synth-mel or synth-wav, got '" + mode + "'");
    }

    rc.data_dir = kv.get("data.dir", std::string("data/corpus"));
    rc.report_dir = kv.get("paths.reports", std::string("reports"));
    return rc;
}

const StageConfig& RunConfig::stage(TaskKind kind) const {
    return kind == TaskKind::kAsr ? asr : kind == TaskKind::kSmt ? smt : srt;
}

std::vector<std::string> RunConfig::manifests(TaskKind kind) const {
    const StageConfig& s = stage(kind);
    if (!s.datasets.empty()) return s.datasets;
    return {(fs::path(data_dir) / (std::string(task_name(kind)) + ".jsonl")).string()};
}

Checkpoint base_checkpoint(const RunConfig& rc, const LogFn& log) {
    Checkpoint ck = initial_checkpoint(rc.kv);
    if (rc.pretrain.steps <= 0) return ck;
    std::vector<ManifestRow> text = load_rows(rc.manifests(TaskKind::kSmt));
    if (log) log("pretraining base LM for " + std::to_string(rc.pretrain.steps) + " steps on " +
                 std::to_string(text.size()) + " bilingual lines");
    return pretrain_language_model(rc.pretrain, ck, text, stage_logger(log, "pretrain", 250));
}

Checkpoint train_stage(const RunConfig& rc, TaskKind stage, const std::optional<Checkpoint>& init,
                       const LogFn& log) {
    std::optional<Checkpoint> start = init;
    if (!start) {
        if (stage != TaskKind::kAsr) {
            std::string name = task_name(stage);
            std::transform(name.begin(), name.end(), name.begin(), ::toupper);
            fail(ErrorCode::kInvalidConfig, name + " requires an ASR checkpoint");
        }
        start = base_checkpoint(rc, log);
    }
    StageConfig cfg = rc.stage(stage);
    cfg.expected_config_hash = rc.model.resolved().shape_hash();
    const auto data = load_all(*start->model, rc.manifests(stage));
    if (log) log(std::string(task_name(stage)) + ": " + std::to_string(data.size()) + " samples, " +
                 std::to_string(cfg.max_steps) + " steps");
    return run_stage(cfg, *start, data, stage_logger(log, task_name(stage), 250));
}

Checkpoint run_curriculum(const RunConfig& rc, const std::string& out_dir, const LogFn& log) {
    std::optional<Checkpoint> ck;
    for (TaskKind k : {TaskKind::kAsr, TaskKind::kSmt, TaskKind::kSrt}) {
        ck = train_stage(rc, k, ck, log);
        if (!out_dir.empty()) {
            const std::string dir = (fs::path(out_dir) / task_name(k)).string();
            save_checkpoint(dir, *ck);
            if (log) log("saved " + dir);
        }
    }
    return *ck;
}

InferResult infer(const SrtModel& model, const std::string& audio_ref, const std::string& src,
                  const std::string& tgt, const DecodeConfig& decode) {
    TagRegistry tags;
    for (const auto& t : model.vocab().tags()) tags.add(t.code);
    SrtSample s;
    s.audio_ref = audio_ref;
    s.src = tags.require(src);
    s.tgt = tags.require(tgt);
    if (s.src == *s.tgt) fail(ErrorCode::kInvalidSample, "source and target language are the same");
    FeatureStore store(model.config().mel);
    const Matrix states = model.encode(store.get(audio_ref, ""));
    const Generation g = generate(model.lm(), model.fused_prefix(states, build_instruction(TaskKind::kSrt, s)), decode);
    InferResult r;
    r.raw = model.vocab().decode(g.tokens);
    r.truncated = g.truncated;
    auto parsed = parse_srt_output(r.raw, s.src, *s.tgt);
    if (auto* ok = std::get_if<SrtOutput>(&parsed)) {
        r.transcription = ok->transcription;
        r.translation = ok->translation;
    } else {
        r.parse_miss = true;
        const SrtOutput o = parse_srt_or_fallback(r.raw, s.src, *s.tgt);
        r.transcription = o.transcription;
        r.translation = o.translation;
    }
    return r;
}

EvalReport evaluate_manifest(const SrtModel& model, const std::string& manifest, const DecodeConfig& decode) {
    const auto data = load_utterances(model, manifest);
    if (data.empty()) fail(ErrorCode::kInvalidInput, manifest + " has no rows");
    for (const auto& u : data) {
        if (!u.sample.tgt) fail(ErrorCode::kSchemaError, manifest + ": evaluation needs tgt and translation on every row");
    }
    const EvalResult res = evaluate(model, data, TaskKind::kSrt, decode);
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::array<std::vector<std::string>, 4>> groups;
    for (size_t i = 0; i < data.size(); ++i) {
        const SrtSample& s = data[i].sample;
        const auto key = std::make_pair(s.src.code, s.tgt->code);
        if (!groups.count(key)) order.push_back(key);
        auto& g = groups[key];
        const SrtOutput o = parse_srt_or_fallback(res.outputs[i], s.src, *s.tgt);
        g[0].push_back(*s.translation);
        g[1].push_back(o.translation);
        g[2].push_back(s.transcription);
        g[3].push_back(o.transcription);
    }
    std::vector<DirectionScore> scores;
    for (const auto& key : order) {
        const auto& g = groups[key];
        DirectionScore d;
        d.src = key.first;
        d.tgt = key.second;
        BleuSignature sig;
        sig.tokenizer = bleu_tokenizer_for(d.tgt);
        d.bleu = bleu(g[0], g[1], sig);
        d.wer = wer(g[2], g[3]);
        scores.push_back(d);
    }
    return aggregate(scores);
}

DirectionScore score_files(const std::string& hyp_path, const std::string& ref_path,
                           const std::string& src, const std::string& tgt, bool with_wer) {
    const auto hyps = read_lines(hyp_path);
    const auto refs = read_lines(ref_path);
    if (hyps.size() != refs.size()) {
        fail(ErrorCode::kInvalidInput, hyp_path + " has " + std::to_string(hyps.size()) + " lines, " +
                                           ref_path + " has " + std::to_string(refs.size()));
    }
    DirectionScore d;
    d.src = src;
    d.tgt = tgt;
    BleuSignature sig;
    sig.tokenizer = bleu_tokenizer_for(tgt);
    d.bleu = bleu(refs, hyps, sig);
    if (with_wer) d.wer = wer(refs, hyps);
    return d;
}

std::vector<BenchRow> bench(const RunConfig& rc, const SrtModel& model, size_t items,
                            const std::vector<int>& batch_sizes, int repeats) {
    if (items == 0) fail(ErrorCode::kInvalidConfig, "bench needs at least one item");
    SyntheticSpec spec = rc.synth;
    spec.n_samples = static_cast<int>(std::min<size_t>(items, 256));
    spec.tasks = {TaskKind::kSrt};
    spec.audio = AudioMode::kSynthMel;
    const SyntheticCorpus corpus = synth_corpus(spec);
    std::vector<FusedInput> distinct;
    for (const auto& r : corpus.srt) {
        MelFeatures f;
        f.frames = synth_mel_features(r.transcription, spec);
        const SrtSample s = to_sample(r);
        distinct.push_back(model.fused_prefix(model.encode(f), build_instruction(TaskKind::kSrt, s)));
    }
    std::vector<FusedInput> all;
    all.reserve(items);
    for (size_t i = 0; i < items; ++i) all.push_back(distinct[i % distinct.size()]);
    // Repeats are interleaved across batch sizes so drift in machine load
    // does not favour whichever size runs first.
    std::vector<BenchRow> rows;
    for (int r = 0; r < std::max(1, repeats); ++r) {
        for (size_t i = 0; i < batch_sizes.size(); ++i) {
            BenchRow row = bench_decode(model.lm(), all, rc.decode, batch_sizes[i], 1);
            if (r == 0) {
                rows.push_back(row);
            } else {
                rows[i].wall_seconds = std::min(rows[i].wall_seconds, row.wall_seconds);
            }
        }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "strategy,batch,wall_seconds,items\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.6f,%zu\n", r.strategy.c_str(), r.batch, r.wall_seconds, r.items);
        os << buf;
    }
    return os.str();
}

AblationReport run_ablation(const RunConfig& rc, const LogFn& log) {
    AblationSetup setup;
    setup.base = base_checkpoint(rc, log);
    const SrtModel& m = *setup.base.model;
    setup.asr = load_all(m, rc.manifests(TaskKind::kAsr));
    setup.smt = load_all(m, rc.manifests(TaskKind::kSmt));
    setup.srt = load_all(m, rc.manifests(TaskKind::kSrt));
    setup.eval = setup.srt;
    setup.asr_cfg = rc.asr;
    setup.smt_cfg = rc.smt;
    setup.srt_cfg = rc.srt;
    setup.decode = rc.decode;
    return ablate(setup, stage_logger(log, "stage", 500));
}

}  // namespace srt
