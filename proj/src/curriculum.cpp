#include "srt/curriculum.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

namespace srt {

namespace {

std::string stage_key(TaskKind stage) { return std::string("stage.") + task_name(stage) + "."; }

bool is_stage_name(const std::string& s) { return s == "asr" || s == "smt" || s == "srt"; }

std::string rng_string(const Rng& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

// Epoch-wise shuffled sampling without replacement.
class Sampler {
public:
    Sampler(size_t n, Rng& rng) : order_(n), rng_(rng) { reshuffle(); }

    size_t next() {
        if (pos_ == order_.size()) reshuffle();
        return order_[pos_++];
    }

private:
    void reshuffle() {
        std::iota(order_.begin(), order_.end(), size_t{0});
        for (size_t i = order_.size(); i > 1; --i) {
            std::uniform_int_distribution<size_t> d(0, i - 1);
            std::swap(order_[i - 1], order_[d(rng_)]);
        }
        pos_ = 0;
    }

    std::vector<size_t> order_;
    Rng& rng_;
    size_t pos_ = 0;
};

void scale_grads(ParameterStore& store, double factor) {
    for (auto& [name, p] : store.items()) {
        if (p.trainable && p.grad.size() != 0) p.grad *= factor;
    }
}

bool has_curriculum_stage(const CheckpointMeta& meta) {
    return std::any_of(meta.provenance.begin(), meta.provenance.end(), is_stage_name);
}

ag::Var example_loss(ag::Graph& g, const SrtModel& model, const Utterance& u, TaskKind kind,
                     const ForwardMode& mode) {
    const Vocabulary& vocab = model.vocab();
    const std::vector<int> instruction = vocab.encode(build_instruction(kind, u.sample));
    const std::vector<int> target = vocab.encode(build_target(kind, u.sample));
    ag::Var speech = model.adapter().forward(g, g.input(u.states), mode);
    return model.lm().loss(g, speech, instruction, target, mode);
}

std::string pipeline_name(const std::vector<TaskKind>& p) {
    const std::vector<TaskKind> all = {TaskKind::kAsr, TaskKind::kSmt, TaskKind::kSrt};
    if (p == all) return "full";
    for (TaskKind k : all) {
        if (std::find(p.begin(), p.end(), k) == p.end() && p.size() == 2) {
            std::string n = task_name(k);
            std::transform(n.begin(), n.end(), n.begin(), ::toupper);
            return "w/o " + n;
        }
    }
    std::string n;
    for (TaskKind k : p) n += (n.empty() ? "" : "+") + std::string(task_name(k));
    return n;
}

}  // namespace

StageConfig StageConfig::defaults(TaskKind stage) {
    StageConfig c;
    c.stage = stage;
    c.warmup_steps = 1000;
    c.batch_size = 16;
    switch (stage) {
        case TaskKind::kAsr:
            c.lr_peak = 1e-4;
            c.max_steps = 472000;
            break;
        case TaskKind::kSmt:
            c.lr_peak = 1e-4;
            c.max_steps = 44000;
            break;
        case TaskKind::kSrt:
            c.lr_peak = 1e-5;
            c.max_steps = 83000;
            c.trainables = Trainables::kAdapterPlusLora;
            c.lora = LoraSpec{};
            break;
    }
    return c;
}

StageConfig StageConfig::from(const KeyValueConfig& kv, TaskKind stage) {
    StageConfig c = defaults(stage);
    const std::string p = stage_key(stage);
    c.lr_peak = kv.get(p + "lr", c.lr_peak);
    c.warmup_steps = kv.get(p + "warmup_steps", c.warmup_steps);
    c.max_steps = kv.get(p + "max_steps", c.max_steps);
    c.batch_size = kv.get(p + "batch_size", c.batch_size);
    c.datasets = kv.get_list(p + "datasets", c.datasets);
    if (kv.has(p + "trainables")) {
        const std::string t = kv.get(p + "trainables", std::string());
        if (t == "adapter") {
            c.trainables = Trainables::kAdapterOnly;
        } else if (t == "adapter+lora") {
            c.trainables = Trainables::kAdapterPlusLora;
        } else {
            fail(ErrorCode::kInvalidConfig, p + "trainables must be 'adapter' or 'adapter+lora', got '" + t + "'");
        }
    }
    if (c.trainables == Trainables::kAdapterPlusLora) {
        LoraSpec l = c.lora.value_or(LoraSpec{});
        l.rank = kv.get("lora.rank", l.rank);
        l.alpha = kv.get("lora.alpha", l.alpha);
        l.dropout = kv.get("lora.dropout", l.dropout);
        l.targets = kv.get_list("lora.targets", l.targets);
        c.lora = l;
    }
    c.adamw.beta1 = kv.get("optim.beta1", c.adamw.beta1);
    c.adamw.beta2 = kv.get("optim.beta2", c.adamw.beta2);
    c.adamw.eps = kv.get("optim.eps", c.adamw.eps);
    c.adamw.weight_decay = kv.get("optim.weight_decay", c.adamw.weight_decay);
    c.adamw.clip_norm = kv.get("optim.clip_norm", c.adamw.clip_norm);
    c.seed = kv.get_u64("seed", c.seed);
    c.validate();
    return c;
}

void StageConfig::validate() const {
    if (!(lr_peak > 0.0) || !std::isfinite(lr_peak)) fail(ErrorCode::kInvalidConfig, "lr must be > 0");
    if (warmup_steps < 0) fail(ErrorCode::kInvalidConfig, "warmup_steps must be >= 0");
    if (max_steps < 1) fail(ErrorCode::kInvalidConfig, "max_steps must be >= 1");
    if (batch_size < 1) fail(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
    if (trainables == Trainables::kAdapterPlusLora) {
        if (!lora) fail(ErrorCode::kInvalidConfig, "adapter+lora training needs a LoRA spec");
        lora->validate();
    }
}

std::set<std::string> trainable_parameters(const SrtModel& model, const StageConfig& cfg) {
    std::set<std::string> out;
    for (const auto& name : model.params().names("adapter/")) out.insert(name);
    if (cfg.stage == TaskKind::kSrt && cfg.trainables == Trainables::kAdapterPlusLora) {
        for (const auto& name : model.params().names("llm_lora/")) out.insert(name);
    }
    return out;
}

double lr_schedule(int64_t step, const StageConfig& cfg) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
        return cfg.lr_peak * static_cast<double>(std::max<int64_t>(step, 0)) / cfg.warmup_steps;
    }
    return cfg.lr_peak;
}

std::vector<Utterance> encode_rows(const SrtModel& model, const std::vector<ManifestRow>& rows,
                                   FeatureStore& features, const std::string& base_dir) {
    TagRegistry tags;
    for (const auto& t : model.vocab().tags()) tags.add(t.code);
    std::vector<Utterance> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        Utterance u;
        u.sample = to_sample(r, tags);
        u.states = model.encode(features.get(r.audio, base_dir));
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<Utterance> load_utterances(const SrtModel& model, const std::string& manifest) {
    FeatureStore store(model.config().mel);
    const std::string dir = std::filesystem::path(manifest).parent_path().string();
    return encode_rows(model, load_manifest(manifest), store, dir);
}

Checkpoint initial_checkpoint(const KeyValueConfig& config, const TagRegistry& tags) {
    ModelConfig mc = ModelConfig::from(config);
    mc.validate();
    Checkpoint ck;
    ck.model = std::make_shared<SrtModel>(mc, tags);
    ck.meta.config = config;
    ck.meta.config_hash = ck.model->config().shape_hash();
    return ck;
}

Checkpoint run_stage(const StageConfig& cfg, const Checkpoint& init,
                     const std::vector<Utterance>& data, const StepCallback& on_step) {
    cfg.validate();
    if (!init.model) fail(ErrorCode::kInvalidConfig, "run_stage needs an init checkpoint");
    const std::string name = task_name(cfg.stage);
    if (cfg.stage != TaskKind::kAsr && !cfg.allow_fresh_start && !has_curriculum_stage(init.meta)) {
        std::string upper = name;
        std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
        fail(ErrorCode::kInvalidConfig, upper + " requires an ASR checkpoint");
    }
    const std::string hash = init.model->config().shape_hash();
    if (!init.meta.config_hash.empty() && init.meta.config_hash != hash) {
        fail(ErrorCode::kConfigMismatch, "init checkpoint hash " + init.meta.config_hash +
                                             " does not match its model (" + hash + ")");
    }
    if (!cfg.expected_config_hash.empty() && cfg.expected_config_hash != hash) {
        fail(ErrorCode::kConfigMismatch, "init checkpoint was built for config " + hash +
                                             ", this run expects " + cfg.expected_config_hash);
    }
    if (data.empty()) fail(ErrorCode::kInvalidInput, name + " stage has no training data");
    const Eigen::Index enc_dim = init.model->config().encoder.dim;
    for (const auto& u : data) {
        if (u.states.cols() != enc_dim) {
            fail(ErrorCode::kConfigMismatch, "encoder states of width " + std::to_string(u.states.cols()) +
                                                 " for a model expecting " + std::to_string(enc_dim));
        }
    }

    Checkpoint out;
    out.model = init.model->clone();
    SrtModel& model = *out.model;
    if (cfg.trainables == Trainables::kAdapterPlusLora && cfg.stage == TaskKind::kSrt && !model.lm().has_lora()) {
        model.apply_lora(*cfg.lora);
    }
    ParameterStore& store = model.params();
    store.set_trainable(trainable_parameters(model, cfg));
    AdamW opt(store, cfg.adamw);

    Rng rng = component_rng(cfg.seed, "curriculum/" + name);
    Sampler sampler(data.size(), rng);
    ForwardMode mode{true, &rng};
    out.meta = init.meta;
    out.meta.losses.clear();
    out.meta.losses.reserve(static_cast<size_t>(cfg.max_steps));

    for (int64_t step = 1; step <= cfg.max_steps; ++step) {
        store.zero_grad();
        double total = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const Utterance& u = data[sampler.next()];
            ag::Graph g;
            ag::Var l = example_loss(g, model, u, cfg.stage, mode);
            total += l.value()(0, 0);
            g.backward(l);
        }
        const double loss = total / cfg.batch_size;
        if (!std::isfinite(loss)) {
            fail(ErrorCode::kDivergence, name + " stage diverged at step " + std::to_string(step));
        }
        scale_grads(store, 1.0 / cfg.batch_size);
        const double lr = lr_schedule(step, cfg);
        try {
            opt.step(lr);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::kDivergence) throw;
            fail(ErrorCode::kDivergence, name + " stage diverged at step " + std::to_string(step) + ": " + e.what());
        }
        out.meta.losses.push_back(loss);
        if (on_step) on_step(step, loss, lr);
    }
    store.set_trainable({});
    out.meta.provenance.push_back(name);
    out.meta.step = init.meta.step + cfg.max_steps;
    out.meta.config_hash = hash;
    out.meta.rng_state = rng_string(rng);
    return out;
}

double dataset_loss(const SrtModel& model, const std::vector<Utterance>& data, TaskKind kind) {
    if (data.empty()) return 0.0;
    double total = 0.0;
    const ForwardMode mode;
    for (const auto& u : data) {
        ag::Graph g(false);
        total += example_loss(g, model, u, kind, mode).value()(0, 0);
    }
    return total / static_cast<double>(data.size());
}

EvalResult evaluate(const SrtModel& model, const std::vector<Utterance>& data, TaskKind kind,
                    const DecodeConfig& decode, int batch_size) {
    if (batch_size < 1) fail(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
    EvalResult r;
    r.task = kind;
    r.items = data.size();
    size_t exact = 0, trans = 0, transl = 0;
    for (size_t start = 0; start < data.size(); start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(data.size(), start + static_cast<size_t>(batch_size));
        std::vector<FusedInput> batch;
        for (size_t i = start; i < end; ++i) {
            batch.push_back(model.fused_prefix(data[i].states, build_instruction(kind, data[i].sample)));
        }
        const auto gens = generate_batch(model.lm(), batch, decode);
        for (size_t i = start; i < end; ++i) {
            const SrtSample& s = data[i].sample;
            std::string text = model.vocab().decode(gens[i - start].tokens);
            if (kind == TaskKind::kSrt) {
                auto parsed = parse_srt_output(text, s.src, *s.tgt);
                SrtOutput o;
                if (auto* ok = std::get_if<SrtOutput>(&parsed)) {
                    o = *ok;
                } else {
                    ++r.parse_misses;
                    o = parse_srt_or_fallback(text, s.src, *s.tgt);
                }
                const bool t1 = o.transcription == s.transcription;
                const bool t2 = o.translation == *s.translation;
                trans += t1;
                transl += t2;
                exact += t1 && t2;
            } else {
                exact += text == build_target(kind, s);
            }
            r.outputs.push_back(std::move(text));
        }
    }
    if (r.items > 0) {
        const double n = static_cast<double>(r.items);
        r.exact_match = exact / n;
        r.transcription_match = trans / n;
        r.translation_match = transl / n;
    }
    return r;
}

PretrainConfig PretrainConfig::from(const KeyValueConfig& kv) {
    PretrainConfig c;
    c.steps = kv.get("pretrain.steps", c.steps);
    c.lr = kv.get("pretrain.lr", c.lr);
    c.warmup_steps = kv.get("pretrain.warmup_steps", c.warmup_steps);
    c.batch_size = kv.get("pretrain.batch_size", c.batch_size);
    c.seed = kv.get_u64("seed", c.seed);
    if (c.steps < 0 || c.batch_size < 1 || !(c.lr > 0.0) || c.warmup_steps < 0) {
        fail(ErrorCode::kInvalidConfig, "bad pretrain.* settings");
    }
    return c;
}

Checkpoint pretrain_language_model(const PretrainConfig& cfg, const Checkpoint& init,
                                   const std::vector<ManifestRow>& text, const StepCallback& on_step) {
    if (!init.model) fail(ErrorCode::kInvalidConfig, "pretraining needs an init checkpoint");
    if (has_curriculum_stage(init.meta)) {
        fail(ErrorCode::kInvalidConfig, "the base LM is pretrained before the curriculum, not after");
    }
    if (init.model->lm().has_lora()) fail(ErrorCode::kInvalidConfig, "cannot pretrain a LoRA-wrapped model");
    std::vector<const ManifestRow*> rows;
    for (const auto& r : text) {
        if (r.tgt && r.translation) rows.push_back(&r);
    }
    if (rows.empty()) fail(ErrorCode::kInvalidInput, "pretraining needs bilingual text");

    Checkpoint out;
    out.model = init.model->clone();
    SrtModel& model = *out.model;
    const LanguageModel& lm = model.lm();
    const Vocabulary& vocab = model.vocab();
    ParameterStore& store = model.params();
    {
        const auto names = store.names("llm/");
        store.set_trainable(std::set<std::string>(names.begin(), names.end()));
    }
    AdamW opt(store, AdamWConfig{});
    Rng rng = component_rng(cfg.seed, "pretrain");
    Sampler sampler(rows.size(), rng);
    const ForwardMode mode{true, &rng};
    const Eigen::Index n_q = model.config().adapter.n_q;
    std::uniform_int_distribution<int> task(0, 2);
    StageConfig sched;
    sched.lr_peak = cfg.lr;
    sched.warmup_steps = cfg.warmup_steps;

    auto padded_slot = [&](ag::Graph& g, const std::string& s) {
        // Text standing in for the speech slot: token embeddings padded to n_q rows.
        std::vector<int> ids = vocab.encode(s);
        if (static_cast<Eigen::Index>(ids.size()) > n_q) ids.resize(static_cast<size_t>(n_q));
        ids.resize(static_cast<size_t>(n_q), vocab.pad());
        return lm.embed_text(g, ids);
    };

    out.meta = init.meta;
    out.meta.losses.clear();
    for (int64_t step = 1; step <= cfg.steps; ++step) {
        store.zero_grad();
        double total = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const ManifestRow& r = *rows[sampler.next()];
            const std::string src = tag_surface(r.src), tgt = tag_surface(*r.tgt);
            ag::Graph g;
            ag::Var l;
            switch (task(rng)) {
                case 0: {
                    // Bilingual text: Y <src><tgt> Z after a slot-sized run of padding.
                    std::vector<int> prefix(static_cast<size_t>(n_q), vocab.pad());
                    prefix.push_back(vocab.bos());
                    l = lm.loss(g, lm.embed_text(g, prefix), vocab.encode(r.transcription + src + tgt + *r.translation), mode);
                    break;
                }
                case 1: {
                    const ag::Var parts[] = {padded_slot(g, r.transcription), lm.embed_text(g, vocab.encode(src))};
                    l = lm.loss(g, ag::concat_rows(parts), vocab.encode(r.transcription), mode);
                    break;
                }
                default: {
                    const ag::Var parts[] = {padded_slot(g, *r.translation), lm.embed_text(g, vocab.encode(tgt))};
                    l = lm.loss(g, ag::concat_rows(parts), vocab.encode(*r.translation), mode);
                    break;
                }
            }
            total += l.value()(0, 0);
            g.backward(l);
        }
        const double loss = total / cfg.batch_size;
        if (!std::isfinite(loss)) fail(ErrorCode::kDivergence, "pretraining diverged at step " + std::to_string(step));
        scale_grads(store, 1.0 / cfg.batch_size);
        const double lr = lr_schedule(step, sched);
        opt.step(lr);
        out.meta.losses.push_back(loss);
        if (on_step) on_step(step, loss, lr);
    }
    store.set_trainable({});
    out.meta.provenance.push_back("pretrain");
    out.meta.step = init.meta.step + cfg.steps;
    out.meta.config_hash = model.config().shape_hash();
    out.meta.rng_state = rng_string(rng);
    return out;
}

AblationRow run_pipeline(const AblationSetup& setup, const std::vector<TaskKind>& pipeline,
                         const StepCallback& on_step) {
    if (pipeline.empty()) fail(ErrorCode::kInvalidConfig, "empty pipeline");
    for (size_t i = 1; i < pipeline.size(); ++i) {
        if (static_cast<int>(pipeline[i]) <= static_cast<int>(pipeline[i - 1])) {
            fail(ErrorCode::kInvalidConfig, "pipeline stages must follow ASR, SMT, SRT order without repeats");
        }
    }
    Checkpoint ck = setup.base;
    for (size_t i = 0; i < pipeline.size(); ++i) {
        const TaskKind k = pipeline[i];
        StageConfig cfg = k == TaskKind::kAsr ? setup.asr_cfg : k == TaskKind::kSmt ? setup.smt_cfg : setup.srt_cfg;
        cfg.stage = k;
        cfg.allow_fresh_start = i == 0;
        const auto& data = k == TaskKind::kAsr ? setup.asr : k == TaskKind::kSmt ? setup.smt : setup.srt;
        ck = run_stage(cfg, ck, data, on_step);
    }
    AblationRow row;
    row.name = pipeline_name(pipeline);
    row.pipeline = pipeline;
    row.result = evaluate(*ck.model, setup.eval, TaskKind::kSrt, setup.decode);
    return row;
}

AblationReport ablate(const AblationSetup& setup, const std::vector<std::vector<TaskKind>>& pipelines,
                      const StepCallback& on_step) {
    if (pipelines.empty()) fail(ErrorCode::kInvalidConfig, "no pipelines to run");
    AblationReport rep;
    for (const auto& p : pipelines) rep.rows.push_back(run_pipeline(setup, p, on_step));
    for (auto& r : rep.rows) r.delta = r.result.exact_match - rep.rows.front().result.exact_match;
    return rep;
}

AblationReport ablate(const AblationSetup& setup, const StepCallback& on_step) {
    using K = TaskKind;
    return ablate(setup,
                  {{K::kAsr, K::kSmt, K::kSrt}, {K::kSmt, K::kSrt}, {K::kAsr, K::kSrt}, {K::kAsr, K::kSmt}},
                  on_step);
}

std::string AblationReport::to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json o;
        o["name"] = r.name;
        std::vector<std::string> stages;
        for (TaskKind k : r.pipeline) stages.emplace_back(task_name(k));
        o["pipeline"] = stages;
        o["items"] = r.result.items;
        o["srt_exact_match"] = r.result.exact_match;
        o["transcription_match"] = r.result.transcription_match;
        o["translation_match"] = r.result.translation_match;
        o["parse_misses"] = r.result.parse_misses;
        o["delta"] = r.delta;
        j.push_back(o);
    }
    return j.dump(2) + "\n";
}

std::string AblationReport::to_table() const {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %8s %8s %8s %8s %8s\n", "pipeline", "joint", "transcr", "transl",
                  "misses", "delta");
    os << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-10s %8.3f %8.3f %8.3f %8zu %+8.3f\n", r.name.c_str(),
                      r.result.exact_match, r.result.transcription_match, r.result.translation_match,
                      r.result.parse_misses, r.delta);
        os << buf;
    }
    return os.str();
}

}  // namespace srt
