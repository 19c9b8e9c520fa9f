#include "srt/srt.h"

#include "srt/run.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <new>

struct srt_config {
    srt::KeyValueConfig kv;
};

struct srt_model {
    srt::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
int guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return SRT_OK;
    } catch (const srt::Error& e) {
        g_last_error = e.what();
        return static_cast<int>(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return SRT_ERR_BATCH_TOO_LARGE;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SRT_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SRT_ERR_INTERNAL;
    }
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p == nullptr) throw std::bad_alloc();
    std::memcpy(p, s.data(), s.size() + 1);
    return p;
}

void need(const void* p, const char* what) {
    if (p == nullptr) srt::fail(srt::ErrorCode::kInvalidInput, std::string(what) + " is NULL");
}

srt::LogFn logger(srt_log_fn fn, void* user) {
    if (fn == nullptr) return {};
    return [fn, user](const std::string& line) { fn(line.c_str(), user); };
}

srt::TaskKind stage_of(const char* name) {
    need(name, "stage");
    return srt::parse_task(name);
}

// Checkpoint config overlaid with the caller's settings.
srt::KeyValueConfig effective(const srt_model* model, const srt_config* cfg) {
    srt::KeyValueConfig kv = model->ckpt.meta.config;
    if (cfg != nullptr) kv.merge(cfg->kv);
    return kv;
}

}  // namespace

extern "C" {

const char* srt_version(void) { return "0.1.0"; }

const char* srt_last_error(void) { return g_last_error.c_str(); }

const char* srt_status_name(int status) {
    if (status == SRT_OK) return "Ok";
    if (status == SRT_ERR_INTERNAL) return "Internal";
    if (status >= SRT_ERR_INVALID_INPUT && status <= SRT_ERR_IO) {
        return srt::error_code_name(static_cast<srt::ErrorCode>(status));
    }
    return "Unknown";
}

void srt_string_free(char* s) { std::free(s); }

int srt_language_tags(char** out) {
    return guarded([&] {
        need(out, "out");
        std::string s;
        for (const auto& t : srt::TagRegistry::builtin().tags()) s += t.code + "\t" + t.surface + "\n";
        *out = dup(s);
    });
}

int srt_config_load(const char* path, srt_config** out) {
    return guarded([&] {
        need(out, "out");
        auto c = std::make_unique<srt_config>();
        if (path != nullptr) c->kv = srt::KeyValueConfig::load(path);
        *out = c.release();
    });
}

int srt_config_set(srt_config* cfg, const char* assignment) {
    return guarded([&] {
        need(cfg, "config");
        need(assignment, "assignment");
        cfg->kv.set_override(assignment);
    });
}

int srt_config_dump(const srt_config* cfg, char** out) {
    return guarded([&] {
        need(cfg, "config");
        need(out, "out");
        *out = dup(cfg->kv.to_string());
    });
}

void srt_config_free(srt_config* cfg) { delete cfg; }

int srt_model_create(const srt_config* cfg, srt_model** out) {
    return guarded([&] {
        need(cfg, "config");
        need(out, "out");
        auto m = std::make_unique<srt_model>();
        m->ckpt = srt::initial_checkpoint(cfg->kv);
        *out = m.release();
    });
}

int srt_model_load(const char* dir, srt_model** out) {
    return guarded([&] {
        need(dir, "dir");
        need(out, "out");
        auto m = std::make_unique<srt_model>();
        m->ckpt = srt::load_checkpoint(dir);
        *out = m.release();
    });
}

int srt_model_save(const srt_model* model, const char* dir) {
    return guarded([&] {
        need(model, "model");
        need(dir, "dir");
        srt::save_checkpoint(dir, model->ckpt);
    });
}

void srt_model_free(srt_model* model) { delete model; }

int srt_model_stage(const srt_model* model, char** out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = dup(model->ckpt.meta.stage());
    });
}

int srt_model_provenance(const srt_model* model, char** out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = dup(nlohmann::json(model->ckpt.meta.provenance).dump());
    });
}

int srt_train_stage(const srt_config* cfg, const char* stage, const srt_model* init, srt_log_fn log,
                    void* user, srt_model** out) {
    return guarded([&] {
        need(cfg, "config");
        need(out, "out");
        const srt::RunConfig rc = srt::RunConfig::from(cfg->kv);
        std::optional<srt::Checkpoint> start;
        if (init != nullptr) start = init->ckpt;
        auto m = std::make_unique<srt_model>();
        m->ckpt = srt::train_stage(rc, stage_of(stage), start, logger(log, user));
        m->ckpt.meta.config.merge(cfg->kv);
        *out = m.release();
    });
}

int srt_curriculum(const srt_config* cfg, const char* out_dir, srt_log_fn log, void* user, srt_model** out) {
    return guarded([&] {
        need(cfg, "config");
        const srt::RunConfig rc = srt::RunConfig::from(cfg->kv);
        srt::Checkpoint ck = srt::run_curriculum(rc, out_dir != nullptr ? out_dir : "", logger(log, user));
        if (out != nullptr) {
            auto m = std::make_unique<srt_model>();
            m->ckpt = std::move(ck);
            *out = m.release();
        }
    });
}

int srt_ablate(const srt_config* cfg, srt_log_fn log, void* user, char** json, char** table) {
    return guarded([&] {
        need(cfg, "config");
        const srt::RunConfig rc = srt::RunConfig::from(cfg->kv);
        const srt::AblationReport rep = srt::run_ablation(rc, logger(log, user));
        if (json != nullptr) *json = dup(rep.to_json());
        if (table != nullptr) *table = dup(rep.to_table());
    });
}

int srt_synth(const srt_config* cfg, const char* out_dir) {
    return guarded([&] {
        need(cfg, "config");
        need(out_dir, "out_dir");
        const srt::RunConfig rc = srt::RunConfig::from(cfg->kv);
        srt::write_corpus(out_dir, srt::synth_corpus(rc.synth));
    });
}

int srt_infer(const srt_model* model, const srt_config* cfg, const char* audio, const char* src,
              const char* tgt, int beam, srt_infer_result* out) {
    return guarded([&] {
        need(model, "model");
        need(audio, "audio");
        need(src, "src");
        need(tgt, "tgt");
        need(out, "out");
        srt::DecodeConfig d = srt::decode_config_from(effective(model, cfg));
        if (beam == 1) {
            d.strategy = srt::Strategy::kGreedy;
        } else if (beam > 1) {
            d.strategy = srt::Strategy::kBeam;
            d.beam_size = beam;
        }
        const srt::InferResult r = srt::infer(*model->ckpt.model, audio, src, tgt, d);
        srt_infer_result res{};
        res.transcription = dup(r.transcription);
        res.translation = dup(r.translation);
        res.raw = dup(r.raw);
        res.parse_miss = r.parse_miss ? 1 : 0;
        res.truncated = r.truncated ? 1 : 0;
        *out = res;
    });
}

void srt_infer_result_free(srt_infer_result* r) {
    if (r == nullptr) return;
    std::free(r->transcription);
    std::free(r->translation);
    std::free(r->raw);
    *r = srt_infer_result{};
}

int srt_eval_manifest(const srt_model* model, const srt_config* cfg, const char* manifest, char** json,
                      char** table) {
    return guarded([&] {
        need(model, "model");
        need(manifest, "manifest");
        const srt::DecodeConfig d = srt::decode_config_from(effective(model, cfg));
        const srt::EvalReport rep = srt::evaluate_manifest(*model->ckpt.model, manifest, d);
        if (json != nullptr) *json = dup(rep.to_json());
        if (table != nullptr) *table = dup(rep.to_table());
    });
}

int srt_eval_files(const char* const* srcs, const char* const* tgts, const char* const* hyps,
                   const char* const* refs, size_t count, int with_wer, char** json, char** table) {
    return guarded([&] {
        if (count == 0) srt::fail(srt::ErrorCode::kInvalidInput, "no directions to score");
        need(srcs, "srcs");
        need(tgts, "tgts");
        need(hyps, "hyps");
        need(refs, "refs");
        std::vector<srt::DirectionScore> scores;
        for (size_t i = 0; i < count; ++i) {
            need(srcs[i], "src");
            need(tgts[i], "tgt");
            need(hyps[i], "hyp path");
            need(refs[i], "ref path");
            scores.push_back(srt::score_files(hyps[i], refs[i], srcs[i], tgts[i], with_wer != 0));
        }
        const srt::EvalReport rep = srt::aggregate(scores);
        if (json != nullptr) *json = dup(rep.to_json());
        if (table != nullptr) *table = dup(rep.to_table());
    });
}

int srt_bench(const srt_model* model, const srt_config* cfg, size_t items, const int* batch_sizes,
              size_t n_batches, int repeats, char** csv) {
    return guarded([&] {
        need(model, "model");
        need(batch_sizes, "batch_sizes");
        need(csv, "csv");
        if (n_batches == 0) srt::fail(srt::ErrorCode::kInvalidInput, "no batch sizes");
        const srt::RunConfig rc = srt::RunConfig::from(effective(model, cfg));
        const std::vector<int> sizes(batch_sizes, batch_sizes + n_batches);
        const auto rows = srt::bench(rc, *model->ckpt.model, items, sizes, repeats);
        *csv = dup(srt::bench_csv(rows));
    });
}

}  // extern "C"
