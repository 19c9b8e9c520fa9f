#ifndef SRT_SRT_H
#define SRT_SRT_H

/* C interface to the speech recognition + translation toolkit.
 *
 * Every function returns an srt_status. On failure a thread-local message is
 * available from srt_last_error() until the next call on the same thread.
 * Strings returned through char** out-parameters are owned by the caller and
 * must be released with srt_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SRT_API __declspec(dllexport)
#else
#define SRT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    SRT_OK = 0,
    SRT_ERR_INVALID_INPUT = 1,
    SRT_ERR_CONFIG_MISMATCH = 2,
    SRT_ERR_INVALID_TOKEN = 3,
    SRT_ERR_ALREADY_WRAPPED = 4,
    SRT_ERR_INVALID_SAMPLE = 5,
    SRT_ERR_PARSE_MISS = 6,
    SRT_ERR_DIVERGENCE = 7,
    SRT_ERR_INVALID_CONFIG = 8,
    SRT_ERR_PARSE = 9,
    SRT_ERR_SCHEMA = 10,
    SRT_ERR_INVALID_SPEC = 11,
    SRT_ERR_BATCH_TOO_LARGE = 12,
    SRT_ERR_IO = 13,
    SRT_ERR_INTERNAL = 100
} srt_status;

typedef struct srt_config srt_config;
typedef struct srt_model srt_model;

/* Receives one progress line; may be NULL. */
typedef void (*srt_log_fn)(const char* line, void* user);

SRT_API const char* srt_version(void);
SRT_API const char* srt_last_error(void);
SRT_API const char* srt_status_name(int status);
SRT_API void srt_string_free(char* s);

/* Newline-separated "code<TAB>surface" rows of the built-in tag table. */
SRT_API int srt_language_tags(char** out);

/* Configuration ------------------------------------------------------- */

/* path may be NULL for an empty configuration. */
SRT_API int srt_config_load(const char* path, srt_config** out);
/* "key=value"; later assignments win. */
SRT_API int srt_config_set(srt_config* cfg, const char* assignment);
SRT_API int srt_config_dump(const srt_config* cfg, char** out);
SRT_API void srt_config_free(srt_config* cfg);

/* Models / checkpoints ------------------------------------------------ */

SRT_API int srt_model_create(const srt_config* cfg, srt_model** out);
SRT_API int srt_model_load(const char* dir, srt_model** out);
SRT_API int srt_model_save(const srt_model* model, const char* dir);
SRT_API void srt_model_free(srt_model* model);
/* Last stage name ("init", "pretrain", "asr", "smt" or "srt"). */
SRT_API int srt_model_stage(const srt_model* model, char** out);
/* JSON array of stage names, oldest first. */
SRT_API int srt_model_provenance(const srt_model* model, char** out);

/* Training ------------------------------------------------------------ */

/* stage is "asr", "smt" or "srt". init may be NULL only for "asr". */
SRT_API int srt_train_stage(const srt_config* cfg, const char* stage, const srt_model* init,
                            srt_log_fn log, void* user, srt_model** out);
/* Runs ASR, SMT, SRT; saves each stage under out_dir when it is not NULL. */
SRT_API int srt_curriculum(const srt_config* cfg, const char* out_dir, srt_log_fn log, void* user,
                           srt_model** out);
/* Four-row ablation; JSON and plain-text table outputs (either may be NULL). */
SRT_API int srt_ablate(const srt_config* cfg, srt_log_fn log, void* user, char** json, char** table);

/* Data ------------------------------------------------------------------ */

/* Writes asr/smt/srt manifests, features and dictionary.tsv into out_dir. */
SRT_API int srt_synth(const srt_config* cfg, const char* out_dir);

/* Inference and evaluation -------------------------------------------- */

typedef struct {
    char* transcription;
    char* translation;
    char* raw;
    int parse_miss;
    int truncated;
} srt_infer_result;

/* beam <= 0 keeps the configured strategy; 1 is greedy. cfg may be NULL. */
SRT_API int srt_infer(const srt_model* model, const srt_config* cfg, const char* audio, const char* src,
                      const char* tgt, int beam, srt_infer_result* out);
SRT_API void srt_infer_result_free(srt_infer_result* r);

/* Decodes an SRT manifest and reports per-direction BLEU/WER. */
SRT_API int srt_eval_manifest(const srt_model* model, const srt_config* cfg, const char* manifest,
                              char** json, char** table);
/* Scores count directions of line-aligned hypothesis/reference files.
 * with_wer adds WER per direction. */
SRT_API int srt_eval_files(const char* const* srcs, const char* const* tgts, const char* const* hyps,
                           const char* const* refs, size_t count, int with_wer, char** json,
                           char** table);

/* CSV with columns strategy,batch,wall_seconds,items. */
SRT_API int srt_bench(const srt_model* model, const srt_config* cfg, size_t items,
                      const int* batch_sizes, size_t n_batches, int repeats, char** csv);

#ifdef __cplusplus
}
#endif

#endif
