/* Drives the shared library through its C interface only. */
#include "srt/srt.h"

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                    \
    do {                                                                \
        if (!(cond)) {                                                  \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
                    srt_last_error());                                  \
            ++failures;                                                 \
        }                                                               \
    } while (0)

static int lines = 0;
static void count_lines(const char* line, void* user) {
    (void)line;
    (void)user;
    ++lines;
}

static void set(srt_config* cfg, const char* key, const char* value) {
    char buf[1024];
    snprintf(buf, sizeof buf, "%s=%s", key, value);
    EXPECT(srt_config_set(cfg, buf) == SRT_OK);
}

int main(int argc, char** argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: capi_smoke CONFIG WORKDIR\n");
        return 2;
    }
    const char* work = argv[2];
    char path[1024];

    EXPECT(strcmp(srt_status_name(SRT_ERR_CONFIG_MISMATCH), "ConfigMismatch") == 0);
    EXPECT(srt_version()[0] != '\0');

    char* tags = NULL;
    EXPECT(srt_language_tags(&tags) == SRT_OK);
    EXPECT(tags != NULL && strstr(tags, "eng\t<|eng|>") != NULL);
    srt_string_free(tags);

    srt_config* cfg = NULL;
    EXPECT(srt_config_load(argv[1], &cfg) == SRT_OK);
    EXPECT(srt_config_set(cfg, "no-equals") != SRT_OK);
    snprintf(path, sizeof path, "%s/corpus", work);
    set(cfg, "data.dir", path);
    set(cfg, "synth.samples", "6");
    set(cfg, "pretrain.steps", "0");
    set(cfg, "stage.asr.max_steps", "2");
    set(cfg, "stage.asr.batch_size", "2");
    set(cfg, "decode.max_new_tokens", "4");
    EXPECT(srt_synth(cfg, path) == SRT_OK);

    /* stage order is enforced */
    srt_model* bad = NULL;
    EXPECT(srt_train_stage(cfg, "smt", NULL, NULL, NULL, &bad) == SRT_ERR_INVALID_CONFIG);
    EXPECT(strstr(srt_last_error(), "requires an ASR checkpoint") != NULL);
    EXPECT(srt_train_stage(cfg, "mt", NULL, NULL, NULL, &bad) == SRT_ERR_INVALID_CONFIG);

    srt_model* asr = NULL;
    EXPECT(srt_train_stage(cfg, "asr", NULL, count_lines, NULL, &asr) == SRT_OK);
    EXPECT(lines > 0);
    char* stage = NULL;
    EXPECT(srt_model_stage(asr, &stage) == SRT_OK);
    EXPECT(stage != NULL && strcmp(stage, "asr") == 0);
    srt_string_free(stage);

    snprintf(path, sizeof path, "%s/asr", work);
    EXPECT(srt_model_save(asr, path) == SRT_OK);
    srt_model* loaded = NULL;
    EXPECT(srt_model_load(path, &loaded) == SRT_OK);
    char* prov = NULL;
    EXPECT(srt_model_provenance(loaded, &prov) == SRT_OK);
    EXPECT(prov != NULL && strcmp(prov, "[\"asr\"]") == 0);
    srt_string_free(prov);

    snprintf(path, sizeof path, "%s/corpus/features.bin#utt0000", work);
    srt_infer_result r;
    memset(&r, 0, sizeof r);
    EXPECT(srt_infer(loaded, NULL, path, "eng", "deu", 1, &r) == SRT_OK);
    EXPECT(r.raw != NULL);
    srt_infer_result_free(&r);
    EXPECT(srt_infer(loaded, NULL, path, "eng", "xxx", 1, &r) == SRT_ERR_INVALID_INPUT);
    EXPECT(srt_infer(loaded, NULL, path, "eng", "eng", 1, &r) == SRT_ERR_INVALID_SAMPLE);

    snprintf(path, sizeof path, "%s/corpus/srt.jsonl", work);
    char* json = NULL;
    EXPECT(srt_eval_manifest(loaded, NULL, path, &json, NULL) == SRT_OK);
    EXPECT(json != NULL && strstr(json, "global_average") != NULL);
    srt_string_free(json);

    int sizes[] = {1, 2};
    char* csv = NULL;
    EXPECT(srt_bench(loaded, NULL, 4, sizes, 2, 1, &csv) == SRT_OK);
    EXPECT(csv != NULL && strncmp(csv, "strategy,batch,wall_seconds,items\n", 34) == 0);
    srt_string_free(csv);

    EXPECT(srt_model_load("/nonexistent/checkpoint", &bad) != SRT_OK);
    EXPECT(srt_model_save(NULL, path) == SRT_ERR_INVALID_INPUT);

    srt_model_free(loaded);
    srt_model_free(asr);
    srt_config_free(cfg);
    if (failures == 0) printf("capi smoke: ok\n");
    return failures == 0 ? 0 : 1;
}
