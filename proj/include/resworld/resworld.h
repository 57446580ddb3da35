/* resworld: residual latent world model on a synthetic occupancy grid world.
 *
 * C interface over the C++ core. Every object is an opaque handle created by
 * a *_new/_load/_generate call and released with the matching *_free call.
 * Functions return RW_OK or an error code; rw_last_error() then holds a
 * message for the calling thread. Strings returned through char** are owned
 * by the caller and released with rw_string_free.
 */
#ifndef RESWORLD_H
#define RESWORLD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RW_API __declspec(dllexport)
#else
#define RW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rw_status {
    RW_OK = 0,
    RW_ERR_INVALID_ARGUMENT = 1,
    RW_ERR_SHAPE_MISMATCH = 2,
    RW_ERR_FORMAT_VERSION = 3,
    RW_ERR_MALFORMED_FILE = 4,
    RW_ERR_IO = 5,
    RW_ERR_CONFIG = 6,
    RW_ERR_NON_FINITE = 7,
    RW_ERR_OUT_OF_RANGE = 8,
    RW_ERR_INTERNAL = 99
} rw_status;

typedef struct rw_config rw_config;
typedef struct rw_dataset rw_dataset;
typedef struct rw_model rw_model;
typedef struct rw_report rw_report;

RW_API const char* rw_version(void);
RW_API const char* rw_last_error(void);
RW_API const char* rw_status_name(rw_status status);
RW_API void rw_string_free(char* s);

/* Configuration. Keys are dotted paths into the JSON document, for example
 * "model.dim" or "planning.coupling". Unknown keys are rejected. */
RW_API rw_status rw_config_new(rw_config** out);
RW_API rw_status rw_config_load(const char* path, rw_config** out);
RW_API rw_status rw_config_parse(const char* json_text, rw_config** out);
/* "key=value"; the value is parsed as JSON, or taken as a string. The config
 * is left unchanged when the result does not validate. */
RW_API rw_status rw_config_set(rw_config* cfg, const char* assignment);
RW_API rw_status rw_config_to_json(const rw_config* cfg, char** out);
/* Value at a dotted key as JSON text (strings keep their quotes). */
RW_API rw_status rw_config_get(const rw_config* cfg, const char* key, char** out);
RW_API rw_status rw_config_hashes(const rw_config* cfg, uint64_t* config_hash, uint64_t* architecture_hash);
/* Directory that train() writes to: output root plus run name. */
RW_API rw_status rw_config_run_dir(const rw_config* cfg, char** out);
RW_API void rw_config_free(rw_config* cfg);

/* Datasets. */
RW_API rw_status rw_dataset_generate(const rw_config* cfg, rw_dataset** out);
/* Loads data.dir when it holds a dataset, otherwise generates in memory. */
RW_API rw_status rw_dataset_obtain(const rw_config* cfg, rw_dataset** out);
RW_API rw_status rw_dataset_load(const rw_config* cfg, const char* dir, rw_dataset** out);
RW_API rw_status rw_dataset_write(const rw_dataset* data, const rw_config* cfg, const char* dir);
RW_API rw_status rw_dataset_info(const rw_dataset* data, int* train_episodes, int* eval_episodes, uint64_t* hash);
RW_API void rw_dataset_free(rw_dataset* data);

/* Training. run_dir may be NULL to skip writing artifacts. The callback, when
 * given, runs after every optimizer step. */
typedef void (*rw_step_callback)(void* user, int step, double loss, double lr, double teacher_prob);
RW_API rw_status rw_train(const rw_config* cfg, const rw_dataset* data, const char* run_dir, rw_step_callback cb,
                          void* user, rw_model** out);

/* Models and checkpoints. */
RW_API rw_status rw_model_load(const char* checkpoint_path, rw_model** out);
RW_API rw_status rw_model_save(const rw_model* model, const char* checkpoint_path);
/* RW_ERR_CONFIG when cfg describes a different architecture. */
RW_API rw_status rw_model_check_config(const rw_model* model, const rw_config* cfg);
RW_API rw_status rw_model_config(const rw_model* model, rw_config** out);
RW_API rw_status rw_model_param_count(const rw_model* model, uint64_t* count);
RW_API void rw_model_free(rw_model* model);

/* Evaluation. split is "train" or "eval"; coupling is "tight", "semi",
 * "decoupled" or NULL for the model's configured mode; max_episodes <= 0
 * evaluates the whole split. */
RW_API rw_status rw_evaluate(const rw_model* model, const rw_dataset* data, const char* split, const char* coupling,
                             int max_episodes, rw_report** out);
/* Copy-last-frame forecast baseline; keys carry the "baseline." prefix. */
RW_API rw_status rw_evaluate_baseline(const rw_dataset* data, const rw_config* cfg, const char* split,
                                      int max_episodes, rw_report** out);

RW_API size_t rw_report_size(const rw_report* report);
/* The key pointer stays valid until the report is freed. */
RW_API rw_status rw_report_entry(const rw_report* report, size_t index, const char** key, double* value);
RW_API rw_status rw_report_get(const rw_report* report, const char* key, double* value);
RW_API rw_status rw_report_text(const rw_report* report, char** out);
RW_API rw_status rw_report_table(const rw_report* report, char** out);
RW_API rw_status rw_report_write(const rw_report* report, const rw_config* cfg, const char* dir);
RW_API void rw_report_free(rw_report* report);

/* Ablation grid; see the README for the spec format. Writes one run
 * directory per cell and returns the consolidated markdown table. */
typedef void (*rw_message_callback)(void* user, const char* message);
RW_API rw_status rw_ablate(const char* spec_json, const rw_config* base, rw_message_callback cb, void* user,
                           char** table_out);

/* Writes report.md and loss.svg into a run directory. */
RW_API rw_status rw_make_report(const char* run_dir);

#ifdef __cplusplus
}
#endif

#endif
