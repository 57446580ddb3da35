/* Exercises the C API from plain C: handles, status codes and one tiny
 * train/evaluate/checkpoint cycle. */

#include <resworld/resworld.h>

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                                        \
    do {                                                                    \
        if (!(cond)) {                                                      \
            fprintf(stderr, "%s:%d: expectation failed: %s (last error: %s)\n", __FILE__, __LINE__, #cond, \
                    rw_last_error());                                       \
            ++failures;                                                     \
        }                                                                   \
    } while (0)

static const char* small_overrides[] = {
    "world.bev_h=16", "world.bev_w=16", "world.z_bins=2", "world.h_past=1", "world.f_future=2",
    "model.dim=8",    "model.layers=1", "model.heads=2",  "model.points=2", "model.memory=2",
    "train.steps=2",  "train.batch_size=2", "data.train_episodes=4", "data.eval_episodes=2",
    "eval.latency_repeats=2",
};

static void count_steps(void* user, int step, double loss, double lr, double teacher_prob)
{
    (void)step;
    (void)lr;
    (void)teacher_prob;
    if (loss > 0) ++*(int*)user;
}

int main(void)
{
    rw_config* cfg = NULL;
    rw_config* bad = NULL;
    rw_dataset* data = NULL;
    rw_model* model = NULL;
    rw_model* loaded = NULL;
    rw_report* report = NULL;
    rw_report* again = NULL;
    char* text = NULL;
    double value = 0.0;
    int steps = 0;
    size_t i;

    EXPECT(strlen(rw_version()) > 0);
    EXPECT(strcmp(rw_status_name(RW_ERR_CONFIG), "config") == 0);

    /* Status codes. */
    EXPECT(rw_config_new(NULL) == RW_ERR_INVALID_ARGUMENT);
    EXPECT(rw_config_load("/nonexistent/config.json", &bad) == RW_ERR_IO);
    EXPECT(bad == NULL);
    EXPECT(rw_config_parse("{not json", &bad) == RW_ERR_CONFIG);
    EXPECT(rw_config_parse("{\"model\": {\"width\": 3}}", &bad) == RW_ERR_CONFIG);
    EXPECT(strstr(rw_last_error(), "model.width") != NULL);
    EXPECT(rw_model_load("/nonexistent/checkpoint.bin", &loaded) == RW_ERR_IO);

    EXPECT(rw_config_new(&cfg) == RW_OK);
    EXPECT(rw_config_set(cfg, "bad.key=1") == RW_ERR_CONFIG);
    EXPECT(rw_config_set(cfg, "model.dim=0") == RW_ERR_CONFIG);
    for (i = 0; i < sizeof small_overrides / sizeof small_overrides[0]; ++i)
        EXPECT(rw_config_set(cfg, small_overrides[i]) == RW_OK);
    EXPECT(rw_config_get(cfg, "model.dim", &text) == RW_OK);
    EXPECT(text && strcmp(text, "8") == 0);
    rw_string_free(text);
    EXPECT(rw_config_get(cfg, "model.nothing", &text) == RW_ERR_CONFIG);

    /* Data, training, evaluation. */
    EXPECT(rw_dataset_generate(cfg, &data) == RW_OK);
    {
        int ntrain = 0, neval = 0;
        uint64_t hash = 0;
        EXPECT(rw_dataset_info(data, &ntrain, &neval, &hash) == RW_OK);
        EXPECT(ntrain == 4 && neval == 2 && hash != 0);
    }
    EXPECT(rw_train(cfg, data, NULL, count_steps, &steps, &model) == RW_OK);
    EXPECT(steps == 2);
    EXPECT(rw_evaluate(model, data, "eval", "decoupled", 0, &report) == RW_OK);
    EXPECT(rw_report_size(report) > 0);
    EXPECT(rw_report_get(report, "occ.gmo.iou_f", &value) == RW_OK);
    EXPECT(value >= 0.0 && value <= 100.0);
    EXPECT(rw_report_get(report, "latency.rollout.median_ms", &value) == RW_ERR_OUT_OF_RANGE);
    EXPECT(rw_evaluate(model, data, "test", NULL, 0, &again) == RW_ERR_INVALID_ARGUMENT);
    EXPECT(rw_evaluate(model, data, "eval", "loose", 0, &again) == RW_ERR_CONFIG);
    {
        const char* key = NULL;
        EXPECT(rw_report_entry(report, 0, &key, &value) == RW_OK && key != NULL);
        EXPECT(rw_report_entry(report, rw_report_size(report), &key, &value) == RW_ERR_OUT_OF_RANGE);
    }

    /* Checkpoint round trip through a file. */
    {
        char path[] = "/tmp/resworld_capi_XXXXXX";
        int fd = mkstemp(path);
        uint64_t a = 0, b = 0;
        EXPECT(fd >= 0);
        EXPECT(rw_model_save(model, path) == RW_OK);
        EXPECT(rw_model_load(path, &loaded) == RW_OK);
        EXPECT(rw_model_param_count(model, &a) == RW_OK && rw_model_param_count(loaded, &b) == RW_OK);
        EXPECT(a == b && a > 0);
        EXPECT(rw_model_check_config(loaded, cfg) == RW_OK);
        EXPECT(rw_config_new(&bad) == RW_OK);
        EXPECT(rw_model_check_config(loaded, bad) == RW_ERR_CONFIG);
        rw_config_free(bad);
        remove(path);
    }
    rw_report_free(report);
    EXPECT(rw_evaluate(loaded, data, "eval", "decoupled", 0, &report) == RW_OK);
    EXPECT(rw_report_get(report, "plan.l2.avg", &value) == RW_OK);
    EXPECT(rw_evaluate(model, data, "eval", "decoupled", 0, &again) == RW_OK);
    {
        double other = -1.0;
        EXPECT(rw_report_get(again, "plan.l2.avg", &other) == RW_OK);
        EXPECT(other == value);
    }

    rw_report_free(report);
    rw_report_free(again);
    rw_model_free(model);
    rw_model_free(loaded);
    rw_dataset_free(data);
    rw_config_free(cfg);
    /* Freeing NULL handles is a no-op. */
    rw_config_free(NULL);
    rw_string_free(NULL);

    if (failures) fprintf(stderr, "%d expectation(s) failed\n", failures);
    return failures ? 1 : 0;
}
