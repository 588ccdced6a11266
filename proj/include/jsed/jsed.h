/* Copyright 2026 The jsed Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* C interface to the jsed library: joint sound event detection and acoustic
 * scene classification.
 *
 * Every function returns a jsed_status. On failure, jsed_last_error() gives
 * a message for the calling thread that stays valid until the next call into
 * the library from that thread. Strings handed out through char** outputs
 * belong to the caller and are released with jsed_string_free(). */

#ifndef JSED_JSED_H_
#define JSED_JSED_H_

#include <stddef.h>
#include <stdint.h>

#if defined(JSED_BUILDING_LIBRARY)
#define JSED_API __attribute__((visibility("default")))
#else
#define JSED_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum jsed_status {
  JSED_OK = 0,
  JSED_ERR_INVALID_ARGUMENT = 1,
  JSED_ERR_SHAPE = 2,
  JSED_ERR_IO = 3,
  JSED_ERR_FORMAT = 4,
  JSED_ERR_NUMERIC = 5,
  JSED_ERR_CONFIG = 6,
  JSED_ERR_NOT_FOUND = 7,
  JSED_ERR_INTERNAL = 8
} jsed_status;

/* Parameter groups, combinable as a bit mask. */
enum {
  JSED_GROUP_SHARED = 1,
  JSED_GROUP_EVENT = 2,
  JSED_GROUP_SCENE = 4,
  JSED_GROUP_ALL = 7
};

JSED_API const char* jsed_version(void);
JSED_API const char* jsed_status_name(jsed_status status);
JSED_API const char* jsed_last_error(void);
JSED_API void jsed_string_free(char* s);

/* Diagnostics go to stderr. level: "trace", "debug", "info", "warn",
 * "error" or "off". */
JSED_API jsed_status jsed_set_log_level(const char* level);

/* ---- Commands -------------------------------------------------------- */

typedef struct jsed_options jsed_options;

JSED_API jsed_status jsed_options_create(jsed_options** out);
JSED_API void jsed_options_destroy(jsed_options* opts);
/* Path of a key=value run configuration; NULL clears it. */
JSED_API jsed_status jsed_options_set_config(jsed_options* opts, const char* path);
JSED_API jsed_status jsed_options_set_out(jsed_options* opts, const char* dir);
JSED_API jsed_status jsed_options_set_seed(jsed_options* opts, uint64_t seed);
JSED_API jsed_status jsed_options_set_jobs(jsed_options* opts, size_t jobs);
/* "key=value", applied after the configuration file. */
JSED_API jsed_status jsed_options_add_override(jsed_options* opts, const char* assignment);
JSED_API jsed_status jsed_options_add_run_dir(jsed_options* opts, const char* dir);

/* Runs one of: synth-data, extract-features, train, tune-thresholds,
 * evaluate, count-params, report. On success *summary_json (if non-NULL)
 * receives a JSON summary of what was done. */
JSED_API jsed_status jsed_run_command(const jsed_options* opts, const char* command,
                                      char** summary_json);

/* ---- Models ---------------------------------------------------------- */

typedef struct jsed_model jsed_model;

/* kind: "proposed", "crnn_event", "cnn_event" or "cnn_scene". config_json
 * uses the layout stored in checkpoint metadata; NULL selects the default
 * architecture for 25 events, 4 scenes and 64 x 500 inputs. */
JSED_API jsed_status jsed_model_create(const char* kind, const char* config_json, uint64_t seed,
                                       jsed_model** out);
/* Loads a checkpoint written by the train command. */
JSED_API jsed_status jsed_model_load(const char* checkpoint_path, jsed_model** out);
JSED_API void jsed_model_destroy(jsed_model* model);

/* JSON: kind, model configuration, vocabularies and parameter counts. */
JSED_API jsed_status jsed_model_describe(const jsed_model* model, char** info_json);
JSED_API jsed_status jsed_model_count_params(const jsed_model* model, unsigned group_mask,
                                             size_t* count);
/* Input geometry and head sizes; outputs are set to 0 when a head is absent. */
JSED_API jsed_status jsed_model_dims(const jsed_model* model, size_t* mel_bins, size_t* frames,
                                     size_t* n_events, size_t* n_scenes);

/* Scores one clip. features: row-major [mel_bins, frames] log-mel values.
 * Loaded models standardize them with the stored training statistics.
 * event_probs receives [n_events, frames] row-major, scene_probs [n_scenes];
 * either may be NULL. */
JSED_API jsed_status jsed_model_predict(const jsed_model* model, const float* features,
                                        size_t mel_bins, size_t frames, float* event_probs,
                                        float* scene_probs);

/* ---- Metrics --------------------------------------------------------- */

typedef struct jsed_event_scores {
  uint64_t tp, fp, fn;
  double precision, recall, f;
  double error_rate; /* NaN when the reference has no active frame */
  uint64_t substitutions, deletions, insertions, reference;
} jsed_event_scores;

/* Frame-based scores of binary rolls, each row-major [n_events, frames].
 * segment > 1 pools frames into segments before counting. */
JSED_API jsed_status jsed_event_scores_compute(const uint8_t* pred, const uint8_t* ref,
                                               size_t n_events, size_t frames, size_t segment,
                                               jsed_event_scores* out);

/* Per-event thresholds from dev scores. scores: n_clips blocks of
 * [n_events, frames] probabilities; targets: matching binary rolls. */
JSED_API jsed_status jsed_tune_thresholds(const float* scores, const uint8_t* targets,
                                          size_t n_clips, size_t n_events, size_t frames,
                                          double* thresholds);

#ifdef __cplusplus
}
#endif

#endif /* JSED_JSED_H_ */
