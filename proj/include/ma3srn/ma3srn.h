/*
 * Copyright 2026 The ma3srn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef MA3SRN_MA3SRN_H_
#define MA3SRN_MA3SRN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(MA3SRN_BUILDING_LIBRARY)
#define MA3SRN_API __declspec(dllexport)
#else
#define MA3SRN_API __declspec(dllimport)
#endif
#else
#define MA3SRN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ma3srn_status {
  MA3SRN_OK = 0,
  MA3SRN_ERR_INTERNAL = 1,
  MA3SRN_ERR_VALIDATION = 2,
  MA3SRN_ERR_NUMERICAL = 3,
  MA3SRN_ERR_IO = 4,
  MA3SRN_ERR_BAD_MAGIC = 5,
  MA3SRN_ERR_VERSION = 6,
  MA3SRN_ERR_TRUNCATED = 7,
  MA3SRN_ERR_CHECKSUM = 8,
  MA3SRN_ERR_MALFORMED = 9
} ma3srn_status;

typedef struct ma3srn_config ma3srn_config;
typedef struct ma3srn_dataset ma3srn_dataset;
typedef struct ma3srn_checkpoint ma3srn_checkpoint;

/* Message of the last failed call on this thread; never NULL. */
MA3SRN_API const char* ma3srn_last_error(void);
MA3SRN_API const char* ma3srn_version(void);
/* Strings returned through char** out-parameters are released here. */
MA3SRN_API void ma3srn_string_free(char* s);

/* Configuration. Missing JSON keys keep the desk defaults. */
MA3SRN_API ma3srn_status ma3srn_config_default(ma3srn_config** out);
MA3SRN_API ma3srn_status ma3srn_config_gradcheck_preset(ma3srn_config** out);
MA3SRN_API ma3srn_status ma3srn_config_parse(const char* json, ma3srn_config** out);
MA3SRN_API ma3srn_status ma3srn_config_load(const char* path, ma3srn_config** out);
MA3SRN_API ma3srn_status ma3srn_config_copy(const ma3srn_config* config, ma3srn_config** out);
/* Flags: appearance, motion, threed, associator, graph, gate, and
   <target>_from_<source> for each guidance direction. */
MA3SRN_API ma3srn_status ma3srn_config_disable(ma3srn_config* config, const char* flag);
MA3SRN_API ma3srn_status ma3srn_config_to_json(const ma3srn_config* config, char** out);
MA3SRN_API ma3srn_status ma3srn_config_hash(const ma3srn_config* config, char** out);
MA3SRN_API void ma3srn_config_free(ma3srn_config* config);

/* Datasets of synthetic samples. */
MA3SRN_API ma3srn_status ma3srn_dataset_generate(const ma3srn_config* config, uint64_t seed, size_t count,
                                                 ma3srn_dataset** out);
MA3SRN_API ma3srn_status ma3srn_dataset_read(const char* path, ma3srn_dataset** out);
MA3SRN_API ma3srn_status ma3srn_dataset_write(const ma3srn_dataset* dataset, const char* path);
MA3SRN_API size_t ma3srn_dataset_count(const ma3srn_dataset* dataset);
MA3SRN_API ma3srn_status ma3srn_dataset_config(const ma3srn_dataset* dataset, ma3srn_config** out);
MA3SRN_API void ma3srn_dataset_free(ma3srn_dataset* dataset);

/* Training. */
typedef struct ma3srn_epoch {
  uint32_t epoch;
  double learning_rate;
  double train_loss;
  double eval_r1_05;
  double eval_r1_07;
} ma3srn_epoch;

typedef void (*ma3srn_epoch_callback)(const ma3srn_epoch* epoch, void* user);

typedef struct ma3srn_train_options {
  const ma3srn_checkpoint* resume; /* NULL starts fresh */
  uint32_t stop_after;             /* epochs to run in this call, 0 = no limit */
  ma3srn_epoch_callback on_epoch;  /* may be NULL */
  void* user;
} ma3srn_train_options;

/* options may be NULL. A non-finite loss returns MA3SRN_ERR_NUMERICAL with
   the batch index in the error message. */
MA3SRN_API ma3srn_status ma3srn_train(const ma3srn_config* config, const ma3srn_dataset* train,
                                      const ma3srn_dataset* eval, const ma3srn_train_options* options,
                                      ma3srn_checkpoint** out);

typedef struct ma3srn_checkpoint_info {
  uint32_t epoch;
  uint32_t best_epoch;
  double best_metric;
  uint64_t step;
  int finished;
  size_t parameter_count; /* tensors */
  size_t scalar_count;
} ma3srn_checkpoint_info;

MA3SRN_API ma3srn_status ma3srn_checkpoint_read(const char* path, ma3srn_checkpoint** out);
MA3SRN_API ma3srn_status ma3srn_checkpoint_write(const ma3srn_checkpoint* checkpoint, const char* path);
MA3SRN_API ma3srn_status ma3srn_checkpoint_info_get(const ma3srn_checkpoint* checkpoint, ma3srn_checkpoint_info* out);
MA3SRN_API ma3srn_status ma3srn_checkpoint_config(const ma3srn_checkpoint* checkpoint, ma3srn_config** out);
/* Per-epoch log as a JSON array. */
MA3SRN_API ma3srn_status ma3srn_checkpoint_log(const ma3srn_checkpoint* checkpoint, char** out);
MA3SRN_API void ma3srn_checkpoint_free(ma3srn_checkpoint* checkpoint);

/* Evaluation. n_values/m_values may be NULL for the default grid
   n in {1, 5}, m in {0.5, 0.7}. report_json and predictions may be NULL. */
MA3SRN_API ma3srn_status ma3srn_evaluate(const ma3srn_checkpoint* checkpoint, const ma3srn_dataset* dataset,
                                         const size_t* n_values, size_t n_count, const double* m_values,
                                         size_t m_count, char** report_json, char** predictions);

typedef enum ma3srn_baseline_kind {
  MA3SRN_BASELINE_RANDOM = 0,    /* anchors scored by seeded uniform draws */
  MA3SRN_BASELINE_ORACLE = 1,    /* anchors ranked by true IoU */
  MA3SRN_BASELINE_UNTRAINED = 2  /* freshly initialised model */
} ma3srn_baseline_kind;

MA3SRN_API ma3srn_status ma3srn_evaluate_baseline(const ma3srn_config* config, const ma3srn_dataset* dataset,
                                                  ma3srn_baseline_kind kind, uint64_t seed, char** report_json);

/* Finite-difference check of the full loss. summary_json lists the worst
   entries; *passed is 1 when every entry is within tol. */
MA3SRN_API ma3srn_status ma3srn_gradcheck(const ma3srn_config* config, double h, double tol, char** summary_json,
                                          int* passed);

#ifdef __cplusplus
}
#endif

#endif  // MA3SRN_MA3SRN_H_
