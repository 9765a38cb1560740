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


#include "ma3srn/ma3srn.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "diffcore/errors.hpp"
#include "lab/checkpoint.hpp"
#include "lab/config.hpp"
#include "lab/dataset_io.hpp"
#include "lab/evaluation.hpp"
#include "lab/model.hpp"
#include "lab/trainer.hpp"

struct ma3srn_config {
  ma3srn::ExperimentConfig value;
};

struct ma3srn_dataset {
  ma3srn::Dataset value;
};

struct ma3srn_checkpoint {
  ma3srn::Checkpoint value;
};

namespace {

thread_local std::string last_error;

ma3srn_status fail(ma3srn_status status, const char* what) {
  last_error = what;
  return status;
}

ma3srn_status format_status(ma3srn::FormatError::Kind kind) {
  using Kind = ma3srn::FormatError::Kind;
  switch (kind) {
    case Kind::io:
      return MA3SRN_ERR_IO;
    case Kind::bad_magic:
      return MA3SRN_ERR_BAD_MAGIC;
    case Kind::version_mismatch:
      return MA3SRN_ERR_VERSION;
    case Kind::truncated:
      return MA3SRN_ERR_TRUNCATED;
    case Kind::checksum_mismatch:
      return MA3SRN_ERR_CHECKSUM;
    case Kind::malformed:
      return MA3SRN_ERR_MALFORMED;
  }
  return MA3SRN_ERR_INTERNAL;
}

template <class F>
ma3srn_status guard(F&& body) {
  try {
    body();
    last_error.clear();
    return MA3SRN_OK;
  } catch (const ma3srn::FormatError& e) {
    return fail(format_status(e.kind()), e.what());
  } catch (const ma3srn::ValidationError& e) {
    return fail(MA3SRN_ERR_VALIDATION, e.what());
  } catch (const ma3srn::ShapeError& e) {
    return fail(MA3SRN_ERR_VALIDATION, e.what());
  } catch (const ma3srn::DomainError& e) {
    return fail(MA3SRN_ERR_NUMERICAL, e.what());
  } catch (const ma3srn::NumericalError& e) {
    return fail(MA3SRN_ERR_NUMERICAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MA3SRN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MA3SRN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MA3SRN_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (!p) throw ma3srn::ValidationError(std::string(name) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

template <class Handle, class Value>
void emit(Handle** out, Value&& value) {
  require(out, "out");
  *out = new Handle{std::forward<Value>(value)};
}

}  // namespace

extern "C" {

const char* ma3srn_last_error(void) { return last_error.c_str(); }

const char* ma3srn_version(void) { return "0.1.0"; }

void ma3srn_string_free(char* s) { std::free(s); }

ma3srn_status ma3srn_config_default(ma3srn_config** out) {
  return guard([&] { emit(out, ma3srn::ExperimentConfig{}); });
}

ma3srn_status ma3srn_config_gradcheck_preset(ma3srn_config** out) {
  return guard([&] { emit(out, ma3srn::ExperimentConfig::gradcheck_preset()); });
}

ma3srn_status ma3srn_config_parse(const char* json, ma3srn_config** out) {
  return guard([&] {
    require(json, "json");
    emit(out, ma3srn::ExperimentConfig::parse(json));
  });
}

ma3srn_status ma3srn_config_load(const char* path, ma3srn_config** out) {
  return guard([&] {
    require(path, "path");
    emit(out, ma3srn::ExperimentConfig::load(path));
  });
}

ma3srn_status ma3srn_config_copy(const ma3srn_config* config, ma3srn_config** out) {
  return guard([&] {
    require(config, "config");
    emit(out, config->value);
  });
}

ma3srn_status ma3srn_config_disable(ma3srn_config* config, const char* flag) {
  return guard([&] {
    require(config, "config");
    require(flag, "flag");
    auto copy = config->value;
    ma3srn::disable(copy, flag);
    config->value = copy;
  });
}

ma3srn_status ma3srn_config_to_json(const ma3srn_config* config, char** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    *out = copy_string(config->value.to_json().dump(2) + "\n");
  });
}

ma3srn_status ma3srn_config_hash(const ma3srn_config* config, char** out) {
  return guard([&] {
    require(config, "config");
    require(out, "out");
    *out = copy_string(config->value.hash());
  });
}

void ma3srn_config_free(ma3srn_config* config) { delete config; }

ma3srn_status ma3srn_dataset_generate(const ma3srn_config* config, uint64_t seed, size_t count,
                                      ma3srn_dataset** out) {
  return guard([&] {
    require(config, "config");
    emit(out, ma3srn::Dataset{config->value, ma3srn::generate_samples(config->value, seed, count)});
  });
}

ma3srn_status ma3srn_dataset_read(const char* path, ma3srn_dataset** out) {
  return guard([&] {
    require(path, "path");
    emit(out, ma3srn::read_dataset(path));
  });
}

ma3srn_status ma3srn_dataset_write(const ma3srn_dataset* dataset, const char* path) {
  return guard([&] {
    require(dataset, "dataset");
    require(path, "path");
    ma3srn::write_dataset(dataset->value, path);
  });
}

size_t ma3srn_dataset_count(const ma3srn_dataset* dataset) { return dataset ? dataset->value.samples.size() : 0; }

ma3srn_status ma3srn_dataset_config(const ma3srn_dataset* dataset, ma3srn_config** out) {
  return guard([&] {
    require(dataset, "dataset");
    emit(out, dataset->value.config);
  });
}

void ma3srn_dataset_free(ma3srn_dataset* dataset) { delete dataset; }

ma3srn_status ma3srn_train(const ma3srn_config* config, const ma3srn_dataset* train, const ma3srn_dataset* eval,
                           const ma3srn_train_options* options, ma3srn_checkpoint** out) {
  return guard([&] {
    require(config, "config");
    require(train, "train");
    require(eval, "eval");
    require(out, "out");
    const ma3srn::GroundingModel probe(config->value);
    probe.check_compatible(train->value.config);
    probe.check_compatible(eval->value.config);
    ma3srn::TrainOptions opts;
    if (options) {
      if (options->resume) opts.resume = &options->resume->value;
      if (options->stop_after) opts.stop_after = options->stop_after;
      if (options->on_epoch) {
        auto cb = options->on_epoch;
        void* user = options->user;
        opts.on_epoch = [cb, user](const ma3srn::EpochRecord& r) {
          const ma3srn_epoch e{r.epoch, r.learning_rate, r.train_loss, r.eval_r1_05, r.eval_r1_07};
          cb(&e, user);
        };
      }
    }
    emit(out, ma3srn::train(config->value, train->value.samples, eval->value.samples, opts));
  });
}

ma3srn_status ma3srn_checkpoint_read(const char* path, ma3srn_checkpoint** out) {
  return guard([&] {
    require(path, "path");
    emit(out, ma3srn::read_checkpoint(path));
  });
}

ma3srn_status ma3srn_checkpoint_write(const ma3srn_checkpoint* checkpoint, const char* path) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(path, "path");
    ma3srn::write_checkpoint(checkpoint->value, path);
  });
}

ma3srn_status ma3srn_checkpoint_info_get(const ma3srn_checkpoint* checkpoint, ma3srn_checkpoint_info* out) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    const auto& c = checkpoint->value;
    out->epoch = c.epoch;
    out->best_epoch = c.best_epoch;
    out->best_metric = c.best_metric;
    out->step = c.step;
    out->finished = c.finished ? 1 : 0;
    out->parameter_count = c.parameters.size();
    out->scalar_count = 0;
    for (const auto& p : c.parameters) out->scalar_count += p.value.size();
  });
}

ma3srn_status ma3srn_checkpoint_config(const ma3srn_checkpoint* checkpoint, ma3srn_config** out) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    emit(out, checkpoint->value.config);
  });
}

ma3srn_status ma3srn_checkpoint_log(const ma3srn_checkpoint* checkpoint, char** out) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : checkpoint->value.log)
      rows.push_back({{"epoch", e.epoch},
                      {"learning_rate", e.learning_rate},
                      {"train_loss", e.train_loss},
                      {"eval_r1_05", e.eval_r1_05},
                      {"eval_r1_07", e.eval_r1_07}});
    *out = copy_string(rows.dump(2) + "\n");
  });
}

void ma3srn_checkpoint_free(ma3srn_checkpoint* checkpoint) { delete checkpoint; }

ma3srn_status ma3srn_evaluate(const ma3srn_checkpoint* checkpoint, const ma3srn_dataset* dataset,
                              const size_t* n_values, size_t n_count, const double* m_values, size_t m_count,
                              char** report_json, char** predictions) {
  return guard([&] {
    require(checkpoint, "checkpoint");
    require(dataset, "dataset");
    ma3srn::MetricGrid grid;
    if (n_values) grid.n.assign(n_values, n_values + n_count);
    if (m_values) grid.m.assign(m_values, m_values + m_count);
    if (grid.n.empty() || grid.m.empty()) throw ma3srn::ValidationError("metric grid must not be empty");
    for (auto n : grid.n)
      if (n == 0) throw ma3srn::ValidationError("n must be >= 1");
    for (auto m : grid.m)
      if (!(m >= 0.0 && m < 1.0)) throw ma3srn::ValidationError("m must lie in [0, 1)");
    ma3srn::GroundingModel model(checkpoint->value.config);
    model.check_compatible(dataset->value.config);
    ma3srn::load_best(checkpoint->value, model);
    const auto report = ma3srn::evaluate(model, dataset->value.samples, grid);
    if (report_json) *report_json = copy_string(report.dump());
    if (predictions) *predictions = copy_string(report.prediction_text());
  });
}

ma3srn_status ma3srn_evaluate_baseline(const ma3srn_config* config, const ma3srn_dataset* dataset,
                                       ma3srn_baseline_kind kind, uint64_t seed, char** report_json) {
  return guard([&] {
    require(config, "config");
    require(dataset, "dataset");
    require(report_json, "report_json");
    const auto& c = config->value;
    ma3srn::GroundingModel model(c);
    model.check_compatible(dataset->value.config);
    const auto& samples = dataset->value.samples;
    ma3srn::EvaluationReport report;
    switch (kind) {
      case MA3SRN_BASELINE_RANDOM:
        report = ma3srn::evaluate_random(c, samples, seed);
        break;
      case MA3SRN_BASELINE_ORACLE:
        report = ma3srn::evaluate_oracle(c, samples);
        break;
      case MA3SRN_BASELINE_UNTRAINED:
        report = ma3srn::evaluate(model, samples);
        break;
      default:
        throw ma3srn::ValidationError("unknown baseline kind");
    }
    *report_json = copy_string(report.dump());
  });
}

ma3srn_status ma3srn_gradcheck(const ma3srn_config* config, double h, double tol, char** summary_json,
                               int* passed) {
  return guard([&] {
    require(config, "config");
    if (!(h > 0.0) || !(tol > 0.0)) throw ma3srn::ValidationError("h and tol must be positive");
    const auto report = ma3srn::gradcheck_model(config->value, h, tol);
    if (passed) *passed = report.passed() ? 1 : 0;
    if (summary_json) {
      nlohmann::json worst = nlohmann::json::array();
      for (const auto& e : report.worst)
        worst.push_back({{"parameter", e.parameter},
                         {"index", e.index},
                         {"analytic", e.analytic},
                         {"numeric", e.numeric},
                         {"relative_error", e.relative_error},
                         {"pass", e.pass}});
      nlohmann::json j{{"checked", report.checked},
                       {"failed", report.failed},
                       {"worst_relative_error", report.worst_relative_error},
                       {"h", h},
                       {"tol", tol},
                       {"passed", report.passed()},
                       {"worst", worst}};
      *summary_json = copy_string(j.dump(2) + "\n");
    }
  });
}

}  // extern "C"
