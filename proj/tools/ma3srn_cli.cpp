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


// Command-line front end over the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ma3srn/ma3srn.h"

namespace {

// Exit codes: 0 success, 1 other failure, 2 invalid input, 3 numerical failure.
int exit_code(ma3srn_status s) {
  switch (s) {
    case MA3SRN_OK:
      return 0;
    case MA3SRN_ERR_VALIDATION:
    case MA3SRN_ERR_BAD_MAGIC:
    case MA3SRN_ERR_VERSION:
    case MA3SRN_ERR_TRUNCATED:
    case MA3SRN_ERR_CHECKSUM:
    case MA3SRN_ERR_MALFORMED:
      return 2;
    case MA3SRN_ERR_NUMERICAL:
      return 3;
    default:
      return 1;
  }
}

struct Failure {
  ma3srn_status status;
};

void check(ma3srn_status s, const std::string& what) {
  if (s == MA3SRN_OK) return;
  std::cerr << "error: " << what << ": " << ma3srn_last_error() << "\n";
  throw Failure{s};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<ma3srn_config, Deleter<ma3srn_config, ma3srn_config_free>>;
using Dataset = std::unique_ptr<ma3srn_dataset, Deleter<ma3srn_dataset, ma3srn_dataset_free>>;
using Ckpt = std::unique_ptr<ma3srn_checkpoint, Deleter<ma3srn_checkpoint, ma3srn_checkpoint_free>>;
using Text = std::unique_ptr<char, Deleter<char, ma3srn_string_free>>;

Config load_config(const std::string& path) {
  ma3srn_config* c = nullptr;
  if (path.empty())
    check(ma3srn_config_default(&c), "default config");
  else
    check(ma3srn_config_load(path.c_str(), &c), "config " + path);
  return Config(c);
}

Dataset load_dataset(const std::string& path) {
  ma3srn_dataset* d = nullptr;
  check(ma3srn_dataset_read(path.c_str(), &d), "dataset " + path);
  return Dataset(d);
}

void write_text(const std::string& path, const char* text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Failure{MA3SRN_ERR_IO};
  }
}

std::vector<std::string> split_flags(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string flag;
    while (std::getline(ss, flag, ','))
      if (!flag.empty()) out.push_back(flag);
  }
  return out;
}

void print_epoch(const ma3srn_epoch* e, void*) {
  std::fprintf(stderr, "epoch %3u  lr %.3e  loss %.6f  R@1,IoU=0.5 %6.2f  R@1,IoU=0.7 %6.2f\n", e->epoch,
               e->learning_rate, e->train_loss, e->eval_r1_05, e->eval_r1_07);
}

struct TrainArgs {
  std::string data, eval, out, resume, log;
  unsigned stop_after = 0;
  bool quiet = false;
};

void run_training(const Config& config, const TrainArgs& a) {
  auto train = load_dataset(a.data);
  auto eval = load_dataset(a.eval);
  Ckpt resume;
  if (!a.resume.empty()) {
    ma3srn_checkpoint* c = nullptr;
    check(ma3srn_checkpoint_read(a.resume.c_str(), &c), "checkpoint " + a.resume);
    resume.reset(c);
  }
  ma3srn_train_options opts{resume.get(), a.stop_after, a.quiet ? nullptr : print_epoch, nullptr};
  ma3srn_checkpoint* out = nullptr;
  check(ma3srn_train(config.get(), train.get(), eval.get(), &opts, &out), "train");
  Ckpt ckpt(out);
  check(ma3srn_checkpoint_write(ckpt.get(), a.out.c_str()), "write " + a.out);
  ma3srn_checkpoint_info info{};
  check(ma3srn_checkpoint_info_get(ckpt.get(), &info), "checkpoint info");
  if (!a.log.empty()) {
    char* log = nullptr;
    check(ma3srn_checkpoint_log(ckpt.get(), &log), "epoch log");
    Text guard(log);
    write_text(a.log, log);
  }
  std::printf("trained %u epochs, best R@1,IoU=0.5 %.2f at epoch %u%s\n", info.epoch, info.best_metric,
              info.best_epoch, info.finished ? "" : " (paused)");
}

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--data", a.data, "Training dataset")->required();
  cmd->add_option("--eval", a.eval, "Evaluation dataset for early stopping")->required();
  cmd->add_option("--out", a.out, "Checkpoint to write")->required();
  cmd->add_option("--resume", a.resume, "Continue from this checkpoint");
  cmd->add_option("--stop-after", a.stop_after, "Run at most this many epochs, then save");
  cmd->add_option("--log", a.log, "Write the per-epoch log as JSON");
  cmd->add_flag("--quiet", a.quiet, "No per-epoch output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stream temporal sentence grounding on a synthetic task"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ma3srn_version()));

  std::string config_path;
  std::uint64_t seed = 1;
  std::size_t count = 0;
  std::string out_path;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  generate->add_option("--config", config_path, "Config JSON (desk defaults if omitted)");
  generate->add_option("--seed", seed, "Generator seed")->required();
  generate->add_option("--count", count, "Number of samples")->required();
  generate->add_option("--out", out_path, "Dataset file")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train and write a checkpoint");
  train->add_option("--config", config_path, "Config JSON (desk defaults if omitted)");
  add_train_options(train, train_args);

  std::string ckpt_path, data_path, report_path, predictions_path;
  std::vector<std::size_t> n_values{1, 5};
  std::vector<double> m_values{0.5, 0.7};
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  eval->add_option("--data", data_path, "Dataset")->required();
  eval->add_option("--report", report_path, "Metrics report JSON")->required();
  eval->add_option("--predictions", predictions_path, "Ranked segments as text");
  eval->add_option("--n", n_values, "Top-n values")->delimiter(',');
  eval->add_option("--m", m_values, "IoU thresholds")->delimiter(',');

  double tol = 1e-3, h = 1e-4;
  std::string summary_path;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the training loss");
  gradcheck->add_option("--config", config_path, "Config JSON (small preset if omitted)");
  gradcheck->add_option("--tol", tol, "Relative tolerance");
  gradcheck->add_option("--step", h, "Central-difference step h");
  gradcheck->add_option("--summary", summary_path, "Write the JSON summary here");

  std::vector<std::string> disabled;
  std::string variant_path;
  TrainArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "Derive a variant config, optionally train it");
  ablate->add_option("--config", config_path, "Base config JSON (desk defaults if omitted)");
  ablate->add_option("--disable", disabled, "Comma-separated flags to switch off")->required()->delimiter(',');
  ablate->add_option("--variant-out", variant_path, "Write the variant config here");
  ablate->add_option("--data", ablate_args.data, "Training dataset");
  ablate->add_option("--eval", ablate_args.eval, "Evaluation dataset");
  ablate->add_option("--out", ablate_args.out, "Checkpoint to write");
  ablate->add_option("--stop-after", ablate_args.stop_after, "Run at most this many epochs");
  ablate->add_option("--log", ablate_args.log, "Write the per-epoch log as JSON");
  ablate->add_flag("--quiet", ablate_args.quiet, "No per-epoch output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*generate) {
      auto config = load_config(config_path);
      ma3srn_dataset* d = nullptr;
      check(ma3srn_dataset_generate(config.get(), seed, count, &d), "generate");
      Dataset dataset(d);
      check(ma3srn_dataset_write(dataset.get(), out_path.c_str()), "write " + out_path);
      std::printf("wrote %zu samples to %s\n", ma3srn_dataset_count(dataset.get()), out_path.c_str());
    } else if (*train) {
      run_training(load_config(config_path), train_args);
    } else if (*eval) {
      ma3srn_checkpoint* c = nullptr;
      check(ma3srn_checkpoint_read(ckpt_path.c_str(), &c), "checkpoint " + ckpt_path);
      Ckpt ckpt(c);
      auto dataset = load_dataset(data_path);
      char* report = nullptr;
      char* preds = nullptr;
      check(ma3srn_evaluate(ckpt.get(), dataset.get(), n_values.data(), n_values.size(), m_values.data(),
                            m_values.size(), &report, predictions_path.empty() ? nullptr : &preds),
            "evaluate");
      Text report_text(report), preds_text(preds);
      write_text(report_path, report);
      if (preds) write_text(predictions_path, preds);
      std::printf("wrote %s\n", report_path.c_str());
    } else if (*gradcheck) {
      ma3srn_config* c = nullptr;
      if (config_path.empty())
        check(ma3srn_config_gradcheck_preset(&c), "gradcheck preset");
      else
        check(ma3srn_config_load(config_path.c_str(), &c), "config " + config_path);
      Config config(c);
      char* summary = nullptr;
      int passed = 0;
      check(ma3srn_gradcheck(config.get(), h, tol, &summary, &passed), "gradcheck");
      Text text(summary);
      if (!summary_path.empty()) write_text(summary_path, summary);
      std::fputs(summary, stdout);
      if (!passed) {
        std::cerr << "gradcheck: entries exceed tolerance " << tol << "\n";
        return 3;
      }
    } else if (*ablate) {
      auto config = load_config(config_path);
      for (const auto& flag : split_flags(disabled))
        check(ma3srn_config_disable(config.get(), flag.c_str()), "disable " + flag);
      char* json = nullptr;
      check(ma3srn_config_to_json(config.get(), &json), "config json");
      Text text(json);
      if (!variant_path.empty()) write_text(variant_path, json);
      const bool wants_training = !ablate_args.data.empty() || !ablate_args.eval.empty() || !ablate_args.out.empty();
      if (wants_training) {
        if (ablate_args.data.empty() || ablate_args.eval.empty() || ablate_args.out.empty()) {
          std::cerr << "error: ablate training needs --data, --eval and --out together\n";
          return 2;
        }
        run_training(config, ablate_args);
      } else if (variant_path.empty()) {
        std::fputs(json, stdout);
      }
    }
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
  return 0;
}
