// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#include "automcu/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "automcu/hash.hpp"
#include "automcu/json_io.hpp"
#include "automcu/subprocess.hpp"

namespace automcu::eval {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) {
      lines.push_back(std::move(line));
    }
    pos = end + 1;
  }
  return lines;
}

}  // namespace

std::string TrainConfig::digest() const {
  std::ostringstream key;
  key << dataset << "|" << input_shape.channels << "x" << input_shape.height
      << "x" << input_shape.width << "|" << num_classes << "|" << max_epochs
      << "|" << patience << "|" << seed;
  return util::hex_prefix(util::fnv1a64(key.str()), 16);
}

double surrogate_base(std::int64_t params, std::int64_t macs) {
  const double p = std::log10(1.0 + static_cast<double>(params));
  const double m = std::log10(1.0 + static_cast<double>(macs));
  return 35.0 * (1.0 - std::exp(-p / 3.0)) + 55.0 * (1.0 - std::exp(-m / 5.0));
}

double surrogate_jitter(const std::string& canonical_doc, std::uint64_t seed) {
  const std::uint64_t h =
      util::fnv1a64_u64(seed, util::fnv1a64(canonical_doc));
  return (static_cast<double>(h % 2001ull) - 1000.0) / 1000.0;
}

repo::EvalResult SurrogateEvaluator::evaluate(const arch::ArchitectureSpec& spec,
                                              const TrainConfig& config) {
  graph::ModelGraph g;
  try {
    g = graph::infer_shapes(graph::expand_blocks(spec), config.input_shape);
  } catch (const std::exception& e) {
    throw EvalError(EvalError::Kind::NotConstructible, e.what());
  }

  const auto params = graph::count_params(g).total();
  const auto macs = graph::count_macs(g);
  const double base = surrogate_base(params, macs);
  const double jitter = surrogate_jitter(arch::canonicalize(spec), config.seed);

  repo::EvalResult result;
  result.accuracy_percent = std::clamp(base + jitter, 0.0, 99.9);
  result.converged = true;
  result.epochs_run = std::min(config.max_epochs, 10);
  return result;
}

repo::EvalResult ExternalTrainer::evaluate(const arch::ArchitectureSpec& spec,
                                           const TrainConfig& config) {
  const auto argv = util::split_command(config_.command);
  if (argv.empty()) {
    throw EvalError(EvalError::Kind::TrainerSpawnFailed,
                    "trainer command is empty");
  }

  ordered_json request = ordered_json::object();
  request["architecture_spec"] = spec_to_json(spec);
  request["train_config"] =
      ordered_json{{"dataset", config.dataset},
                   {"input_shape", {config.input_shape.channels,
                                    config.input_shape.height,
                                    config.input_shape.width}},
                   {"num_classes", config.num_classes},
                   {"max_epochs", config.max_epochs},
                   {"patience", config.patience},
                   {"seed", config.seed}};

  const auto run = util::run_command(argv, request.dump() + "\n",
                                     config_.timeout_seconds);
  if (run.spawn_failed) {
    throw EvalError(EvalError::Kind::TrainerSpawnFailed, run.spawn_error);
  }
  if (run.timed_out) {
    throw EvalError(EvalError::Kind::TrainerTimeout,
                    "trainer exceeded " +
                        std::to_string(config_.timeout_seconds) + " s");
  }

  // Progress lines ({"epoch","val_acc"}) stream first; the last line must
  // be a status document.
  const auto lines = split_lines(run.out);
  if (lines.empty()) {
    throw EvalError(EvalError::Kind::TrainerBadOutput,
                    "trainer produced no output (exit code " +
                        std::to_string(run.exit_code) + ")");
  }
  json final_doc;
  try {
    final_doc = json::parse(lines.back());
  } catch (const json::exception& e) {
    throw EvalError(EvalError::Kind::TrainerBadOutput,
                    std::string("final trainer line is not JSON: ") + e.what());
  }
  if (!final_doc.is_object() || !final_doc.contains("status") ||
      !final_doc["status"].is_string()) {
    throw EvalError(EvalError::Kind::TrainerBadOutput,
                    "final trainer line lacks a status field");
  }
  const std::string status = final_doc["status"].get<std::string>();
  if (status == "error") {
    std::string detail = "trainer reported failure";
    if (final_doc.contains("detail") && final_doc["detail"].is_string()) {
      detail = final_doc["detail"].get<std::string>();
    }
    throw EvalError(EvalError::Kind::TrainerReportedFailure, detail);
  }
  if (status != "ok") {
    throw EvalError(EvalError::Kind::TrainerBadOutput,
                    "unknown trainer status \"" + status + "\"");
  }
  if (!final_doc.contains("val_acc") || !final_doc["val_acc"].is_number() ||
      !final_doc.contains("epochs_run") ||
      !final_doc["epochs_run"].is_number_integer()) {
    throw EvalError(EvalError::Kind::TrainerBadOutput,
                    "final trainer line lacks val_acc/epochs_run");
  }

  repo::EvalResult result;
  result.accuracy_percent = final_doc["val_acc"].get<double>();
  if (result.accuracy_percent < 0.0 || result.accuracy_percent > 100.0) {
    throw EvalError(EvalError::Kind::TrainerBadOutput,
                    "trainer val_acc out of [0, 100]");
  }
  result.converged = true;  // an ok status means training ran to its stop rule
  result.epochs_run = final_doc["epochs_run"].get<int>();
  if (final_doc.contains("checkpoint_path") &&
      final_doc["checkpoint_path"].is_string()) {
    result.checkpoint_path = final_doc["checkpoint_path"].get<std::string>();
  }
  return result;
}

}  // namespace automcu::eval
