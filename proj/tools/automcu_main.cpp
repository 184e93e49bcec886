// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end.
//
// Exit codes: 0 success, 1 domain failure (infeasible / invalid / no
// result), 2 usage or configuration error, 3 I/O, subprocess, or transport
// failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "automcu/feasibility.hpp"
#include "automcu/graph.hpp"
#include "automcu/json_io.hpp"
#include "automcu/orchestrator.hpp"
#include "automcu/repository.hpp"

using namespace automcu;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

graph::TensorShape parse_shape(const std::string& text) {
  std::int64_t dims[3] = {0, 0, 0};
  char extra = 0;
  if (std::sscanf(text.c_str(), "%ldx%ldx%ld%c", &dims[0], &dims[1], &dims[2],
                  &extra) != 3 ||
      dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    throw UsageError("--input-shape must look like CxHxW, e.g. 3x32x32");
  }
  return graph::TensorShape::feature_map(dims[0], dims[1], dims[2]);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw repo::RepositoryError(repo::RepositoryError::Kind::Io,
                                "cannot open \"" + path + "\"");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string join_reasons(const backend::Measurement& m) {
  std::string out;
  for (const auto& reason : m.reason_strings()) {
    if (!out.empty()) out += "; ";
    out += reason;
  }
  return out;
}

// Shared option bundle filled by CLI11 before dispatch.
struct Options {
  // customize
  std::string dataset;
  double ram_kb{0.0};
  double flash_kb{0.0};
  std::string input_shape{"3x32x32"};
  std::int64_t num_classes{10};
  std::string strategy{"random"};
  std::string evaluator{"surrogate"};
  int max_iters{10};
  int retries{2};
  int max_consecutive_failures{3};
  std::uint64_t seed{0};
  std::string mode{"isolated"};
  std::string repo_path{"automcu_repo.json"};
  std::string report_path{"automcu_report.json"};
  std::string log_path;
  double target_acc{-1.0};
  int max_epochs{30};
  int patience{5};
  int k_best{5};
  int k_fail{3};
  std::string llm_base_url;
  std::string llm_model;
  std::string llm_credential_env{"AUTOMCU_API_KEY"};
  int llm_max_retries{3};
  double llm_timeout{60.0};
  std::string trainer_cmd;
  double trainer_timeout{3600.0};
  std::string backend_cmd;
  double backend_timeout{300.0};

  // validate / analyze / repo
  std::string spec_file;
  bool dump_graph{false};
  std::string model_id;
};

int run_customize(const Options& opt) {
  orch::RunConfig config;
  config.task.dataset = opt.dataset;
  config.task.input_shape = parse_shape(opt.input_shape);
  config.task.num_classes = opt.num_classes;

  config.constraints.ram_budget_bytes = backend::bytes_from_kb(opt.ram_kb);
  config.constraints.flash_budget_bytes = backend::bytes_from_kb(opt.flash_kb);
  config.constraints.input_shape = config.task.input_shape;

  config.strategy.kind = opt.strategy;
  config.strategy.llm.base_url = opt.llm_base_url;
  config.strategy.llm.model = opt.llm_model;
  config.strategy.llm.credential_env = opt.llm_credential_env;
  config.strategy.llm.max_retries = opt.llm_max_retries;
  config.strategy.llm.timeout_seconds = opt.llm_timeout;

  config.evaluator.kind = opt.evaluator;
  config.evaluator.trainer.command = opt.trainer_cmd;
  config.evaluator.trainer.timeout_seconds = opt.trainer_timeout;

  config.backend.kind = opt.backend_cmd.empty() ? "builtin" : "external";
  config.backend.adapter.command = opt.backend_cmd;
  config.backend.adapter.timeout_seconds = opt.backend_timeout;

  config.max_iterations = opt.max_iters;
  config.task_retry_limit = opt.retries;
  config.max_consecutive_failures = opt.max_consecutive_failures;
  if (opt.target_acc >= 0.0) config.target_accuracy = opt.target_acc;
  if (opt.mode == "shared") {
    config.mode = orch::InteractionMode::Shared;
  } else if (opt.mode == "isolated") {
    config.mode = orch::InteractionMode::Isolated;
  } else {
    throw UsageError("--mode must be isolated or shared");
  }
  config.master_seed = opt.seed;
  config.max_epochs = opt.max_epochs;
  config.patience = opt.patience;
  config.k_best = opt.k_best;
  config.k_fail = opt.k_fail;
  config.repo_path = opt.repo_path;
  config.report_path = opt.report_path;
  if (!opt.log_path.empty()) config.log_path = opt.log_path;

  if (config.strategy.kind == "llm") {
    if (config.strategy.llm.base_url.empty() ||
        config.strategy.llm.model.empty()) {
      throw UsageError("--strategy llm requires --llm-base-url and --llm-model");
    }
    const char* credential =
        std::getenv(config.strategy.llm.credential_env.c_str());
    if (credential == nullptr || *credential == '\0') {
      std::cerr << "error: credential environment variable "
                << config.strategy.llm.credential_env << " is not set\n";
      return kExitIo;
    }
  }
  if (config.evaluator.kind == "external" && opt.trainer_cmd.empty()) {
    throw UsageError("--evaluator external requires --trainer-cmd");
  }

  const auto report = orch::run_customization(config);

  std::cout << "termination: " << orch::to_string(report.termination) << "\n";
  std::cout << "iterations: " << report.iterations
            << " (proposed=" << report.counts.proposed
            << ", screened_out=" << report.counts.screened_out
            << ", trained=" << report.counts.trained
            << ", proposal_failures=" << report.counts.proposal_failures
            << ")\n";
  if (report.best) {
    const auto& best = *report.best;
    char line[160];
    std::snprintf(line, sizeof line,
                  "best: %s acc=%.2f ram_kb=%.2f flash_kb=%.2f",
                  best.model_id.c_str(),
                  best.performance ? best.performance->accuracy_percent : 0.0,
                  backend::kb_from_bytes(best.measurement.ram_bytes),
                  backend::kb_from_bytes(best.measurement.flash_bytes));
    std::cout << line << "\n";
  } else {
    std::cout << "best: none\n";
  }
  std::cout << "repository: " << config.repo_path << "\n";
  std::cout << "report: " << config.report_path << "\n";

  const bool aborted =
      report.termination == orch::Termination::AbortedOnFailures;
  return (report.best && !aborted) ? kExitOk : kExitDomain;
}

int run_validate(const Options& opt) {
  const auto text = read_file(opt.spec_file);
  arch::ArchitectureSpec spec;
  try {
    spec = arch::parse_spec(text);
  } catch (const arch::SpecError& e) {
    std::cout << "invalid: " << e.what() << "\n";
    return kExitDomain;
  }
  const auto report = arch::validate_schema(spec);
  if (!report.valid) {
    for (const auto& issue : report.issues) {
      std::cout << "invalid: layer " << issue.layer_index << ": "
                << issue.message << "\n";
    }
    return kExitDomain;
  }
  try {
    auto model = graph::expand_blocks(spec);
    model = graph::infer_shapes(model, parse_shape(opt.input_shape));
    const auto params = graph::count_params(model);
    std::cout << "valid: id=" << arch::spec_id(spec)
              << " ops=" << model.ops.size() << " params=" << params.total()
              << " macs=" << graph::count_macs(model) << "\n";
    return kExitOk;
  } catch (const graph::DimensionError& e) {
    std::cout << "not constructible: " << e.what() << "\n";
    return kExitDomain;
  }
}

int run_analyze(const Options& opt) {
  const auto text = read_file(opt.spec_file);

  backend::ConstraintSet constraints;
  constraints.ram_budget_bytes = backend::bytes_from_kb(opt.ram_kb);
  constraints.flash_budget_bytes = backend::bytes_from_kb(opt.flash_kb);
  constraints.input_shape = parse_shape(opt.input_shape);

  backend::Measurement measurement;
  bool parsed = false;
  arch::ArchitectureSpec spec;
  try {
    spec = arch::parse_spec(text);
    parsed = true;
  } catch (const arch::SpecError& e) {
    measurement.pass = false;
    measurement.reasons.push_back(
        backend::FailReason{backend::FailReason::Kind::NotConstructible,
                            std::string("schema: ") + e.what()});
  }
  if (parsed) {
    if (!opt.backend_cmd.empty()) {
      backend::AdapterConfig adapter{opt.backend_cmd, opt.backend_timeout};
      measurement = backend::analyze_external(spec, constraints, adapter);
    } else {
      measurement = backend::analyze(spec, constraints);
    }
    if (opt.dump_graph) {
      try {
        auto model = graph::expand_blocks(spec);
        model = graph::infer_shapes(model, constraints.input_shape);
        for (std::size_t i = 0; i < model.ops.size(); ++i) {
          const auto& op = model.ops[i];
          std::cout << "op " << i << ": " << graph::to_string(op.kind)
                    << " -> " << model.tensors.at(op.output).to_string()
                    << "\n";
        }
      } catch (const graph::DimensionError&) {
        // Shape failure is already part of the measurement status.
      }
    }
  }

  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  out["ram_kb"] = backend::kb_from_bytes(measurement.ram_bytes);
  out["flash_kb"] = backend::kb_from_bytes(measurement.flash_bytes);
  if (measurement.pass) {
    out["status"] = "Pass";
  } else {
    out["status"] = measurement.reason_strings();
  }
  std::cout << out.dump() << "\n";
  return measurement.pass ? kExitOk : kExitDomain;
}

int run_repo_list(const Options& opt) {
  const auto repository = repo::load_repository(opt.repo_path);
  for (const auto& record : repository.records()) {
    std::string acc = "-";
    if (record.performance) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f",
                    record.performance->accuracy_percent);
      acc = buf;
    }
    char line[128];
    std::snprintf(line, sizeof line, "%-18s acc=%-7s ram_kb=%-9.2f flash_kb=%-9.2f",
                  record.model_id.c_str(), acc.c_str(),
                  backend::kb_from_bytes(record.measurement.ram_bytes),
                  backend::kb_from_bytes(record.measurement.flash_bytes));
    std::cout << line
              << (record.measurement.pass ? "Pass" : join_reasons(record.measurement))
              << "\n";
  }
  return kExitOk;
}

int run_repo_best(const Options& opt) {
  const auto repository = repo::load_repository(opt.repo_path);
  const auto best = repository.best_feasible();
  if (!best) {
    std::cerr << "no feasible record\n";
    return kExitDomain;
  }
  std::cout << record_to_json(*best).dump(2) << "\n";
  return kExitOk;
}

int run_repo_show(const Options& opt) {
  const auto repository = repo::load_repository(opt.repo_path);
  const auto* record = repository.find(opt.model_id);
  if (record == nullptr) {
    std::cerr << "no record with id \"" << opt.model_id << "\"\n";
    return kExitDomain;
  }
  std::cout << record_to_json(*record).dump(2) << "\n";
  return kExitOk;
}

int dispatch(int which, const Options& opt) {
  try {
    switch (which) {
      case 0: return run_customize(opt);
      case 1: return run_validate(opt);
      case 2: return run_analyze(opt);
      case 3: return run_repo_list(opt);
      case 4: return run_repo_best(opt);
      default: return run_repo_show(opt);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const orch::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const repo::RepositoryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == repo::RepositoryError::Kind::Io ? kExitIo : kExitDomain;
  } catch (const backend::AdapterError& e) {
    std::cerr << "error: adapter: " << e.what() << "\n";
    return kExitIo;
  } catch (const proposal::TransportError& e) {
    std::cerr << "error: transport: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AutoMCU: feasibility-first model customization for microcontrollers"};
  app.require_subcommand(1);
  Options opt;

  auto* customize =
      app.add_subcommand("customize", "Run the full customization loop");
  customize->add_option("--task", opt.dataset, "Dataset / task name")
      ->required();
  customize->add_option("--ram-kb", opt.ram_kb, "RAM budget in KB")
      ->required()
      ->check(CLI::PositiveNumber);
  customize->add_option("--flash-kb", opt.flash_kb, "Flash budget in KB")
      ->required()
      ->check(CLI::PositiveNumber);
  customize->add_option("--input-shape", opt.input_shape,
                        "Input tensor as CxHxW (default 3x32x32)");
  customize->add_option("--num-classes", opt.num_classes, "Output classes")
      ->check(CLI::Range(std::int64_t{2}, std::int64_t{100000}));
  customize->add_option("--strategy", opt.strategy,
                        "Proposal strategy: random | mutation | llm");
  customize->add_option("--evaluator", opt.evaluator,
                        "Evaluator: surrogate | external");
  customize->add_option("--max-iters", opt.max_iters, "Iteration budget")
      ->check(CLI::PositiveNumber);
  customize->add_option("--retries", opt.retries,
                        "Per-task retries after the first attempt")
      ->check(CLI::NonNegativeNumber);
  customize->add_option("--max-consecutive-failures",
                        opt.max_consecutive_failures,
                        "Abort after this many failed iterations in a row")
      ->check(CLI::PositiveNumber);
  customize->add_option("--seed", opt.seed, "Master seed");
  customize->add_option("--mode", opt.mode,
                        "Agent context mode: isolated | shared");
  customize->add_option("--repo", opt.repo_path, "Repository output path");
  customize->add_option("--report", opt.report_path, "Report output path");
  customize->add_option("--log", opt.log_path, "Run log path (NDJSON)");
  customize->add_option("--target-acc", opt.target_acc,
                        "Stop once best accuracy reaches this value");
  customize->add_option("--max-epochs", opt.max_epochs, "Training epochs")
      ->check(CLI::PositiveNumber);
  customize->add_option("--patience", opt.patience, "Early-stop patience")
      ->check(CLI::PositiveNumber);
  customize->add_option("--k-best", opt.k_best,
                        "Top candidates shown to the proposer")
      ->check(CLI::NonNegativeNumber);
  customize->add_option("--k-fail", opt.k_fail,
                        "Recent failures shown to the proposer")
      ->check(CLI::NonNegativeNumber);
  customize->add_option("--llm-base-url", opt.llm_base_url,
                        "Chat API base URL, e.g. http://host:port/v1");
  customize->add_option("--llm-model", opt.llm_model, "Chat model name");
  customize->add_option("--llm-credential-env", opt.llm_credential_env,
                        "Environment variable holding the API credential");
  customize->add_option("--llm-max-retries", opt.llm_max_retries,
                        "Total proposal attempts per task")
      ->check(CLI::PositiveNumber);
  customize->add_option("--llm-timeout", opt.llm_timeout,
                        "Chat request timeout in seconds");
  customize->add_option("--trainer-cmd", opt.trainer_cmd,
                        "External trainer command line");
  customize->add_option("--trainer-timeout", opt.trainer_timeout,
                        "Trainer timeout in seconds");
  customize->add_option("--backend-cmd", opt.backend_cmd,
                        "External measurement adapter command line");
  customize->add_option("--backend-timeout", opt.backend_timeout,
                        "Adapter timeout in seconds");

  auto* validate =
      app.add_subcommand("validate", "Check a model document and print issues");
  validate->add_option("spec", opt.spec_file, "Model document path")
      ->required();
  validate->add_option("--input-shape", opt.input_shape,
                       "Input tensor as CxHxW (default 3x32x32)");

  auto* analyze = app.add_subcommand(
      "analyze", "Measure RAM/Flash for a model document against budgets");
  analyze->add_option("spec", opt.spec_file, "Model document path")->required();
  analyze->add_option("--ram-kb", opt.ram_kb, "RAM budget in KB")
      ->default_val(1048576.0);
  analyze->add_option("--flash-kb", opt.flash_kb, "Flash budget in KB")
      ->default_val(1048576.0);
  analyze->add_option("--input-shape", opt.input_shape,
                      "Input tensor as CxHxW (default 3x32x32)");
  analyze->add_flag("--dump-graph", opt.dump_graph,
                    "Print the lowered operator listing");
  analyze->add_option("--backend-cmd", opt.backend_cmd,
                      "External measurement adapter command line");
  analyze->add_option("--backend-timeout", opt.backend_timeout,
                      "Adapter timeout in seconds");

  auto* repo_cmd = app.add_subcommand("repo", "Inspect a model repository");
  repo_cmd->require_subcommand(1);
  auto* repo_list = repo_cmd->add_subcommand("list", "List all records");
  repo_list->add_option("--repo", opt.repo_path, "Repository path");
  auto* repo_best =
      repo_cmd->add_subcommand("best", "Print the best feasible record");
  repo_best->add_option("--repo", opt.repo_path, "Repository path");
  auto* repo_show = repo_cmd->add_subcommand("show", "Print one record by id");
  repo_show->add_option("id", opt.model_id, "Record model id")->required();
  repo_show->add_option("--repo", opt.repo_path, "Repository path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  int which = 5;
  if (customize->parsed()) which = 0;
  else if (validate->parsed()) which = 1;
  else if (analyze->parsed()) which = 2;
  else if (repo_list->parsed()) which = 3;
  else if (repo_best->parsed()) which = 4;
  return dispatch(which, opt);
}
