// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#include "automcu/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "automcu/hash.hpp"
#include "automcu/json_io.hpp"

namespace automcu::orch {
namespace {

using nlohmann::ordered_json;

std::string shape_string(const graph::TensorShape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

ordered_json constraints_json(const backend::ConstraintSet& c) {
  ordered_json node = ordered_json::object();
  node["ram_budget_bytes"] = c.ram_budget_bytes;
  node["flash_budget_bytes"] = c.flash_budget_bytes;
  node["ram_budget_kb"] = backend::kb_from_bytes(c.ram_budget_bytes);
  node["flash_budget_kb"] = backend::kb_from_bytes(c.flash_budget_bytes);
  node["input_shape"] = shape_string(c.input_shape);
  node["backend_profile"] = c.backend_profile;
  return node;
}

ordered_json task_json(const proposal::TaskDescriptor& t) {
  ordered_json node = ordered_json::object();
  node["dataset"] = t.dataset;
  node["input_shape"] = shape_string(t.input_shape);
  node["num_classes"] = t.num_classes;
  return node;
}

ordered_json train_config_json(const eval::TrainConfig& c) {
  ordered_json node = ordered_json::object();
  node["dataset"] = c.dataset;
  node["input_shape"] = {c.input_shape.channels, c.input_shape.height,
                         c.input_shape.width};
  node["num_classes"] = c.num_classes;
  node["max_epochs"] = c.max_epochs;
  node["patience"] = c.patience;
  node["seed"] = c.seed;
  return node;
}

ordered_json summary_json(const TaskSummary& s) {
  ordered_json node = ordered_json::object();
  node["event"] = "summary";
  node["task_id"] = s.task_id;
  node["role"] = std::string(to_string(s.role));
  node["status"] = s.ok ? "ok" : "failed";
  node["key_results"] = s.key_results;
  if (s.error) node["error"] = *s.error;
  node["context_bytes_used"] = s.context_bytes_used;
  return node;
}

ordered_json measurement_digest(const backend::Measurement& m) {
  ordered_json node = ordered_json::object();
  node["ram_kb"] = backend::kb_from_bytes(m.ram_bytes);
  node["flash_kb"] = backend::kb_from_bytes(m.flash_bytes);
  if (m.pass) {
    node["status"] = "Pass";
  } else {
    node["status"] = m.reason_strings();
  }
  return node;
}

std::string strategy_digest_for(const RunConfig& config) {
  if (config.strategy.override) return "override";
  if (config.strategy.kind == "llm") {
    std::ostringstream key;
    key << config.strategy.llm.base_url << "|" << config.strategy.llm.model
        << "|" << config.strategy.llm.temperature << "|"
        << config.strategy.llm.max_retries;
    return util::hex_prefix(util::fnv1a64(key.str()), 16);
  }
  return config.strategy.sampler.digest();
}

std::string evaluator_digest_for(const RunConfig& config) {
  if (config.evaluator.override) return "override";
  if (config.evaluator.kind == "external") {
    std::ostringstream key;
    key << config.evaluator.trainer.command << "|"
        << config.evaluator.trainer.timeout_seconds;
    return util::hex_prefix(util::fnv1a64(key.str()), 16);
  }
  return "surrogate-closed-form-v1";
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string temp = path + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw repo::RepositoryError(repo::RepositoryError::Kind::Io,
                                  "cannot open \"" + temp + "\" for writing");
    }
    out << content;
    if (!out) {
      throw repo::RepositoryError(repo::RepositoryError::Kind::Io,
                                  "write to \"" + temp + "\" failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    throw repo::RepositoryError(repo::RepositoryError::Kind::Io,
                                "rename to \"" + path +
                                    "\" failed: " + ec.message());
  }
}

std::string best_spec_path(const RunConfig& config) {
  return config.report_path + ".best_spec.json";
}

std::string log_path_for(const RunConfig& config) {
  return config.log_path.value_or(config.report_path + ".log.ndjson");
}

// Runs one agent task with retries. fn fills key_results and may throw; the
// summary, log lines, transcript accounting, and failure counting all happen
// here so every phase behaves identically.
template <typename Fn>
bool execute_task(RunState& state, AgentRole role, ordered_json payload,
                  std::map<std::string, std::string> provenance, Fn&& fn,
                  TaskSummary* out_summary = nullptr) {
  ++state.task_counter;
  char id_buf[24];
  std::snprintf(id_buf, sizeof id_buf, "task_%03d", state.task_counter);

  TaskAssignment assignment;
  assignment.task_id = id_buf;
  assignment.role = role;
  assignment.payload = std::move(payload);
  assignment.provenance = std::move(provenance);

  const auto payload_bytes =
      static_cast<std::int64_t>(assignment.payload.dump().size());

  // Isolated agents see only their own assignment (plus their own failed
  // turns on retry); shared-mode agents read the whole prior transcript.
  std::int64_t context_bytes =
      state.config.mode == InteractionMode::Shared
          ? state.transcript_bytes + payload_bytes
          : payload_bytes;

  TaskSummary summary;
  summary.task_id = assignment.task_id;
  summary.role = role;

  const int max_attempts = 1 + std::max(0, state.config.task_retry_limit);
  int attempts = 0;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    attempts = attempt;
    try {
      ordered_json key_results = ordered_json::object();
      fn(key_results);
      summary.ok = true;
      summary.key_results = std::move(key_results);
      summary.error.reset();
      break;
    } catch (const std::exception& e) {
      ++state.counts.failed_tasks;
      summary.ok = false;
      summary.key_results = ordered_json::object();
      summary.error = e.what();
      if (attempt < max_attempts &&
          state.config.mode == InteractionMode::Isolated) {
        // The failed turn stays in the agent's task-local context.
        context_bytes += static_cast<std::int64_t>(summary.error->size());
      }
    }
  }
  summary.context_bytes_used = context_bytes;

  ordered_json assignment_line = ordered_json::object();
  assignment_line["event"] = "assignment";
  assignment_line["task_id"] = assignment.task_id;
  assignment_line["role"] = std::string(to_string(role));
  assignment_line["iteration"] = state.iteration;
  assignment_line["payload_bytes"] = payload_bytes;
  assignment_line["payload_digest"] =
      util::hex_prefix(util::fnv1a64(assignment.payload.dump()), 16);
  ordered_json prov = ordered_json::object();
  for (const auto& [field, cls] : assignment.provenance) prov[field] = cls;
  assignment_line["provenance"] = std::move(prov);
  state.log_lines.push_back(assignment_line.dump());

  ordered_json summary_line = summary_json(summary);
  summary_line["attempts"] = attempts;
  state.log_lines.push_back(summary_line.dump());

  state.transcript_bytes +=
      payload_bytes + static_cast<std::int64_t>(summary_json(summary).dump().size());
  state.tasks.push_back(TaskRecord{std::move(assignment), summary, attempts});
  if (out_summary) *out_summary = std::move(summary);
  return state.tasks.back().summary.ok;
}

backend::Measurement run_backend(const RunState& state,
                                 const arch::ArchitectureSpec& spec) {
  if (state.config.backend.kind == "external") {
    return backend::analyze_external(spec, state.config.constraints,
                                     state.config.backend.adapter);
  }
  return backend::analyze(spec, state.config.constraints);
}

void append_candidate(RunState& state, std::optional<repo::EvalResult> perf,
                      const backend::Measurement& measurement,
                      bool counts_as_trained) {
  auto record =
      repo::make_record(*state.current_spec, std::move(perf), measurement);
  state.repository.append(std::move(record));
  if (counts_as_trained) {
    ++state.counts.trained;
  } else {
    ++state.counts.screened_out;
  }
}

// Shared termination logic: runs at the end of every iteration, whether it
// reached Decide or returned early from a failed/screened-out phase.
void finish_iteration(RunState& state) {
  if (state.iteration_failed) {
    ++state.consecutive_failures;
  } else {
    state.consecutive_failures = 0;
  }
  state.current_spec.reset();
  state.current_measurement.reset();
  state.current_eval.reset();

  if (state.consecutive_failures >= state.config.max_consecutive_failures) {
    state.termination = Termination::AbortedOnFailures;
    state.phase = Phase::Done;
    return;
  }
  if (state.config.target_accuracy) {
    const auto best = state.repository.best_feasible();
    if (best && best->performance->accuracy_percent >=
                    *state.config.target_accuracy) {
      state.termination = Termination::TargetMet;
      state.phase = Phase::Done;
      return;
    }
  }
  if (state.counts.proposed >= state.config.max_iterations) {
    state.termination = Termination::BudgetExhausted;
    state.phase = Phase::Done;
    return;
  }
  state.phase = Phase::Propose;
}

void phase_propose(RunState& state) {
  ++state.iteration;
  ++state.counts.proposed;
  state.iteration_failed = false;

  proposal::ProposalContext context;
  context.task = state.config.task;
  context.constraints = state.config.constraints;
  context.history =
      state.repository.select_context(state.config.k_best, state.config.k_fail);
  context.attempt_budget = std::max(1, state.config.strategy.llm.max_retries);
  context.seed = util::derive_seed(state.config.master_seed,
                                   static_cast<std::uint64_t>(state.iteration));
  if (state.config.strategy.kind == "mutation") {
    if (auto best = state.repository.best_feasible()) {
      context.parent = best->spec;
      context.parent_id = best->model_id;
    }
  }

  ordered_json payload = ordered_json::object();
  payload["task"] = task_json(context.task);
  payload["constraints"] = constraints_json(context.constraints);
  payload["history"] = summary_to_json(context.history);
  payload["attempt_budget"] = context.attempt_budget;
  payload["seed"] = context.seed;
  std::map<std::string, std::string> provenance = {
      {"task", "user_config"},
      {"constraints", "user_config"},
      {"history", "repository_summary"},
      {"attempt_budget", "user_config"},
      {"seed", "derived_seed"},
  };
  if (context.parent_id) {
    payload["parent_id"] = *context.parent_id;
    payload["parent_spec"] = spec_to_json(*context.parent);
    provenance["parent_id"] = "repository_record";
    provenance["parent_spec"] = "repository_record";
  }

  arch::ArchitectureSpec spec;
  const bool ok = execute_task(
      state, AgentRole::Proposal, std::move(payload), std::move(provenance),
      [&](ordered_json& key_results) {
        spec = state.strategy->propose(context);
        const auto id = arch::spec_id(spec);
        key_results["spec_id"] = id;
        key_results["canonical_bytes"] =
            static_cast<std::int64_t>(arch::canonicalize(spec).size());
      });

  if (!ok) {
    ++state.counts.proposal_failures;
    state.iteration_failed = true;
    finish_iteration(state);
    return;
  }
  if (state.repository.find(arch::spec_id(spec)) != nullptr) {
    // Redundant proposal: nothing new to evaluate, nothing to append.
    ++state.counts.proposal_failures;
    state.iteration_failed = true;
    finish_iteration(state);
    return;
  }
  state.current_spec = std::move(spec);
  state.phase = Phase::Screen;
}

void phase_screen(RunState& state) {
  ordered_json payload = ordered_json::object();
  payload["architecture_spec"] = spec_to_json(*state.current_spec);
  payload["constraints"] = constraints_json(state.config.constraints);

  backend::Measurement measurement;
  TaskSummary summary;
  const bool ok = execute_task(
      state, AgentRole::EvalConversion, std::move(payload),
      {{"architecture_spec", "candidate_spec"}, {"constraints", "user_config"}},
      [&](ordered_json& key_results) {
        measurement = run_backend(state, *state.current_spec);
        key_results["measurement"] = measurement_digest(measurement);
      },
      &summary);

  if (!ok) {
    // The backend itself failed (external adapter path). Record the
    // candidate as rejected-before-training with the failure as the reason.
    backend::Measurement failed;
    failed.reasons.push_back(backend::FailReason{
        backend::FailReason::Kind::NotConstructible,
        "backend: " + summary.error.value_or("unknown error")});
    append_candidate(state, std::nullopt, failed, /*counts_as_trained=*/false);
    state.iteration_failed = true;
    finish_iteration(state);
    return;
  }

  state.current_measurement = measurement;
  if (!measurement.pass) {
    append_candidate(state, std::nullopt, measurement,
                     /*counts_as_trained=*/false);
    finish_iteration(state);
    return;
  }
  state.phase = Phase::Train;
}

void phase_train(RunState& state) {
  ordered_json payload = ordered_json::object();
  payload["architecture_spec"] = spec_to_json(*state.current_spec);
  payload["train_config"] = train_config_json(state.train_config);

  repo::EvalResult result;
  const bool ok = execute_task(
      state, AgentRole::Training, std::move(payload),
      {{"architecture_spec", "candidate_spec"}, {"train_config", "user_config"}},
      [&](ordered_json& key_results) {
        result = state.evaluator->evaluate(*state.current_spec,
                                           state.train_config);
        key_results["accuracy"] = result.accuracy_percent;
        key_results["converged"] = result.converged;
        key_results["epochs_run"] = result.epochs_run;
        key_results["train_config_digest"] = state.train_config.digest();
      });

  if (!ok) {
    // Training exhausted its retries: keep the candidate as a record
    // without performance so the proposer still sees the region.
    append_candidate(state, std::nullopt, *state.current_measurement,
                     /*counts_as_trained=*/false);
    state.iteration_failed = true;
    finish_iteration(state);
    return;
  }
  state.current_eval = result;
  state.phase = Phase::Evaluate;
}

void phase_evaluate(RunState& state) {
  ordered_json payload = ordered_json::object();
  payload["architecture_spec"] = spec_to_json(*state.current_spec);
  payload["constraints"] = constraints_json(state.config.constraints);

  backend::Measurement final_measurement;
  const bool ok = execute_task(
      state, AgentRole::EvalConversion, std::move(payload),
      {{"architecture_spec", "candidate_spec"}, {"constraints", "user_config"}},
      [&](ordered_json& key_results) {
        final_measurement = run_backend(state, *state.current_spec);
        key_results["measurement"] = measurement_digest(final_measurement);
      });

  if (!ok) {
    // Final re-check failed; fall back to the screening measurement rather
    // than discarding a trained candidate.
    final_measurement = *state.current_measurement;
    state.iteration_failed = true;
  }
  append_candidate(state, state.current_eval, final_measurement,
                   /*counts_as_trained=*/true);
  state.phase = Phase::Decide;
}

}  // namespace

std::string_view to_string(AgentRole role) {
  switch (role) {
    case AgentRole::Proposal: return "proposal";
    case AgentRole::Training: return "training";
    case AgentRole::EvalConversion: return "eval_conversion";
  }
  return "?";
}

std::string_view to_string(Termination reason) {
  switch (reason) {
    case Termination::BudgetExhausted: return "BudgetExhausted";
    case Termination::TargetMet: return "TargetMet";
    case Termination::AbortedOnFailures: return "AbortedOnFailures";
  }
  return "?";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Propose: return "Propose";
    case Phase::Screen: return "Screen";
    case Phase::Train: return "Train";
    case Phase::Evaluate: return "Evaluate";
    case Phase::Decide: return "Decide";
    case Phase::Done: return "Done";
  }
  return "?";
}

RunState make_run_state(const RunConfig& config) {
  if (config.max_iterations < 1) {
    throw ConfigError("max_iterations must be >= 1");
  }
  if (config.constraints.ram_budget_bytes <= 0 ||
      config.constraints.flash_budget_bytes <= 0) {
    throw ConfigError("RAM and Flash budgets must be positive");
  }
  if (config.task.num_classes < 2) {
    throw ConfigError("num_classes must be >= 2");
  }
  if (config.max_consecutive_failures < 1) {
    throw ConfigError("max_consecutive_failures must be >= 1");
  }
  if (config.task_retry_limit < 0) {
    throw ConfigError("task_retry_limit must be >= 0");
  }
  const auto& in = config.task.input_shape;
  if (in.channels < 1 || in.height < 1 || in.width < 1) {
    throw ConfigError("task input shape must have positive extents");
  }

  RunState state;
  state.config = config;

  if (config.strategy.override) {
    state.strategy = config.strategy.override;
  } else if (config.strategy.kind == "random") {
    state.strategy =
        std::make_shared<proposal::RandomStrategy>(config.strategy.sampler);
  } else if (config.strategy.kind == "mutation") {
    state.strategy =
        std::make_shared<proposal::MutationStrategy>(config.strategy.sampler);
  } else if (config.strategy.kind == "llm") {
    state.strategy = std::make_shared<proposal::LlmStrategy>(
        config.strategy.llm,
        proposal::make_http_chat_transport(config.strategy.llm));
  } else {
    throw ConfigError("unknown strategy \"" + config.strategy.kind + "\"");
  }

  if (config.evaluator.override) {
    state.evaluator = config.evaluator.override;
  } else if (config.evaluator.kind == "surrogate") {
    state.evaluator = std::make_shared<eval::SurrogateEvaluator>();
  } else if (config.evaluator.kind == "external") {
    if (config.evaluator.trainer.command.empty()) {
      throw ConfigError("external evaluator requires a trainer command");
    }
    state.evaluator =
        std::make_shared<eval::ExternalTrainer>(config.evaluator.trainer);
  } else {
    throw ConfigError("unknown evaluator \"" + config.evaluator.kind + "\"");
  }

  if (config.backend.kind != "builtin" && config.backend.kind != "external") {
    throw ConfigError("unknown backend \"" + config.backend.kind + "\"");
  }
  if (config.backend.kind == "external" &&
      config.backend.adapter.command.empty()) {
    throw ConfigError("external backend requires an adapter command");
  }

  // One TrainConfig per run keeps every EvalResult comparable.
  state.train_config.dataset = config.task.dataset;
  state.train_config.input_shape = config.task.input_shape;
  state.train_config.num_classes = static_cast<int>(config.task.num_classes);
  state.train_config.max_epochs = config.max_epochs;
  state.train_config.patience = config.patience;
  state.train_config.seed = util::derive_seed(config.master_seed, 0);
  return state;
}

void step(RunState& state) {
  switch (state.phase) {
    case Phase::Propose: phase_propose(state); return;
    case Phase::Screen: phase_screen(state); return;
    case Phase::Train: phase_train(state); return;
    case Phase::Evaluate: phase_evaluate(state); return;
    case Phase::Decide: finish_iteration(state); return;
    case Phase::Done:
      throw TerminalStateError("step() called on a terminal run state");
  }
}

ContextStats account_context(const RunState& state) {
  ContextStats stats;
  stats.per_role["proposal"] = 0;
  stats.per_role["training"] = 0;
  stats.per_role["eval_conversion"] = 0;
  for (const auto& task : state.tasks) {
    const auto bytes = task.summary.context_bytes_used;
    stats.per_role[std::string(to_string(task.summary.role))] += bytes;
    stats.total_task_bytes += bytes;
    stats.supervisor_bytes +=
        static_cast<std::int64_t>(summary_json(task.summary).dump().size());
  }
  return stats;
}

RunReport summarize_run(const RunState& state) {
  RunReport report;
  report.best = state.repository.best_feasible();
  report.repo_path = state.config.repo_path;
  report.iterations = state.iteration;
  report.counts = state.counts;
  report.context = account_context(state);
  report.termination =
      state.termination.value_or(Termination::BudgetExhausted);
  report.strategy_kind = state.config.strategy.kind;
  report.strategy_digest = strategy_digest_for(state.config);
  report.evaluator_kind = state.config.evaluator.kind;
  report.evaluator_digest = evaluator_digest_for(state.config);
  report.train_config_digest = state.train_config.digest();
  return report;
}

std::string report_document(const RunState& state, const RunReport& report) {
  ordered_json doc = ordered_json::object();

  if (report.best) {
    ordered_json best = ordered_json::object();
    best["model_id"] = report.best->model_id;
    best["metrics"] = record_metrics_json(*report.best);
    if (!report.best->measurement.pass) {
      best["status"] = report.best->measurement.reason_strings();
    }
    doc["best"] = std::move(best);
  } else {
    doc["best"] = nullptr;
  }

  doc["constraints"] = constraints_json(state.config.constraints);
  doc["iterations"] = report.iterations;
  doc["counts"] = ordered_json{{"proposed", report.counts.proposed},
                               {"screened_out", report.counts.screened_out},
                               {"trained", report.counts.trained},
                               {"failed_tasks", report.counts.failed_tasks},
                               {"proposal_failures",
                                report.counts.proposal_failures}};

  ordered_json per_role = ordered_json::object();
  for (const auto& [role, bytes] : report.context.per_role) {
    per_role[role] = bytes;
  }
  doc["context"] = ordered_json{
      {"mode", state.config.mode == InteractionMode::Shared ? "shared"
                                                            : "isolated"},
      {"per_role", std::move(per_role)},
      {"supervisor_bytes", report.context.supervisor_bytes},
      {"total_task_bytes", report.context.total_task_bytes}};

  doc["strategy"] = ordered_json{{"kind", report.strategy_kind},
                                 {"digest", report.strategy_digest}};
  doc["evaluator"] = ordered_json{{"kind", report.evaluator_kind},
                                  {"digest", report.evaluator_digest}};
  doc["train_config_digest"] = report.train_config_digest;
  doc["termination"] = std::string(to_string(report.termination));

  ordered_json paths = ordered_json::object();
  paths["repository"] = state.config.repo_path;
  if (report.best) {
    paths["best_spec"] = best_spec_path(state.config);
    if (report.best->performance && report.best->performance->checkpoint_path) {
      paths["checkpoint"] = *report.best->performance->checkpoint_path;
    } else {
      paths["checkpoint"] = nullptr;
    }
  } else {
    paths["best_spec"] = nullptr;
    paths["checkpoint"] = nullptr;
  }
  doc["paths"] = std::move(paths);
  return doc.dump(2) + "\n";
}

RunReport run_customization(const RunConfig& config) {
  RunState state = make_run_state(config);
  while (!state.terminal()) {
    step(state);
  }

  RunReport report = summarize_run(state);
  repo::save_repository(state.repository, config.repo_path);
  write_file_atomic(config.report_path, report_document(state, report));
  if (report.best) {
    write_file_atomic(best_spec_path(config),
                      arch::canonicalize(report.best->spec) + "\n");
  }
  std::string log;
  for (const auto& line : state.log_lines) {
    log += line;
    log += '\n';
  }
  write_file_atomic(log_path_for(config), log);
  return report;
}

}  // namespace automcu::orch
