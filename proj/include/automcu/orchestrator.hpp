// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// The supervisor: a deterministic state machine driving the
// propose → screen → train → evaluate → decide loop. Agents are
// state-isolated — every exchange goes through structured TaskAssignment /
// TaskSummary values, and context bytes are accounted per task so the
// isolated-vs-shared ablation is measurable.

#ifndef AUTOMCU_ORCHESTRATOR_HPP
#define AUTOMCU_ORCHESTRATOR_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "automcu/evaluator.hpp"
#include "automcu/proposal.hpp"
#include "automcu/repository.hpp"

namespace automcu::orch {

enum class AgentRole { Proposal, Training, EvalConversion };
std::string_view to_string(AgentRole role);

enum class InteractionMode { Isolated, Shared };
enum class Termination { BudgetExhausted, TargetMet, AbortedOnFailures };
std::string_view to_string(Termination reason);

enum class Phase { Propose, Screen, Train, Evaluate, Decide, Done };
std::string_view to_string(Phase phase);

struct TaskAssignment {
  std::string task_id;
  AgentRole role{AgentRole::Proposal};
  nlohmann::ordered_json payload;
  // Provenance class per top-level payload field; values come from a closed
  // vocabulary (user_config, repository_summary, candidate_spec,
  // derived_seed, repository_record) — never raw agent turns.
  std::map<std::string, std::string> provenance;
};

struct TaskSummary {
  std::string task_id;
  AgentRole role{AgentRole::Proposal};
  bool ok{false};
  nlohmann::ordered_json key_results;
  std::optional<std::string> error;
  std::int64_t context_bytes_used{0};
};

struct StrategySelection {
  std::string kind{"random"};  // random | mutation | llm
  proposal::SamplerConfig sampler;
  proposal::LlmConfig llm;
  // Test seam: used verbatim when set (kind is reported as-is).
  std::shared_ptr<proposal::ProposalStrategy> override;
};

struct EvaluatorSelection {
  std::string kind{"surrogate"};  // surrogate | external
  eval::TrainerConfig trainer;
  std::shared_ptr<eval::Evaluator> override;
};

struct BackendSelection {
  std::string kind{"builtin"};  // builtin | external
  backend::AdapterConfig adapter;
};

struct RunConfig {
  proposal::TaskDescriptor task;
  backend::ConstraintSet constraints;
  StrategySelection strategy;
  EvaluatorSelection evaluator;
  BackendSelection backend;
  int max_iterations{10};
  int task_retry_limit{2};  // retries after the first attempt
  int max_consecutive_failures{3};
  std::optional<double> target_accuracy;
  InteractionMode mode{InteractionMode::Isolated};
  std::uint64_t master_seed{0};
  int max_epochs{30};
  int patience{5};
  int k_best{5};
  int k_fail{3};
  std::string repo_path{"automcu_repo.json"};
  std::string report_path{"automcu_report.json"};
  std::optional<std::string> log_path;  // default: report_path + ".log.ndjson"
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TerminalStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Counts {
  int proposed{0};
  int screened_out{0};  // includes feasible candidates whose training task
                        // exhausted its retries (recorded without performance)
  int trained{0};
  int failed_tasks{0};  // individual failed attempts across all tasks
  int proposal_failures{0};
};

struct ContextStats {
  std::map<std::string, std::int64_t> per_role;  // sums over agent tasks
  std::int64_t supervisor_bytes{0};              // summary intake
  std::int64_t total_task_bytes{0};
};

struct TaskRecord {
  TaskAssignment assignment;
  TaskSummary summary;
  int attempts{1};
};

struct RunState {
  RunConfig config;
  repo::Repository repository;
  Phase phase{Phase::Propose};
  int iteration{0};  // 1-based once the first Propose runs
  Counts counts;
  int consecutive_failures{0};
  bool iteration_failed{false};
  std::optional<Termination> termination;

  std::optional<arch::ArchitectureSpec> current_spec;
  std::optional<backend::Measurement> current_measurement;
  std::optional<repo::EvalResult> current_eval;

  std::vector<TaskRecord> tasks;
  std::vector<std::string> log_lines;  // NDJSON run log
  std::int64_t transcript_bytes{0};    // cumulative payload+summary bytes
  int task_counter{0};

  std::shared_ptr<proposal::ProposalStrategy> strategy;
  std::shared_ptr<eval::Evaluator> evaluator;
  eval::TrainConfig train_config;

  bool terminal() const { return phase == Phase::Done; }
};

struct RunReport {
  std::optional<repo::Record> best;
  std::string repo_path;
  int iterations{0};
  Counts counts;
  ContextStats context;
  Termination termination{Termination::BudgetExhausted};
  std::string strategy_kind;
  std::string strategy_digest;
  std::string evaluator_kind;
  std::string evaluator_digest;
  std::string train_config_digest;
};

// Validates the config and builds the initial state (strategy, evaluator,
// train config with a seed split off the master). Throws ConfigError.
RunState make_run_state(const RunConfig& config);

// Advances exactly one phase; all effects (repo append, logging, context
// accounting) happen inside. Throws TerminalStateError when already Done.
void step(RunState& state);

// Replays the per-task accounting for the state's mode.
ContextStats account_context(const RunState& state);

// Projects the terminal state into a report value.
RunReport summarize_run(const RunState& state);

// Renders the deployment report document (metrics mirror the repository
// serialization exactly).
std::string report_document(const RunState& state, const RunReport& report);

// Full loop: step until Done, then write repo, report, best-spec canonical
// file, and the NDJSON run log. Throws ConfigError / RepositoryError.
RunReport run_customization(const RunConfig& config);

}  // namespace automcu::orch

#endif  // AUTOMCU_ORCHESTRATOR_HPP
