// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Historical evaluation repository: append-only records of every explored
// candidate (trained or screened out), JSON persistence, and the selection
// queries that feed proposal refinement.

#ifndef AUTOMCU_REPOSITORY_HPP
#define AUTOMCU_REPOSITORY_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "automcu/arch_spec.hpp"
#include "automcu/feasibility.hpp"

namespace automcu::repo {

struct EvalResult {
  double accuracy_percent{0.0};  // [0, 100]
  bool converged{true};
  int epochs_run{0};
  std::optional<std::string> checkpoint_path;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

struct Record {
  std::string model_id;
  arch::ArchitectureSpec spec;
  // Absent for candidates rejected before training.
  std::optional<EvalResult> performance;
  backend::Measurement measurement;
};

// Builds a record whose model_id is derived from the architecture's
// canonical bytes.
Record make_record(const arch::ArchitectureSpec& spec,
                   std::optional<EvalResult> performance,
                   backend::Measurement measurement);

class RepositoryError : public std::runtime_error {
 public:
  enum class Kind { DuplicateId, Malformed, Io };
  RepositoryError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// History entries reduced for prompt consumption: id, a per-layer digest of
// kinds and widths, the outcome, and KB figures at 2 decimals.
struct ContextEntry {
  std::string model_id;
  std::string layers_digest;  // e.g. "conv:3->8, depthwise:8->8, ..."
  std::optional<double> accuracy_percent;
  std::vector<std::string> fail_reasons;
  double ram_kb{0.0};
  double flash_kb{0.0};
};

struct ContextSummary {
  std::vector<ContextEntry> best;             // accuracy-ranked feasible
  std::vector<ContextEntry> recent_failures;  // most recent first

  bool empty() const { return best.empty() && recent_failures.empty(); }
  // Deterministic plain-text rendering (used verbatim in LLM prompts).
  // Renders an explicit no-history marker when both sections are empty.
  std::string to_text() const;
};

class Repository {
 public:
  // Fails with DuplicateId when the record's model_id is already present.
  void append(Record record);

  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const Record* find(const std::string& model_id) const;

  // Highest accuracy among records with status Pass and performance present;
  // ties broken by lower RAM, then lower Flash, then earlier insertion.
  std::optional<Record> best_feasible() const;

  // k_best top feasible records plus the k_fail most recent Fail records.
  ContextSummary select_context(int k_best, int k_fail) const;

 private:
  std::vector<Record> records_;
};

// External format: a JSON array of {model_id, architecture_spec, metrics
// [, status]} objects; KB values carry 2 decimals. save is atomic
// (temp file + rename).
std::string to_document(const Repository& repo);
Repository from_document(const std::string& text);
void save_repository(const Repository& repo, const std::string& path);
Repository load_repository(const std::string& path);

}  // namespace automcu::repo

#endif  // AUTOMCU_REPOSITORY_HPP
