// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deployment feasibility: peak activation RAM via tensor-liveness planning,
// Flash via an int8 byte model, hard budget enforcement, and the adapter
// contract for external vendor backends.

#ifndef AUTOMCU_FEASIBILITY_HPP
#define AUTOMCU_FEASIBILITY_HPP

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "automcu/arch_spec.hpp"
#include "automcu/graph.hpp"

namespace automcu::backend {

struct BackendProfile {
  std::string name{"default"};
  std::set<graph::OpKind> supported;
  std::int64_t activation_bytes_per_element{1};
  std::int64_t weight_bytes_per_element{1};
  std::int64_t bias_bytes{4};
  std::int64_t scale_bytes_per_channel{4};
  std::int64_t runtime_flash_overhead{0};
  std::int64_t runtime_ram_overhead{0};

  // int8 activations/weights, float32 per-channel scales and biases, no
  // runtime overhead, every op kind supported.
  static BackendProfile default_profile();
};

// Resolves a profile by name. Only "default" is registered; unknown names
// throw std::out_of_range.
const BackendProfile& get_backend_profile(const std::string& name);

struct ConstraintSet {
  std::int64_t ram_budget_bytes{0};
  std::int64_t flash_budget_bytes{0};
  graph::TensorShape input_shape;
  std::string backend_profile{"default"};
};

struct MemoryPlanStep {
  int step{0};
  std::vector<graph::TensorId> live;  // buffer root ids, ascending
  std::int64_t live_bytes{0};
};

struct MemoryPlan {
  std::vector<MemoryPlanStep> steps;
  std::int64_t peak_bytes{0};  // max step live bytes + runtime RAM overhead
  int peak_step{0};
};

struct FailReason {
  enum class Kind {
    RamOverBudget,
    FlashOverBudget,
    UnsupportedOperator,
    NotConstructible,
  };
  Kind kind{Kind::NotConstructible};
  std::string detail;  // op kind name / diagnostic

  // Renders as e.g. "RamOverBudget", "UnsupportedOperator(concat)",
  // "NotConstructible(<detail>)".
  std::string to_string() const;
};

struct Measurement {
  std::int64_t ram_bytes{0};
  std::int64_t flash_bytes{0};
  bool pass{false};
  std::vector<FailReason> reasons;  // empty iff pass

  std::vector<std::string> reason_strings() const;
};

// Simulates the fixed execution order: each op's output buffer is allocated
// at its step and every buffer stays live from its producing step through
// its last consuming step inclusive (the graph input counts as produced at
// step 0). relu/batch_norm run in place: their outputs alias the input
// buffer rather than allocating. Throws graph::GraphError on an unshaped
// graph.
MemoryPlan plan_memory(const graph::ModelGraph& shaped,
                       const BackendProfile& profile);

// Byte model: every weighted op stores weights (1 byte/element by default),
// 4-byte per-output-channel scales, and a 4-byte bias per output channel
// when it has an explicit bias OR feeds a batch_norm (the norm folds into
// it). batch_norm itself stores nothing. Runtime overhead added once.
// Throws graph::GraphError on unshaped or empty graphs.
std::int64_t estimate_flash(const graph::ModelGraph& shaped,
                            const BackendProfile& profile);

// Full pipeline: schema check, lowering, shape inference, operator-support
// check, memory plan, flash estimate, budget comparison. Never throws for
// any spec; all failures are reasons. RAM/Flash are populated whenever the
// graph is constructible, even when the status is Fail.
Measurement analyze(const arch::ArchitectureSpec& spec,
                    const ConstraintSet& constraints);
Measurement analyze(const arch::ArchitectureSpec& spec,
                    const ConstraintSet& constraints,
                    const BackendProfile& profile);

struct AdapterConfig {
  std::string command;  // whitespace-tokenized; no shell
  double timeout_seconds{300.0};
};

class AdapterError : public std::runtime_error {
 public:
  enum class Kind { SpawnFailed, Timeout, BadOutput };
  AdapterError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Writes the canonical spec to a temp file, runs
//   <command> <spec-file> --input-shape CxHxW
// and parses the single-line JSON result
//   {"ram_kb": <num>, "flash_kb": <num>, "status": "ok"|"error", "detail"?}
// into a Measurement (KB values rounded to bytes at 1024 bytes/KB), then
// applies the same budget comparison as analyze. Throws AdapterError.
Measurement analyze_external(const arch::ArchitectureSpec& spec,
                             const ConstraintSet& constraints,
                             const AdapterConfig& adapter);

// Shared KB<->byte conversions (1 KB = 1024 bytes; KB rendered at 2 dp).
double kb_from_bytes(std::int64_t bytes);
std::int64_t bytes_from_kb(double kb);

}  // namespace automcu::backend

#endif  // AUTOMCU_FEASIBILITY_HPP
