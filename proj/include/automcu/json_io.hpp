// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON bridges shared by persistence, the orchestrator payloads, and the
// CLI. ordered_json is used for every emitted document so key order (and
// therefore the byte stream) is fully pinned.

#ifndef AUTOMCU_JSON_IO_HPP
#define AUTOMCU_JSON_IO_HPP

#include <json.hpp>

#include "automcu/arch_spec.hpp"
#include "automcu/repository.hpp"

namespace automcu {

// Spec document as a JSON tree: layers in index order, "type" first, params
// lexicographic — the same layout canonicalize() emits as text.
nlohmann::ordered_json spec_to_json(const arch::ArchitectureSpec& spec);

// Strict parse of a spec document held as a JSON subtree (re-runs the full
// document grammar; throws arch::SpecError).
arch::ArchitectureSpec spec_from_json(const nlohmann::json& node);

// The exact `metrics` object persisted per record.
nlohmann::ordered_json record_metrics_json(const repo::Record& record);

// Full on-disk record object {model_id, architecture_spec, metrics[, status]}.
nlohmann::ordered_json record_to_json(const repo::Record& record);

// ContextSummary in structured form (used in task payloads).
nlohmann::ordered_json summary_to_json(const repo::ContextSummary& summary);

}  // namespace automcu

#endif  // AUTOMCU_JSON_IO_HPP
