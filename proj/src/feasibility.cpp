// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#include "automcu/feasibility.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "automcu/subprocess.hpp"

namespace automcu::backend {
namespace {

using nlohmann::json;

// Buffer root of a tensor: relu/batch_norm pass their input buffer through,
// so chains collapse onto the first non-in-place producer (or graph input).
std::map<graph::TensorId, graph::TensorId> alias_roots(
    const graph::ModelGraph& g) {
  std::map<graph::TensorId, graph::TensorId> root;
  root[g.input_id] = g.input_id;
  for (const auto& op : g.ops) {
    if (op.kind == graph::OpKind::Relu || op.kind == graph::OpKind::BatchNorm) {
      root[op.output] = root.at(op.inputs[0]);
    } else {
      root[op.output] = op.output;
    }
  }
  return root;
}

struct TempFile {
  std::string path;
  ~TempFile() {
    if (!path.empty()) {
      std::error_code ec;
      std::filesystem::remove(path, ec);
    }
  }
};

std::string single_nonempty_line(const std::string& text, bool& ok) {
  std::string line;
  bool seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string candidate = text.substr(pos, end - pos);
    if (!candidate.empty() && candidate.back() == '\r') candidate.pop_back();
    const bool blank =
        candidate.find_first_not_of(" \t") == std::string::npos;
    if (!blank) {
      if (seen) {
        ok = false;
        return {};
      }
      line = candidate;
      seen = true;
    }
    pos = end + 1;
  }
  ok = seen;
  return line;
}

}  // namespace

BackendProfile BackendProfile::default_profile() {
  BackendProfile p;
  p.name = "default";
  p.supported = {
      graph::OpKind::Conv2d,        graph::OpKind::DepthwiseConv2d,
      graph::OpKind::BatchNorm,     graph::OpKind::Relu,
      graph::OpKind::Add,           graph::OpKind::Concat,
      graph::OpKind::GlobalAvgPool, graph::OpKind::FullyConnected,
  };
  return p;
}

const BackendProfile& get_backend_profile(const std::string& name) {
  static const std::map<std::string, BackendProfile> registry = {
      {"default", BackendProfile::default_profile()},
  };
  return registry.at(name);
}

std::string FailReason::to_string() const {
  switch (kind) {
    case Kind::RamOverBudget: return "RamOverBudget";
    case Kind::FlashOverBudget: return "FlashOverBudget";
    case Kind::UnsupportedOperator: return "UnsupportedOperator(" + detail + ")";
    case Kind::NotConstructible: return "NotConstructible(" + detail + ")";
  }
  return "?";
}

std::vector<std::string> Measurement::reason_strings() const {
  std::vector<std::string> out;
  out.reserve(reasons.size());
  for (const auto& r : reasons) out.push_back(r.to_string());
  return out;
}

double kb_from_bytes(std::int64_t bytes) {
  return std::round(static_cast<double>(bytes) / 1024.0 * 100.0) / 100.0;
}

std::int64_t bytes_from_kb(double kb) {
  return static_cast<std::int64_t>(std::llround(kb * 1024.0));
}

MemoryPlan plan_memory(const graph::ModelGraph& shaped,
                       const BackendProfile& profile) {
  if (!shaped.shaped()) {
    throw graph::GraphError("plan_memory requires a shaped graph");
  }

  const auto root = alias_roots(shaped);
  const int steps = static_cast<int>(shaped.ops.size());

  // Liveness interval per buffer root: produced-at through last-used-at.
  std::map<graph::TensorId, int> produced;
  std::map<graph::TensorId, int> last_used;
  produced[shaped.input_id] = 0;  // the graph input occupies RAM from step 0
  last_used[shaped.input_id] = 0;

  for (int i = 0; i < steps; ++i) {
    const auto& op = shaped.ops[i];
    for (graph::TensorId in : op.inputs) {
      last_used[root.at(in)] = i;
    }
    const graph::TensorId out_root = root.at(op.output);
    if (!produced.count(out_root)) produced[out_root] = i;
    last_used[out_root] = std::max(last_used[out_root], i);
  }

  MemoryPlan plan;
  plan.steps.reserve(static_cast<std::size_t>(std::max(steps, 1)));
  std::int64_t peak = 0;
  int peak_step = 0;
  for (int i = 0; i < steps; ++i) {
    MemoryPlanStep step;
    step.step = i;
    for (const auto& [buffer, from] : produced) {
      if (from <= i && i <= last_used.at(buffer)) {
        step.live.push_back(buffer);
        step.live_bytes += shaped.tensors.at(buffer).elements() *
                           profile.activation_bytes_per_element;
      }
    }
    if (step.live_bytes > peak) {
      peak = step.live_bytes;
      peak_step = i;
    }
    plan.steps.push_back(std::move(step));
  }
  plan.peak_bytes = peak + profile.runtime_ram_overhead;
  plan.peak_step = peak_step;
  return plan;
}

std::int64_t estimate_flash(const graph::ModelGraph& shaped,
                            const BackendProfile& profile) {
  if (!shaped.shaped()) {
    throw graph::GraphError("estimate_flash requires a shaped graph");
  }
  if (shaped.ops.empty()) {
    throw graph::GraphError("estimate_flash requires a non-empty graph");
  }

  // Ops whose output feeds a batch_norm absorb its parameters as a folded
  // bias at deployment time.
  std::set<graph::TensorId> bn_inputs;
  for (const auto& op : shaped.ops) {
    if (op.kind == graph::OpKind::BatchNorm) bn_inputs.insert(op.inputs[0]);
  }

  std::int64_t total = 0;
  for (const auto& op : shaped.ops) {
    std::int64_t weight_count = 0;
    switch (op.kind) {
      case graph::OpKind::Conv2d:
        weight_count = op.kernel * op.kernel * op.in_channels * op.out_channels;
        break;
      case graph::OpKind::DepthwiseConv2d:
        weight_count = op.kernel * op.kernel * op.out_channels;
        break;
      case graph::OpKind::FullyConnected:
        weight_count = op.in_channels * op.out_channels;
        break;
      default:
        continue;  // batch_norm folds away; the rest carry no parameters
    }
    const bool folded_bias = op.has_bias || bn_inputs.count(op.output) > 0;
    total += weight_count * profile.weight_bytes_per_element;
    if (folded_bias) total += op.out_channels * profile.bias_bytes;
    total += op.out_channels * profile.scale_bytes_per_channel;
  }
  return total + profile.runtime_flash_overhead;
}

Measurement analyze(const arch::ArchitectureSpec& spec,
                    const ConstraintSet& constraints) {
  return analyze(spec, constraints,
                 get_backend_profile(constraints.backend_profile));
}

Measurement analyze(const arch::ArchitectureSpec& spec,
                    const ConstraintSet& constraints,
                    const BackendProfile& profile) {
  Measurement m;

  const auto report = arch::validate_schema(spec);
  if (!report.valid) {
    m.reasons.push_back(FailReason{FailReason::Kind::NotConstructible,
                                   "schema: " + report.issues.front().message});
    return m;
  }

  graph::ModelGraph g;
  try {
    g = graph::infer_shapes(graph::expand_blocks(spec), constraints.input_shape);
  } catch (const graph::DimensionError& e) {
    m.reasons.push_back(
        FailReason{FailReason::Kind::NotConstructible, e.what()});
    return m;
  }

  // Constructible from here on: bytes are always populated.
  std::vector<std::string> unsupported;  // first-occurrence order, distinct
  for (const auto& op : g.ops) {
    if (!profile.supported.count(op.kind)) {
      const std::string name{graph::to_string(op.kind)};
      if (std::find(unsupported.begin(), unsupported.end(), name) ==
          unsupported.end()) {
        unsupported.push_back(name);
      }
    }
  }
  for (const auto& name : unsupported) {
    m.reasons.push_back(FailReason{FailReason::Kind::UnsupportedOperator, name});
  }

  m.ram_bytes = plan_memory(g, profile).peak_bytes;
  m.flash_bytes = estimate_flash(g, profile);
  if (m.ram_bytes > constraints.ram_budget_bytes) {
    m.reasons.push_back(FailReason{FailReason::Kind::RamOverBudget, ""});
  }
  if (m.flash_bytes > constraints.flash_budget_bytes) {
    m.reasons.push_back(FailReason{FailReason::Kind::FlashOverBudget, ""});
  }
  m.pass = m.reasons.empty();
  return m;
}

Measurement analyze_external(const arch::ArchitectureSpec& spec,
                             const ConstraintSet& constraints,
                             const AdapterConfig& adapter) {
  auto argv = util::split_command(adapter.command);
  if (argv.empty()) {
    throw AdapterError(AdapterError::Kind::SpawnFailed,
                       "adapter command is empty");
  }

  TempFile temp;
  {
    const auto dir = std::filesystem::temp_directory_path();
    std::string name =
        (dir / "automcu_spec_XXXXXX").string();
    const int fd = ::mkstemp(name.data());
    if (fd < 0) {
      throw AdapterError(AdapterError::Kind::SpawnFailed,
                         "cannot create temp spec file");
    }
    temp.path = name;
    const std::string doc = arch::canonicalize(spec) + "\n";
    const auto written = ::write(fd, doc.data(), doc.size());
    ::close(fd);
    if (written != static_cast<ssize_t>(doc.size())) {
      throw AdapterError(AdapterError::Kind::SpawnFailed,
                         "cannot write temp spec file");
    }
  }

  const auto& in = constraints.input_shape;
  argv.push_back(temp.path);
  argv.push_back("--input-shape");
  argv.push_back(std::to_string(in.channels) + "x" + std::to_string(in.height) +
                 "x" + std::to_string(in.width));

  const auto run = util::run_command(argv, "", adapter.timeout_seconds);
  if (run.spawn_failed) {
    throw AdapterError(AdapterError::Kind::SpawnFailed, run.spawn_error);
  }
  if (run.timed_out) {
    throw AdapterError(AdapterError::Kind::Timeout,
                       "adapter exceeded " +
                           std::to_string(adapter.timeout_seconds) + " s");
  }
  if (run.exit_code != 0) {
    throw AdapterError(AdapterError::Kind::SpawnFailed,
                       "adapter exited with code " +
                           std::to_string(run.exit_code));
  }

  bool single = false;
  const std::string line = single_nonempty_line(run.out, single);
  if (!single) {
    throw AdapterError(AdapterError::Kind::BadOutput,
                       "adapter must print exactly one line of JSON");
  }
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw AdapterError(AdapterError::Kind::BadOutput,
                       std::string("adapter output is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("ram_kb") || !doc["ram_kb"].is_number() ||
      !doc.contains("flash_kb") || !doc["flash_kb"].is_number() ||
      !doc.contains("status") || !doc["status"].is_string()) {
    throw AdapterError(AdapterError::Kind::BadOutput,
                       "adapter output lacks ram_kb/flash_kb/status");
  }
  const std::string status = doc["status"].get<std::string>();
  if (status != "ok" && status != "error") {
    throw AdapterError(AdapterError::Kind::BadOutput,
                       "adapter status must be \"ok\" or \"error\"");
  }

  Measurement m;
  m.ram_bytes = bytes_from_kb(doc["ram_kb"].get<double>());
  m.flash_bytes = bytes_from_kb(doc["flash_kb"].get<double>());
  if (status == "error") {
    std::string detail = "backend rejected the model";
    if (doc.contains("detail") && doc["detail"].is_string()) {
      detail = doc["detail"].get<std::string>();
    }
    m.reasons.push_back(FailReason{FailReason::Kind::NotConstructible, detail});
  }
  if (m.ram_bytes > constraints.ram_budget_bytes) {
    m.reasons.push_back(FailReason{FailReason::Kind::RamOverBudget, ""});
  }
  if (m.flash_bytes > constraints.flash_budget_bytes) {
    m.reasons.push_back(FailReason{FailReason::Kind::FlashOverBudget, ""});
  }
  m.pass = m.reasons.empty();
  return m;
}

}  // namespace automcu::backend
