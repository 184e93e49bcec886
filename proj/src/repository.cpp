// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#include "automcu/repository.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "automcu/json_io.hpp"

namespace automcu::repo {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void malformed(std::size_t entry, const std::string& detail) {
  throw RepositoryError(RepositoryError::Kind::Malformed,
                        "entry " + std::to_string(entry) + ": " + detail);
}

// True when a is strictly better than b under the feasible-record order:
// higher accuracy, then lower RAM, then lower Flash. Equal keys: not better,
// so earlier insertion wins in linear scans and stable sorts.
bool better(const Record& a, const Record& b) {
  const double aa = a.performance->accuracy_percent;
  const double ba = b.performance->accuracy_percent;
  if (aa != ba) return aa > ba;
  if (a.measurement.ram_bytes != b.measurement.ram_bytes) {
    return a.measurement.ram_bytes < b.measurement.ram_bytes;
  }
  if (a.measurement.flash_bytes != b.measurement.flash_bytes) {
    return a.measurement.flash_bytes < b.measurement.flash_bytes;
  }
  return false;
}

backend::FailReason reason_from_string(const std::string& text,
                                       std::size_t entry) {
  using Kind = backend::FailReason::Kind;
  auto wrapped = [&](const std::string& prefix) -> std::optional<std::string> {
    if (text.size() >= prefix.size() + 2 &&
        text.compare(0, prefix.size() + 1, prefix + "(") == 0 &&
        text.back() == ')') {
      return text.substr(prefix.size() + 1,
                         text.size() - prefix.size() - 2);
    }
    return std::nullopt;
  };
  if (text == "RamOverBudget") return {Kind::RamOverBudget, ""};
  if (text == "FlashOverBudget") return {Kind::FlashOverBudget, ""};
  if (auto d = wrapped("UnsupportedOperator")) {
    return {Kind::UnsupportedOperator, *d};
  }
  if (auto d = wrapped("NotConstructible")) {
    return {Kind::NotConstructible, *d};
  }
  malformed(entry, "unknown status reason \"" + text + "\"");
}

std::string format_kb(double kb) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", kb);
  return buf;
}

std::string format_acc(double acc) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", acc);
  return buf;
}

std::string entry_line(const ContextEntry& e) {
  std::string line = e.model_id + ": ";
  if (e.accuracy_percent) {
    line += "acc=" + format_acc(*e.accuracy_percent);
  } else {
    line += "reasons=[";
    for (std::size_t i = 0; i < e.fail_reasons.size(); ++i) {
      if (i) line += ", ";
      line += e.fail_reasons[i];
    }
    line += "]";
  }
  line += ", ram_kb=" + format_kb(e.ram_kb) +
          ", flash_kb=" + format_kb(e.flash_kb) + ", layers=[" +
          e.layers_digest + "]";
  return line;
}

ContextEntry reduce(const Record& record) {
  ContextEntry e;
  e.model_id = record.model_id;
  std::string digest;
  for (std::size_t i = 0; i < record.spec.backbone.size(); ++i) {
    const auto& layer = record.spec.backbone[i];
    if (i) digest += ", ";
    digest += std::string(arch::to_string(layer.kind)) + ":" +
              std::to_string(layer.in_channels()) + "->" +
              std::to_string(layer.out_channels());
  }
  e.layers_digest = digest;
  if (record.performance) e.accuracy_percent = record.performance->accuracy_percent;
  if (!record.measurement.pass) e.fail_reasons = record.measurement.reason_strings();
  e.ram_kb = backend::kb_from_bytes(record.measurement.ram_bytes);
  e.flash_kb = backend::kb_from_bytes(record.measurement.flash_bytes);
  return e;
}

}  // namespace

Record make_record(const arch::ArchitectureSpec& spec,
                   std::optional<EvalResult> performance,
                   backend::Measurement measurement) {
  Record r;
  r.model_id = arch::spec_id(spec);
  r.spec = spec;
  r.performance = std::move(performance);
  r.measurement = std::move(measurement);
  return r;
}

void Repository::append(Record record) {
  if (find(record.model_id) != nullptr) {
    throw RepositoryError(RepositoryError::Kind::DuplicateId,
                          "model_id \"" + record.model_id +
                              "\" is already in the repository");
  }
  records_.push_back(std::move(record));
}

const Record* Repository::find(const std::string& model_id) const {
  for (const auto& r : records_) {
    if (r.model_id == model_id) return &r;
  }
  return nullptr;
}

std::optional<Record> Repository::best_feasible() const {
  const Record* best = nullptr;
  for (const auto& r : records_) {
    if (!r.measurement.pass || !r.performance) continue;
    if (best == nullptr || better(r, *best)) best = &r;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

ContextSummary Repository::select_context(int k_best, int k_fail) const {
  ContextSummary summary;

  std::vector<const Record*> feasible;
  for (const auto& r : records_) {
    if (r.measurement.pass && r.performance) feasible.push_back(&r);
  }
  std::stable_sort(feasible.begin(), feasible.end(),
                   [](const Record* a, const Record* b) { return better(*a, *b); });
  const auto n_best = std::min<std::size_t>(feasible.size(),
                                            k_best < 0 ? 0 : k_best);
  for (std::size_t i = 0; i < n_best; ++i) {
    summary.best.push_back(reduce(*feasible[i]));
  }

  for (auto it = records_.rbegin();
       it != records_.rend() &&
       summary.recent_failures.size() < static_cast<std::size_t>(
                                            k_fail < 0 ? 0 : k_fail);
       ++it) {
    if (!it->measurement.pass) summary.recent_failures.push_back(reduce(*it));
  }
  return summary;
}

std::string ContextSummary::to_text() const {
  if (empty()) return "No history yet.\n";
  std::string out;
  if (!best.empty()) {
    out += "Top candidates:\n";
    for (const auto& e : best) out += "  " + entry_line(e) + "\n";
  }
  if (!recent_failures.empty()) {
    out += "Recent failures:\n";
    for (const auto& e : recent_failures) out += "  " + entry_line(e) + "\n";
  }
  return out;
}

std::string to_document(const Repository& repo) {
  ordered_json array = ordered_json::array();
  for (const auto& record : repo.records()) {
    array.push_back(automcu::record_to_json(record));
  }
  return array.dump(2) + "\n";
}

Repository from_document(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw RepositoryError(RepositoryError::Kind::Malformed,
                          std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) {
    throw RepositoryError(RepositoryError::Kind::Malformed,
                          "repository document must be a JSON array");
  }

  Repository repo;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& node = doc[i];
    if (!node.is_object()) malformed(i, "record must be an object");
    if (!node.contains("model_id") || !node["model_id"].is_string()) {
      malformed(i, "missing model_id");
    }
    if (!node.contains("architecture_spec")) {
      malformed(i, "missing architecture_spec");
    }
    if (!node.contains("metrics") || !node["metrics"].is_object()) {
      malformed(i, "missing metrics");
    }

    Record record;
    record.model_id = node["model_id"].get<std::string>();
    try {
      record.spec = automcu::spec_from_json(node["architecture_spec"]);
    } catch (const arch::SpecError& e) {
      malformed(i, std::string("architecture_spec: ") + e.what());
    }

    const auto& metrics = node["metrics"];
    if (!metrics.contains("model_acc") ||
        !(metrics["model_acc"].is_number() || metrics["model_acc"].is_null())) {
      malformed(i, "metrics.model_acc must be a number or null");
    }
    if (!metrics.contains("model_ram_KB") || !metrics["model_ram_KB"].is_number()) {
      malformed(i, "metrics.model_ram_KB must be a number");
    }
    if (!metrics.contains("model_flash_KB") ||
        !metrics["model_flash_KB"].is_number()) {
      malformed(i, "metrics.model_flash_KB must be a number");
    }

    record.measurement.ram_bytes =
        backend::bytes_from_kb(metrics["model_ram_KB"].get<double>());
    record.measurement.flash_bytes =
        backend::bytes_from_kb(metrics["model_flash_KB"].get<double>());

    if (!metrics["model_acc"].is_null()) {
      EvalResult perf;
      perf.accuracy_percent = metrics["model_acc"].get<double>();
      if (perf.accuracy_percent < 0.0 || perf.accuracy_percent > 100.0) {
        malformed(i, "metrics.model_acc out of [0, 100]");
      }
      if (metrics.contains("converged")) {
        if (!metrics["converged"].is_boolean()) {
          malformed(i, "metrics.converged must be a boolean");
        }
        perf.converged = metrics["converged"].get<bool>();
      }
      if (metrics.contains("epochs_run")) {
        if (!metrics["epochs_run"].is_number_integer()) {
          malformed(i, "metrics.epochs_run must be an integer");
        }
        perf.epochs_run = metrics["epochs_run"].get<int>();
      }
      if (metrics.contains("checkpoint_path")) {
        if (!metrics["checkpoint_path"].is_string()) {
          malformed(i, "metrics.checkpoint_path must be a string");
        }
        perf.checkpoint_path = metrics["checkpoint_path"].get<std::string>();
      }
      record.performance = std::move(perf);
    }

    if (node.contains("status")) {
      if (!node["status"].is_array()) malformed(i, "status must be an array");
      for (const auto& reason : node["status"]) {
        if (!reason.is_string()) malformed(i, "status entries must be strings");
        record.measurement.reasons.push_back(
            reason_from_string(reason.get<std::string>(), i));
      }
    }
    record.measurement.pass = record.measurement.reasons.empty();

    try {
      repo.append(std::move(record));
    } catch (const RepositoryError& e) {
      malformed(i, e.what());
    }
  }
  return repo;
}

void save_repository(const Repository& repo, const std::string& path) {
  const std::string temp = path + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw RepositoryError(RepositoryError::Kind::Io,
                            "cannot open \"" + temp + "\" for writing");
    }
    out << to_document(repo);
    if (!out) {
      throw RepositoryError(RepositoryError::Kind::Io,
                            "write to \"" + temp + "\" failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    throw RepositoryError(RepositoryError::Kind::Io,
                          "rename to \"" + path + "\" failed: " + ec.message());
  }
}

Repository load_repository(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw RepositoryError(RepositoryError::Kind::Io,
                          "cannot open \"" + path + "\"");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_document(buffer.str());
}

}  // namespace automcu::repo

namespace automcu {

using nlohmann::ordered_json;

ordered_json spec_to_json(const arch::ArchitectureSpec& spec) {
  ordered_json backbone = ordered_json::object();
  for (std::size_t i = 0; i < spec.backbone.size(); ++i) {
    const auto& layer = spec.backbone[i];
    ordered_json node = ordered_json::object();
    node["type"] = std::string(arch::to_string(layer.kind));
    for (const auto& [key, value] : layer.params) {
      if (std::holds_alternative<bool>(value)) {
        node[key] = std::get<bool>(value);
      } else {
        node[key] = std::get<std::int64_t>(value);
      }
    }
    backbone["layer_" + std::to_string(i + 1)] = std::move(node);
  }
  ordered_json doc = ordered_json::object();
  doc["backbone"] = std::move(backbone);
  doc["head"] = ordered_json{{"type", "classifier"},
                             {"num_classes", spec.head.num_classes}};
  return doc;
}

arch::ArchitectureSpec spec_from_json(const nlohmann::json& node) {
  return arch::parse_spec(node.dump());
}

ordered_json record_metrics_json(const repo::Record& record) {
  ordered_json metrics = ordered_json::object();
  if (record.performance) {
    metrics["model_acc"] = record.performance->accuracy_percent;
  } else {
    metrics["model_acc"] = nullptr;
  }
  metrics["model_ram_KB"] = backend::kb_from_bytes(record.measurement.ram_bytes);
  metrics["model_flash_KB"] =
      backend::kb_from_bytes(record.measurement.flash_bytes);
  if (record.performance) {
    metrics["converged"] = record.performance->converged;
    metrics["epochs_run"] = record.performance->epochs_run;
    if (record.performance->checkpoint_path) {
      metrics["checkpoint_path"] = *record.performance->checkpoint_path;
    }
  }
  return metrics;
}

ordered_json record_to_json(const repo::Record& record) {
  ordered_json node = ordered_json::object();
  node["model_id"] = record.model_id;
  node["architecture_spec"] = spec_to_json(record.spec);
  node["metrics"] = record_metrics_json(record);
  if (!record.measurement.pass) {
    node["status"] = record.measurement.reason_strings();
  }
  return node;
}

ordered_json summary_to_json(const repo::ContextSummary& summary) {
  auto entry_json = [](const repo::ContextEntry& e) {
    ordered_json node = ordered_json::object();
    node["model_id"] = e.model_id;
    node["layers"] = e.layers_digest;
    if (e.accuracy_percent) {
      node["accuracy"] = *e.accuracy_percent;
    } else {
      node["accuracy"] = nullptr;
    }
    if (!e.fail_reasons.empty()) node["reasons"] = e.fail_reasons;
    node["ram_kb"] = e.ram_kb;
    node["flash_kb"] = e.flash_kb;
    return node;
  };
  ordered_json doc = ordered_json::object();
  doc["no_history"] = summary.empty();
  ordered_json best = ordered_json::array();
  for (const auto& e : summary.best) best.push_back(entry_json(e));
  ordered_json failures = ordered_json::array();
  for (const auto& e : summary.recent_failures) failures.push_back(entry_json(e));
  doc["best"] = std::move(best);
  doc["recent_failures"] = std::move(failures);
  return doc;
}

}  // namespace automcu
