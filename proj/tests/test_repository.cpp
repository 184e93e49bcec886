// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "automcu/json_io.hpp"
#include "automcu/repository.hpp"
#include "oracles.hpp"

using namespace automcu;
using namespace automcu::repo;

namespace {

const std::string kGoldenRepo = test_oracle::read_file(
    test_oracle::golden_path("historical_repository_example.json"));

arch::ArchitectureSpec make_spec(std::int64_t width) {
  arch::ArchitectureSpec spec;
  arch::LayerSpec pw;
  pw.kind = arch::ModuleKind::Pointwise;
  pw.params["in_channels"] = std::int64_t{3};
  pw.params["out_channels"] = width;
  pw.params["use_bn"] = true;
  spec.backbone.push_back(pw);
  spec.head.num_classes = 10;
  return spec;
}

backend::Measurement pass_m(std::int64_t ram, std::int64_t flash) {
  backend::Measurement m;
  m.ram_bytes = ram;
  m.flash_bytes = flash;
  m.pass = true;
  return m;
}

backend::Measurement fail_m(backend::FailReason::Kind kind,
                            const std::string& detail = "") {
  backend::Measurement m;
  m.pass = false;
  m.reasons.push_back(backend::FailReason{kind, detail});
  return m;
}

EvalResult acc(double value) {
  EvalResult r;
  r.accuracy_percent = value;
  r.converged = true;
  r.epochs_run = 10;
  return r;
}

}  // namespace

TEST_CASE("published repository document loads with full fidelity") {
  const auto repository = from_document(kGoldenRepo);
  REQUIRE(repository.size() == 1);
  const auto* rec = repository.find("model_001");
  REQUIRE(rec != nullptr);
  CHECK(rec->spec.backbone.size() == 8);
  CHECK(rec->spec.backbone[3].kind == arch::ModuleKind::Ghost);
  CHECK(rec->spec.head.num_classes == 10);
  REQUIRE(rec->performance.has_value());
  CHECK(rec->performance->accuracy_percent == doctest::Approx(77.53));
  CHECK(rec->measurement.pass);  // no status array means deployable
  CHECK(rec->measurement.ram_bytes == 45169);    // 44.11 KB
  CHECK(rec->measurement.flash_bytes == 65956);  // 64.41 KB

  // Sequential ids from other tools are preserved verbatim.
  CHECK(rec->model_id == "model_001");
}

TEST_CASE("serialization is an identity on its own output") {
  const auto repository = from_document(kGoldenRepo);
  const auto doc1 = to_document(repository);
  const auto doc2 = to_document(from_document(doc1));
  CHECK(doc1 == doc2);

  // The rendered metrics keep the published 2-decimal values.
  const auto parsed = nlohmann::ordered_json::parse(doc1);
  REQUIRE(parsed.is_array());
  CHECK(parsed[0]["metrics"]["model_acc"].get<double>() ==
        doctest::Approx(77.53));
  CHECK(parsed[0]["metrics"]["model_ram_KB"].get<double>() ==
        doctest::Approx(44.11));
  CHECK(parsed[0]["metrics"]["model_flash_KB"].get<double>() ==
        doctest::Approx(64.41));
  // Field order matches the published listing.
  auto it = parsed[0].begin();
  CHECK(it.key() == "model_id");
  CHECK((++it).key() == "architecture_spec");
  CHECK((++it).key() == "metrics");
}

TEST_CASE("make_record derives the id from canonical content") {
  const auto spec = make_spec(8);
  auto rec = make_record(spec, acc(50.0), pass_m(1000, 2000));
  CHECK(rec.model_id == arch::spec_id(spec));

  Repository repository;
  repository.append(rec);
  CHECK(repository.size() == 1);
  try {
    repository.append(rec);
    FAIL("expected DuplicateId");
  } catch (const RepositoryError& e) {
    CHECK(e.kind() == RepositoryError::Kind::DuplicateId);
  }
}

TEST_CASE("best_feasible ranks by accuracy, then RAM, then Flash, then age") {
  Repository repository;
  repository.append(make_record(make_spec(4), acc(70.0), pass_m(500, 500)));
  repository.append(make_record(make_spec(6), acc(80.0), pass_m(900, 500)));
  // Higher accuracy but infeasible: never selected.
  repository.append(make_record(
      make_spec(8), acc(95.0),
      fail_m(backend::FailReason::Kind::RamOverBudget)));
  // Screened out before training: no performance, not eligible.
  repository.append(make_record(make_spec(12), std::nullopt, pass_m(1, 1)));

  auto best = repository.best_feasible();
  REQUIRE(best.has_value());
  CHECK(best->performance->accuracy_percent == doctest::Approx(80.0));

  // Tie on accuracy: lower RAM wins.
  repository.append(make_record(make_spec(16), acc(80.0), pass_m(800, 999)));
  CHECK(repository.best_feasible()->measurement.ram_bytes == 800);

  // Tie on accuracy and RAM: lower Flash wins.
  repository.append(make_record(make_spec(24), acc(80.0), pass_m(800, 400)));
  CHECK(repository.best_feasible()->measurement.flash_bytes == 400);

  // Full tie: the earlier record is kept.
  const auto winner = repository.best_feasible()->model_id;
  repository.append(make_record(make_spec(32), acc(80.0), pass_m(800, 400)));
  CHECK(repository.best_feasible()->model_id == winner);

  CHECK(!Repository{}.best_feasible().has_value());
}

TEST_CASE("select_context keeps k best and k most recent failures") {
  Repository repository;
  repository.append(make_record(make_spec(4), acc(60.0), pass_m(100, 100)));
  repository.append(make_record(
      make_spec(6), std::nullopt,
      fail_m(backend::FailReason::Kind::RamOverBudget)));
  repository.append(make_record(make_spec(8), acc(75.0), pass_m(200, 200)));
  repository.append(make_record(
      make_spec(12), std::nullopt,
      fail_m(backend::FailReason::Kind::FlashOverBudget)));
  repository.append(make_record(make_spec(16), acc(70.0), pass_m(300, 300)));
  repository.append(make_record(
      make_spec(24), std::nullopt,
      fail_m(backend::FailReason::Kind::NotConstructible, "bad dims")));

  const auto summary = repository.select_context(2, 2);
  REQUIRE(summary.best.size() == 2);
  CHECK(summary.best[0].accuracy_percent == doctest::Approx(75.0));
  CHECK(summary.best[1].accuracy_percent == doctest::Approx(70.0));

  REQUIRE(summary.recent_failures.size() == 2);
  CHECK(summary.recent_failures[0].fail_reasons ==
        std::vector<std::string>{"NotConstructible(bad dims)"});
  CHECK(summary.recent_failures[1].fail_reasons ==
        std::vector<std::string>{"FlashOverBudget"});

  // Asking for more than exists returns everything.
  const auto all = repository.select_context(10, 10);
  CHECK(all.best.size() == 3);
  CHECK(all.recent_failures.size() == 3);
}

TEST_CASE("context summary renders deterministic prompt text") {
  CHECK(ContextSummary{}.empty());
  CHECK(ContextSummary{}.to_text() == "No history yet.\n");

  const auto repository = from_document(kGoldenRepo);
  const auto summary = repository.select_context(5, 3);
  REQUIRE(summary.best.size() == 1);
  CHECK(summary.best[0].layers_digest ==
        "conv:3->8, depthwise:8->8, downsample:8->16, ghost:16->16, "
        "bottleneck:16->16, downsample:16->32, pointwise:32->32, "
        "ghost:32->32");

  const auto text = summary.to_text();
  CHECK(text.find("Top candidates:") != std::string::npos);
  CHECK(text.find("model_001: acc=77.53, ram_kb=44.11, flash_kb=64.41") !=
        std::string::npos);
  CHECK(text.find("ghost:16->16") != std::string::npos);
  CHECK(text == repository.select_context(5, 3).to_text());  // stable

  // Failure section renders reasons.
  Repository with_fail = from_document(kGoldenRepo);
  with_fail.append(make_record(
      make_spec(6), std::nullopt,
      fail_m(backend::FailReason::Kind::RamOverBudget)));
  const auto fail_text = with_fail.select_context(5, 3).to_text();
  CHECK(fail_text.find("Recent failures:") != std::string::npos);
  CHECK(fail_text.find("reasons=[RamOverBudget]") != std::string::npos);
}

TEST_CASE("records without performance serialize with null accuracy") {
  Repository repository;
  repository.append(make_record(
      make_spec(6), std::nullopt,
      fail_m(backend::FailReason::Kind::UnsupportedOperator, "concat")));
  const auto doc = to_document(repository);
  const auto parsed = nlohmann::json::parse(doc);
  CHECK(parsed[0]["metrics"]["model_acc"].is_null());
  REQUIRE(parsed[0].contains("status"));
  CHECK(parsed[0]["status"][0].get<std::string>() ==
        "UnsupportedOperator(concat)");

  const auto reloaded = from_document(doc);
  REQUIRE(reloaded.size() == 1);
  CHECK(!reloaded.records()[0].performance.has_value());
  CHECK(!reloaded.records()[0].measurement.pass);
  CHECK(reloaded.records()[0].measurement.reasons[0].kind ==
        backend::FailReason::Kind::UnsupportedOperator);
}

TEST_CASE("training provenance fields survive the round trip") {
  EvalResult result;
  result.accuracy_percent = 61.25;
  result.converged = false;
  result.epochs_run = 30;
  result.checkpoint_path = "ckpt/a.bin";

  Repository repository;
  repository.append(make_record(make_spec(8), result, pass_m(4096, 8192)));
  const auto reloaded = from_document(to_document(repository));
  const auto& rec = reloaded.records()[0];
  REQUIRE(rec.performance.has_value());
  CHECK(rec.performance->converged == false);
  CHECK(rec.performance->epochs_run == 30);
  REQUIRE(rec.performance->checkpoint_path.has_value());
  CHECK(*rec.performance->checkpoint_path == "ckpt/a.bin");
}

TEST_CASE("malformed documents are rejected with entry context") {
  auto kind_of = [](const std::string& text) -> RepositoryError::Kind {
    try {
      (void)from_document(text);
    } catch (const RepositoryError& e) {
      return e.kind();
    }
    throw std::logic_error("expected RepositoryError");
  };

  CHECK(kind_of("{}") == RepositoryError::Kind::Malformed);
  CHECK(kind_of("not json") == RepositoryError::Kind::Malformed);
  CHECK(kind_of("[1]") == RepositoryError::Kind::Malformed);
  CHECK(kind_of(R"([{"architecture_spec":{},"metrics":{}}])") ==
        RepositoryError::Kind::Malformed);  // no model_id

  // Spec errors are wrapped with the entry index.
  try {
    (void)from_document(
        R"([{"model_id":"m","architecture_spec":{"backbone":{}},"metrics":{"model_acc":null,"model_ram_KB":1,"model_flash_KB":1}}])");
    FAIL("expected RepositoryError");
  } catch (const RepositoryError& e) {
    CHECK(e.kind() == RepositoryError::Kind::Malformed);
    CHECK(std::string(e.what()).find("entry 0") != std::string::npos);
  }

  // metrics must carry all three keys; accuracy must stay in range.
  nlohmann::json base = nlohmann::json::parse(kGoldenRepo);
  auto missing = base;
  missing[0]["metrics"].erase("model_acc");
  CHECK(kind_of(missing.dump()) == RepositoryError::Kind::Malformed);
  auto range = base;
  range[0]["metrics"]["model_acc"] = 101.0;
  CHECK(kind_of(range.dump()) == RepositoryError::Kind::Malformed);
  auto types = base;
  types[0]["metrics"]["model_ram_KB"] = "44.11";
  CHECK(kind_of(types.dump()) == RepositoryError::Kind::Malformed);

  // Unknown status strings cannot round-trip, so they are rejected.
  auto status = base;
  status[0]["status"] = {"Exploded"};
  CHECK(kind_of(status.dump()) == RepositoryError::Kind::Malformed);

  // Duplicate ids within one document.
  auto dup = base;
  dup.push_back(base[0]);
  CHECK(kind_of(dup.dump()) == RepositoryError::Kind::Malformed);
}

TEST_CASE("save and load repositories on disk") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = (dir / "automcu_test_repo.json").string();
  std::filesystem::remove(path);

  auto repository = from_document(kGoldenRepo);
  repository.append(make_record(make_spec(8), acc(50.5), pass_m(1024, 2048)));
  save_repository(repository, path);
  CHECK(std::filesystem::exists(path));
  CHECK(!std::filesystem::exists(path + ".tmp"));  // rename completed

  const auto reloaded = load_repository(path);
  CHECK(reloaded.size() == 2);
  CHECK(to_document(reloaded) == to_document(repository));
  std::filesystem::remove(path);

  try {
    (void)load_repository((dir / "automcu_missing_repo.json").string());
    FAIL("expected RepositoryError");
  } catch (const RepositoryError& e) {
    CHECK(e.kind() == RepositoryError::Kind::Io);
  }
}
