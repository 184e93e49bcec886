// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cctype>

#include "automcu/arch_spec.hpp"
#include "oracles.hpp"

using namespace automcu::arch;

namespace {

const std::string kCandidate =
    test_oracle::read_file(test_oracle::golden_path(
        "candidate_architecture_example.json"));

IssueCode parse_error_code(const std::string& text) {
  try {
    parse_spec(text);
  } catch (const SpecError& e) {
    return e.code();
  }
  FAIL("expected SpecError for: ", text);
  return IssueCode::MalformedDocument;
}

}  // namespace

TEST_CASE("published candidate document parses into the typed form") {
  const auto spec = parse_spec(kCandidate);
  REQUIRE(spec.backbone.size() == 6);
  CHECK(spec.backbone[0].kind == ModuleKind::Conv);
  CHECK(spec.backbone[1].kind == ModuleKind::Depthwise);
  CHECK(spec.backbone[2].kind == ModuleKind::Downsample);
  CHECK(spec.backbone[3].kind == ModuleKind::Depthwise);
  CHECK(spec.backbone[4].kind == ModuleKind::Downsample);
  CHECK(spec.backbone[5].kind == ModuleKind::Pointwise);

  CHECK(spec.backbone[0].int_param("in_channels") == 3);
  CHECK(spec.backbone[0].int_param("out_channels") == 6);
  CHECK(spec.backbone[0].int_param("kernel_size") == 3);
  CHECK(spec.backbone[0].bool_param("use_bn"));
  CHECK(spec.backbone[2].int_param("in_channels") == 6);
  CHECK(spec.backbone[2].int_param("out_channels") == 12);
  CHECK(spec.backbone[5].bool_param("use_bn"));
  CHECK(spec.head.num_classes == 10);

  CHECK(validate_schema(spec).valid);
}

TEST_CASE("canonical form is stable under key reordering and whitespace") {
  const auto spec = parse_spec(kCandidate);
  const auto canonical = canonicalize(spec);

  // Same content, scrambled key order and formatting.
  const std::string reordered = R"({
    "head": {"num_classes": 10, "type": "classifier"},
    "backbone": {
      "layer_3": {"out_channels":12, "type":"downsample", "in_channels":6},
      "layer_1": {"use_bn":true, "padding":1, "type":"conv", "stride":1,
                  "kernel_size":3, "out_channels":6, "in_channels":3},
      "layer_2": {"type":"depthwise", "in_channels":6, "out_channels":6,
                  "kernel_size":3, "stride":1, "padding":1},
      "layer_6": {"in_channels":24, "use_bn":true, "out_channels":24,
                  "type":"pointwise"},
      "layer_4": {"type":"depthwise", "in_channels":12, "out_channels":12,
                  "kernel_size":3, "stride":1, "padding":1},
      "layer_5": {"type":"downsample", "in_channels":12, "out_channels":24}
    }
  })";
  const auto respec = parse_spec(reordered);
  CHECK(respec == spec);
  CHECK(canonicalize(respec) == canonical);
  CHECK(spec_id(respec) == spec_id(spec));

  // Canonical text itself round-trips to identical bytes.
  CHECK(canonicalize(parse_spec(canonical)) == canonical);

  // Compact, ordered: type leads each layer, params follow alphabetically.
  CHECK(canonical.find('\n') == std::string::npos);
  CHECK(canonical.find(' ') == std::string::npos);
  CHECK(canonical.find("\"backbone\"") < canonical.find("\"head\""));
  CHECK(canonical.find("{\"type\":\"conv\",\"in_channels\":3") !=
        std::string::npos);
}

TEST_CASE("model ids are stable, well-formed, and content-derived") {
  const auto spec = parse_spec(kCandidate);
  const auto id = spec_id(spec);
  REQUIRE(id.size() == 6 + 12);
  CHECK(id.substr(0, 6) == "model_");
  CHECK(std::all_of(id.begin() + 6, id.end(), [](unsigned char c) {
    return std::isxdigit(c) && !std::isupper(c);
  }));
  CHECK(spec_id(spec) == id);  // deterministic

  auto changed = spec;
  changed.backbone[5].params["out_channels"] = std::int64_t{32};
  CHECK(spec_id(changed) != id);
}

TEST_CASE("structural parse errors carry precise issue codes") {
  CHECK(parse_error_code("not json") == IssueCode::MalformedDocument);
  CHECK(parse_error_code("[1,2]") == IssueCode::MalformedDocument);
  CHECK(parse_error_code(R"({"head":{"type":"classifier","num_classes":10}})") ==
        IssueCode::MissingBackbone);
  CHECK(parse_error_code(R"({"backbone":{},"head":{"type":"classifier","num_classes":10}})") ==
        IssueCode::MissingBackbone);
  CHECK(parse_error_code(
            R"({"backbone":{"layer_1":{"type":"pointwise","in_channels":3,"out_channels":4,"use_bn":true}}})") ==
        IssueCode::MissingHead);

  // Extra top-level keys are rejected.
  CHECK(parse_error_code(
            R"({"backbone":{"layer_1":{"type":"pointwise","in_channels":3,"out_channels":4,"use_bn":true}},"head":{"type":"classifier","num_classes":10},"notes":1})") ==
        IssueCode::MalformedDocument);
}

TEST_CASE("layer keys must be exactly layer_<n>, contiguous from 1") {
  const std::string head = R"("head":{"type":"classifier","num_classes":10})";
  const std::string pw =
      R"({"type":"pointwise","in_channels":3,"out_channels":4,"use_bn":true})";

  CHECK(parse_error_code("{\"backbone\":{\"layer_1\":" + pw +
                         ",\"layer_3\":" + pw + "}," + head + "}") ==
        IssueCode::NonContiguousLayers);
  CHECK(parse_error_code("{\"backbone\":{\"layer_2\":" + pw + "}," + head +
                         "}") == IssueCode::NonContiguousLayers);
  CHECK(parse_error_code("{\"backbone\":{\"layer_01\":" + pw + "}," + head +
                         "}") == IssueCode::MalformedDocument);
  CHECK(parse_error_code("{\"backbone\":{\"layer_x\":" + pw + "}," + head +
                         "}") == IssueCode::MalformedDocument);
  CHECK(parse_error_code("{\"backbone\":{\"block_1\":" + pw + "}," + head +
                         "}") == IssueCode::MalformedDocument);
  CHECK(parse_error_code("{\"backbone\":{\"layer_0\":" + pw + "}," + head +
                         "}") == IssueCode::MalformedDocument);

  // Textually duplicated layer keys are caught before the tree merges them.
  CHECK(parse_error_code("{\"backbone\":{\"layer_1\":" + pw +
                         ",\"layer_1\":" + pw + "}," + head + "}") ==
        IssueCode::DuplicateLayerIndex);
}

TEST_CASE("module kinds and parameter sets are a closed vocabulary") {
  const std::string head = R"("head":{"type":"classifier","num_classes":10})";

  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"transformer\",\"in_channels\":3,\"out_channels\":4}}," +
            head + "}") == IssueCode::UnsupportedModuleKind);
  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"classifier\",\"num_classes\":10}}," +
            head + "}") == IssueCode::UnsupportedModuleKind);

  // Missing / unknown / mistyped parameters.
  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"conv\",\"in_channels\":3,\"out_channels\":4,\"kernel_size\":3,\"stride\":1,\"use_bn\":true}}," +
            head + "}") == IssueCode::MissingParam);  // no padding
  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"downsample\",\"in_channels\":3,\"out_channels\":4,\"stride\":2}}," +
            head + "}") == IssueCode::UnknownParam);
  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"downsample\",\"in_channels\":\"3\",\"out_channels\":4}}," +
            head + "}") == IssueCode::BadParamValue);
  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"downsample\",\"in_channels\":3.5,\"out_channels\":4}}," +
            head + "}") == IssueCode::BadParamValue);
  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"downsample\",\"in_channels\":0,\"out_channels\":4}}," +
            head + "}") == IssueCode::BadParamValue);
  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"conv\",\"in_channels\":3,\"out_channels\":4,\"kernel_size\":3,\"stride\":1,\"padding\":-1,\"use_bn\":true}}," +
            head + "}") == IssueCode::BadParamValue);
  CHECK(parse_error_code(
            "{\"backbone\":{\"layer_1\":{\"type\":\"conv\",\"in_channels\":3,\"out_channels\":4,\"kernel_size\":3,\"stride\":1,\"padding\":1,\"use_bn\":1}}," +
            head + "}") == IssueCode::BadParamValue);

  // padding 0 is legal.
  const auto ok = parse_spec(
      "{\"backbone\":{\"layer_1\":{\"type\":\"conv\",\"in_channels\":3,\"out_channels\":4,\"kernel_size\":3,\"stride\":1,\"padding\":0,\"use_bn\":false}}," +
      head + "}");
  CHECK(ok.backbone[0].int_param("padding") == 0);
}

TEST_CASE("head validation") {
  const std::string bb =
      R"("backbone":{"layer_1":{"type":"pointwise","in_channels":3,"out_channels":4,"use_bn":true}})";
  CHECK(parse_error_code("{" + bb + ",\"head\":{\"type\":\"mlp\",\"num_classes\":10}}") ==
        IssueCode::BadHead);
  CHECK(parse_error_code("{" + bb + ",\"head\":{\"type\":\"classifier\"}}") ==
        IssueCode::MissingParam);
  CHECK(parse_error_code("{" + bb +
                         ",\"head\":{\"type\":\"classifier\",\"num_classes\":0}}") ==
        IssueCode::BadParamValue);
  CHECK(parse_error_code("{" + bb +
                         ",\"head\":{\"type\":\"classifier\",\"num_classes\":10,\"dropout\":0}}") ==
        IssueCode::UnknownParam);

  // A single-class head parses (it is structurally sound) but is not a
  // valid classification target.
  const auto spec =
      parse_spec("{" + bb + ",\"head\":{\"type\":\"classifier\",\"num_classes\":1}}");
  const auto report = validate_schema(spec);
  CHECK(!report.valid);
  REQUIRE(report.issues.size() == 1);
  CHECK(report.issues[0].code == IssueCode::BadHead);
  CHECK(report.issues[0].layer_index == 0);
}

TEST_CASE("validation re-checks programmatically built specs") {
  auto spec = parse_spec(kCandidate);
  REQUIRE(validate_schema(spec).valid);

  SUBCASE("depthwise must preserve channel count") {
    spec.backbone[1].params["out_channels"] = std::int64_t{12};
    const auto report = validate_schema(spec);
    CHECK(!report.valid);
    REQUIRE(!report.issues.empty());
    CHECK(report.issues[0].code == IssueCode::DepthwiseChannelMismatch);
    CHECK(report.issues[0].layer_index == 2);
  }
  SUBCASE("missing parameter") {
    spec.backbone[0].params.erase("stride");
    const auto report = validate_schema(spec);
    CHECK(!report.valid);
    CHECK(report.issues[0].code == IssueCode::MissingParam);
    CHECK(report.issues[0].layer_index == 1);
  }
  SUBCASE("unknown parameter") {
    spec.backbone[3].params["dilation"] = std::int64_t{2};
    const auto report = validate_schema(spec);
    CHECK(!report.valid);
    CHECK(report.issues[0].code == IssueCode::UnknownParam);
    CHECK(report.issues[0].layer_index == 4);
  }
  SUBCASE("wrong value kind") {
    spec.backbone[0].params["use_bn"] = std::int64_t{1};
    const auto report = validate_schema(spec);
    CHECK(!report.valid);
    CHECK(report.issues[0].code == IssueCode::BadParamValue);
  }
  SUBCASE("empty backbone") {
    spec.backbone.clear();
    const auto report = validate_schema(spec);
    CHECK(!report.valid);
    CHECK(report.issues[0].code == IssueCode::MissingBackbone);
  }
  SUBCASE("multiple issues are all reported") {
    spec.backbone[1].params["out_channels"] = std::int64_t{12};
    spec.head.num_classes = 1;
    const auto report = validate_schema(spec);
    CHECK(report.issues.size() == 2);
  }
}

TEST_CASE("canonicalize refuses invalid specs") {
  auto spec = parse_spec(kCandidate);
  spec.backbone[1].params["out_channels"] = std::int64_t{999};
  spec.backbone[1].params.erase("kernel_size");
  CHECK_THROWS_AS((void)canonicalize(spec), SpecError);
  try {
    (void)canonicalize(spec);
  } catch (const SpecError& e) {
    CHECK(e.code() == IssueCode::InvalidSpec);
  }
}
