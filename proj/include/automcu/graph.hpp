// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Primitive-op graph: block-level specs lower to a small closed set of
// inference ops, then shapes, parameter counts, and MAC counts are computed
// on the lowered form. Ops are stored in execution order; tensor ids are
// dense and assigned in creation order.

#ifndef AUTOMCU_GRAPH_HPP
#define AUTOMCU_GRAPH_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "automcu/arch_spec.hpp"

namespace automcu::graph {

enum class OpKind {
  Conv2d,
  DepthwiseConv2d,
  BatchNorm,
  Relu,
  Add,
  Concat,
  GlobalAvgPool,
  FullyConnected,
};

std::string_view to_string(OpKind kind);

struct TensorShape {
  enum class Rank { FeatureMap, Vector };

  Rank rank{Rank::FeatureMap};
  std::int64_t channels{0};
  std::int64_t height{1};
  std::int64_t width{1};

  static TensorShape feature_map(std::int64_t c, std::int64_t h, std::int64_t w) {
    return TensorShape{Rank::FeatureMap, c, h, w};
  }
  static TensorShape vector(std::int64_t length) {
    return TensorShape{Rank::Vector, length, 1, 1};
  }

  std::int64_t elements() const {
    return rank == Rank::Vector ? channels : channels * height * width;
  }

  std::string to_string() const;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

using TensorId = int;

struct PrimitiveOp {
  OpKind kind{OpKind::Conv2d};
  std::int64_t in_channels{0};
  std::int64_t out_channels{0};
  std::int64_t kernel{0};
  std::int64_t stride{1};
  std::int64_t padding{0};
  bool has_bias{false};
  // Concat only: cap the concatenated channel count (ghost blocks produce a
  // few extra cheap channels that are dropped).
  std::int64_t concat_trunc{0};
  std::vector<TensorId> inputs;
  TensorId output{-1};
};

struct ModelGraph {
  std::vector<PrimitiveOp> ops;  // execution order
  // Filled by infer_shapes; keyed by tensor id. Empty until then.
  std::map<TensorId, TensorShape> tensors;
  TensorId input_id{0};
  TensorId output_id{-1};
  // Originating backbone layer per op (1-based); 0 for head ops.
  std::vector<int> op_layer;

  bool shaped() const { return !tensors.empty(); }
};

// Shape inference failure: carries the offending op index.
class DimensionError : public std::runtime_error {
 public:
  DimensionError(int op_index, const std::string& message)
      : std::runtime_error(message), op_index_(op_index) {}
  int op_index() const { return op_index_; }

 private:
  int op_index_;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lowers a schema-valid architecture to primitive ops. Throws
// arch::SpecError with IssueCode::InvalidSpec on schema violations.
ModelGraph expand_blocks(const arch::ArchitectureSpec& spec);

// Propagates shapes from the graph input through every op. Throws
// DimensionError on channel mismatches or non-positive spatial extents.
ModelGraph infer_shapes(ModelGraph graph, const TensorShape& input);

struct ParamCounts {
  std::int64_t weights{0};
  std::int64_t biases{0};
  std::int64_t bn_params{0};  // two per normalized channel

  std::int64_t total() const { return weights + biases + bn_params; }

  friend bool operator==(const ParamCounts&, const ParamCounts&) = default;
};

// Both require a shaped graph and throw GraphError otherwise.
ParamCounts count_params(const ModelGraph& shaped);
std::int64_t count_macs(const ModelGraph& shaped);

}  // namespace automcu::graph

#endif  // AUTOMCU_GRAPH_HPP
