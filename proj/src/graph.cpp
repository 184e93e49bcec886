// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#include "automcu/graph.hpp"

#include <sstream>

namespace automcu::graph {
namespace {

// Incremental graph assembly with dense tensor ids.
class Builder {
 public:
  explicit Builder(TensorId input) : next_id_(input + 1) {
    graph_.input_id = input;
    graph_.output_id = input;
  }

  TensorId emit(PrimitiveOp op, int layer) {
    op.output = next_id_++;
    graph_.output_id = op.output;
    graph_.ops.push_back(std::move(op));
    graph_.op_layer.push_back(layer);
    return graph_.output_id;
  }

  TensorId conv(TensorId in, std::int64_t cin, std::int64_t cout,
                std::int64_t k, std::int64_t s, std::int64_t p, bool bias,
                int layer) {
    PrimitiveOp op;
    op.kind = OpKind::Conv2d;
    op.in_channels = cin;
    op.out_channels = cout;
    op.kernel = k;
    op.stride = s;
    op.padding = p;
    op.has_bias = bias;
    op.inputs = {in};
    return emit(std::move(op), layer);
  }

  TensorId depthwise(TensorId in, std::int64_t c, std::int64_t k,
                     std::int64_t s, std::int64_t p, int layer) {
    PrimitiveOp op;
    op.kind = OpKind::DepthwiseConv2d;
    op.in_channels = c;
    op.out_channels = c;
    op.kernel = k;
    op.stride = s;
    op.padding = p;
    op.inputs = {in};
    return emit(std::move(op), layer);
  }

  TensorId batch_norm(TensorId in, std::int64_t c, int layer) {
    PrimitiveOp op;
    op.kind = OpKind::BatchNorm;
    op.in_channels = c;
    op.out_channels = c;
    op.inputs = {in};
    return emit(std::move(op), layer);
  }

  TensorId relu(TensorId in, std::int64_t c, int layer) {
    PrimitiveOp op;
    op.kind = OpKind::Relu;
    op.in_channels = c;
    op.out_channels = c;
    op.inputs = {in};
    return emit(std::move(op), layer);
  }

  ModelGraph take() { return std::move(graph_); }

 private:
  ModelGraph graph_;
  TensorId next_id_;
};

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

[[noreturn]] void dimension_fail(int op_index, const PrimitiveOp& op,
                                 const std::string& detail) {
  std::ostringstream msg;
  msg << "op " << op_index << " (" << to_string(op.kind) << "): " << detail;
  throw DimensionError(op_index, msg.str());
}

std::int64_t conv_extent(std::int64_t in, std::int64_t k, std::int64_t s,
                         std::int64_t p) {
  return (in + 2 * p - k) / s + 1;  // floor division; all terms validated > 0
}

const TensorShape& input_shape(const ModelGraph& g, const PrimitiveOp& op,
                               int op_index, std::size_t slot) {
  auto it = g.tensors.find(op.inputs[slot]);
  if (it == g.tensors.end()) {
    dimension_fail(op_index, op, "input tensor has no shape (bad topology)");
  }
  return it->second;
}

void require_shaped(const ModelGraph& g, const char* what) {
  if (!g.shaped()) {
    throw GraphError(std::string(what) + " requires a shaped graph");
  }
}

}  // namespace

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Conv2d: return "conv2d";
    case OpKind::DepthwiseConv2d: return "depthwise_conv2d";
    case OpKind::BatchNorm: return "batch_norm";
    case OpKind::Relu: return "relu";
    case OpKind::Add: return "add";
    case OpKind::Concat: return "concat";
    case OpKind::GlobalAvgPool: return "global_avg_pool";
    case OpKind::FullyConnected: return "fully_connected";
  }
  return "?";
}

std::string TensorShape::to_string() const {
  std::ostringstream out;
  if (rank == Rank::Vector) {
    out << "[" << channels << "]";
  } else {
    out << channels << "x" << height << "x" << width;
  }
  return out.str();
}

ModelGraph expand_blocks(const arch::ArchitectureSpec& spec) {
  const auto report = arch::validate_schema(spec);
  if (!report.valid) {
    throw arch::SpecError(arch::IssueCode::InvalidSpec,
                          "cannot lower an invalid spec: " +
                              report.issues.front().message);
  }

  Builder b(0);
  TensorId cur = 0;

  for (std::size_t i = 0; i < spec.backbone.size(); ++i) {
    const auto& layer = spec.backbone[i];
    const int idx = static_cast<int>(i) + 1;
    const std::int64_t cin = layer.in_channels();
    const std::int64_t cout = layer.out_channels();

    switch (layer.kind) {
      case arch::ModuleKind::Conv: {
        const bool bn = layer.bool_param("use_bn");
        cur = b.conv(cur, cin, cout, layer.int_param("kernel_size"),
                     layer.int_param("stride"), layer.int_param("padding"),
                     /*bias=*/!bn, idx);
        if (bn) cur = b.batch_norm(cur, cout, idx);
        cur = b.relu(cur, cout, idx);
        break;
      }
      case arch::ModuleKind::Depthwise: {
        cur = b.depthwise(cur, cout, layer.int_param("kernel_size"),
                          layer.int_param("stride"), layer.int_param("padding"),
                          idx);
        cur = b.batch_norm(cur, cout, idx);
        cur = b.relu(cur, cout, idx);
        break;
      }
      case arch::ModuleKind::Downsample: {
        cur = b.conv(cur, cin, cout, 3, 2, 1, /*bias=*/false, idx);
        cur = b.batch_norm(cur, cout, idx);
        cur = b.relu(cur, cout, idx);
        break;
      }
      case arch::ModuleKind::Pointwise: {
        const bool bn = layer.bool_param("use_bn");
        cur = b.conv(cur, cin, cout, 1, 1, 0, /*bias=*/!bn, idx);
        if (bn) cur = b.batch_norm(cur, cout, idx);
        cur = b.relu(cur, cout, idx);
        break;
      }
      case arch::ModuleKind::Ghost: {
        // Primary conv makes ceil(Cout/ratio) channels; a cheap depthwise
        // branch doubles them; concat drops any surplus beyond Cout.
        const std::int64_t k = layer.int_param("kernel_size");
        const std::int64_t dw = layer.int_param("dw_size");
        const std::int64_t cp = ceil_div(cout, layer.int_param("ratio"));
        TensorId primary = b.conv(cur, cin, cp, k, 1, k / 2, /*bias=*/false, idx);
        primary = b.batch_norm(primary, cp, idx);
        primary = b.relu(primary, cp, idx);
        TensorId cheap = b.depthwise(primary, cp, dw, 1, dw / 2, idx);
        cheap = b.batch_norm(cheap, cp, idx);
        cheap = b.relu(cheap, cp, idx);
        PrimitiveOp cat;
        cat.kind = OpKind::Concat;
        cat.in_channels = cp;
        cat.out_channels = cout;
        cat.concat_trunc = cout;
        cat.inputs = {primary, cheap};
        cur = b.emit(std::move(cat), idx);
        break;
      }
      case arch::ModuleKind::Bottleneck: {
        const std::int64_t expansion = layer.int_param("expansion");
        const std::int64_t mid = cin * expansion;
        const TensorId block_in = cur;
        if (expansion != 1) {
          cur = b.conv(cur, cin, mid, 1, 1, 0, /*bias=*/false, idx);
          cur = b.batch_norm(cur, mid, idx);
          cur = b.relu(cur, mid, idx);
        }
        cur = b.depthwise(cur, mid, 3, 1, 1, idx);
        cur = b.batch_norm(cur, mid, idx);
        cur = b.relu(cur, mid, idx);
        cur = b.conv(cur, mid, cout, 1, 1, 0, /*bias=*/false, idx);
        cur = b.batch_norm(cur, cout, idx);  // linear projection: no relu
        if (cin == cout) {
          PrimitiveOp add;
          add.kind = OpKind::Add;
          add.in_channels = cout;
          add.out_channels = cout;
          add.inputs = {block_in, cur};
          cur = b.emit(std::move(add), idx);
        }
        break;
      }
      case arch::ModuleKind::Classifier:
        break;  // unreachable: validate_schema rejects classifier in backbone
    }
  }

  // Head: pooled features into a biased linear classifier; logits out.
  const std::int64_t feat = spec.backbone.back().out_channels();
  PrimitiveOp pool;
  pool.kind = OpKind::GlobalAvgPool;
  pool.in_channels = feat;
  pool.out_channels = feat;
  pool.inputs = {cur};
  cur = b.emit(std::move(pool), 0);

  PrimitiveOp fc;
  fc.kind = OpKind::FullyConnected;
  fc.in_channels = feat;
  fc.out_channels = spec.head.num_classes;
  fc.has_bias = true;
  fc.inputs = {cur};
  b.emit(std::move(fc), 0);

  return b.take();
}

ModelGraph infer_shapes(ModelGraph graph, const TensorShape& input) {
  graph.tensors.clear();
  if (input.rank != TensorShape::Rank::FeatureMap || input.channels < 1 ||
      input.height < 1 || input.width < 1) {
    throw DimensionError(-1, "graph input must be a CxHxW feature map with "
                             "positive extents, got " + input.to_string());
  }
  graph.tensors.emplace(graph.input_id, input);

  for (std::size_t i = 0; i < graph.ops.size(); ++i) {
    const auto& op = graph.ops[i];
    const int idx = static_cast<int>(i);
    TensorShape out;

    switch (op.kind) {
      case OpKind::Conv2d:
      case OpKind::DepthwiseConv2d: {
        const auto& in = input_shape(graph, op, idx, 0);
        if (in.rank != TensorShape::Rank::FeatureMap) {
          dimension_fail(idx, op, "expects a feature map, got " + in.to_string());
        }
        if (in.channels != op.in_channels) {
          dimension_fail(idx, op,
                         "expects " + std::to_string(op.in_channels) +
                             " input channels, got " + std::to_string(in.channels));
        }
        const std::int64_t h = conv_extent(in.height, op.kernel, op.stride, op.padding);
        const std::int64_t w = conv_extent(in.width, op.kernel, op.stride, op.padding);
        if (h < 1 || w < 1) {
          dimension_fail(idx, op,
                         "non-positive output extent " + std::to_string(h) + "x" +
                             std::to_string(w) + " from input " + in.to_string());
        }
        out = TensorShape::feature_map(op.out_channels, h, w);
        break;
      }
      case OpKind::BatchNorm:
      case OpKind::Relu: {
        const auto& in = input_shape(graph, op, idx, 0);
        if (in.channels != op.out_channels) {
          dimension_fail(idx, op,
                         "expects " + std::to_string(op.out_channels) +
                             " channels, got " + std::to_string(in.channels));
        }
        out = in;
        break;
      }
      case OpKind::Add: {
        const auto& a = input_shape(graph, op, idx, 0);
        const auto& b2 = input_shape(graph, op, idx, 1);
        if (!(a == b2)) {
          dimension_fail(idx, op, "operand shapes differ: " + a.to_string() +
                                      " vs " + b2.to_string());
        }
        out = a;
        break;
      }
      case OpKind::Concat: {
        const auto& a = input_shape(graph, op, idx, 0);
        const auto& b2 = input_shape(graph, op, idx, 1);
        if (a.rank != TensorShape::Rank::FeatureMap ||
            b2.rank != TensorShape::Rank::FeatureMap ||
            a.height != b2.height || a.width != b2.width) {
          dimension_fail(idx, op, "spatial extents differ: " + a.to_string() +
                                      " vs " + b2.to_string());
        }
        const std::int64_t sum = a.channels + b2.channels;
        std::int64_t c = sum;
        if (op.concat_trunc > 0) {
          if (op.concat_trunc > sum) {
            dimension_fail(idx, op,
                           "cannot truncate " + std::to_string(sum) +
                               " concatenated channels to " +
                               std::to_string(op.concat_trunc));
          }
          c = op.concat_trunc;
        }
        out = TensorShape::feature_map(c, a.height, a.width);
        break;
      }
      case OpKind::GlobalAvgPool: {
        const auto& in = input_shape(graph, op, idx, 0);
        if (in.rank != TensorShape::Rank::FeatureMap) {
          dimension_fail(idx, op, "expects a feature map, got " + in.to_string());
        }
        out = TensorShape::vector(in.channels);
        break;
      }
      case OpKind::FullyConnected: {
        const auto& in = input_shape(graph, op, idx, 0);
        if (in.rank != TensorShape::Rank::Vector || in.channels != op.in_channels) {
          dimension_fail(idx, op,
                         "expects a vector of length " +
                             std::to_string(op.in_channels) + ", got " +
                             in.to_string());
        }
        out = TensorShape::vector(op.out_channels);
        break;
      }
    }
    graph.tensors.emplace(op.output, out);
  }
  return graph;
}

ParamCounts count_params(const ModelGraph& shaped) {
  require_shaped(shaped, "count_params");
  ParamCounts counts;
  for (const auto& op : shaped.ops) {
    switch (op.kind) {
      case OpKind::Conv2d:
        counts.weights += op.kernel * op.kernel * op.in_channels * op.out_channels;
        if (op.has_bias) counts.biases += op.out_channels;
        break;
      case OpKind::DepthwiseConv2d:
        counts.weights += op.kernel * op.kernel * op.out_channels;
        if (op.has_bias) counts.biases += op.out_channels;
        break;
      case OpKind::FullyConnected:
        counts.weights += op.in_channels * op.out_channels;
        if (op.has_bias) counts.biases += op.out_channels;
        break;
      case OpKind::BatchNorm:
        counts.bn_params += 2 * op.out_channels;
        break;
      default:
        break;
    }
  }
  return counts;
}

std::int64_t count_macs(const ModelGraph& shaped) {
  require_shaped(shaped, "count_macs");
  std::int64_t macs = 0;
  for (const auto& op : shaped.ops) {
    const auto out_it = shaped.tensors.find(op.output);
    const auto& out = out_it->second;
    switch (op.kind) {
      case OpKind::Conv2d:
        macs += op.kernel * op.kernel * op.in_channels * op.out_channels *
                out.height * out.width;
        break;
      case OpKind::DepthwiseConv2d:
        macs += op.kernel * op.kernel * op.out_channels * out.height * out.width;
        break;
      case OpKind::FullyConnected:
        macs += op.in_channels * op.out_channels;
        break;
      default:
        break;  // normalization, activations, pooling, joins: zero MACs
    }
  }
  return macs;
}

}  // namespace automcu::graph
