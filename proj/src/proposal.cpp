// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#include "automcu/proposal.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "automcu/graph.hpp"
#include "automcu/hash.hpp"
#include "automcu/json_io.hpp"
#include "automcu/rng.hpp"

namespace automcu::proposal {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string format_kb(double kb) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", kb);
  return buf;
}

// Constructibility predicate shared by every strategy's self-check.
void require_constructible(const arch::ArchitectureSpec& spec,
                           const graph::TensorShape& input,
                           const char* who) {
  const auto report = arch::validate_schema(spec);
  if (!report.valid) {
    throw std::logic_error(std::string(who) + " produced an invalid spec: " +
                           report.issues.front().message);
  }
  graph::infer_shapes(graph::expand_blocks(spec), input);
}

arch::LayerSpec make_layer(arch::ModuleKind kind,
                           std::initializer_list<std::pair<const char*,
                                                           arch::ParamValue>>
                               params) {
  arch::LayerSpec layer;
  layer.kind = kind;
  for (const auto& [name, value] : params) layer.params.emplace(name, value);
  return layer;
}

// Smallest configured width strictly above / largest strictly below the
// given value; used to snap widen/narrow steps onto the width set.
std::optional<std::int64_t> width_above(const std::vector<std::int64_t>& widths,
                                        std::int64_t value) {
  std::optional<std::int64_t> best;
  for (auto w : widths) {
    if (w > value && (!best || w < *best)) best = w;
  }
  return best;
}

std::optional<std::int64_t> width_below(const std::vector<std::int64_t>& widths,
                                        std::int64_t value) {
  std::optional<std::int64_t> best;
  for (auto w : widths) {
    if (w < value && (!best || w > *best)) best = w;
  }
  return best;
}

// Restores in_channels == previous out_channels along the backbone after an
// edit; depthwise layers forward their (possibly new) input width.
void repair_chain(arch::ArchitectureSpec& spec) {
  for (std::size_t i = 1; i < spec.backbone.size(); ++i) {
    const std::int64_t prev_out = spec.backbone[i - 1].out_channels();
    auto& layer = spec.backbone[i];
    layer.params["in_channels"] = prev_out;
    if (layer.kind == arch::ModuleKind::Depthwise) {
      layer.params["out_channels"] = prev_out;
    }
  }
}

// Layers whose width can step in the requested direction. Depthwise widths
// are tied to their input, so they are never direct targets.
std::vector<std::size_t> step_candidates(const arch::ArchitectureSpec& spec,
                                         const SamplerConfig& config,
                                         bool up) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.backbone.size(); ++i) {
    const auto& layer = spec.backbone[i];
    if (layer.kind == arch::ModuleKind::Depthwise) continue;
    const auto next = up ? width_above(config.widths, layer.out_channels())
                         : width_below(config.widths, layer.out_channels());
    if (next) out.push_back(i);
  }
  return out;
}

bool apply_step(arch::ArchitectureSpec& spec, util::DetRng& rng,
                const SamplerConfig& config, bool up) {
  const auto candidates = step_candidates(spec, config, up);
  if (candidates.empty()) return false;
  const auto i = candidates[static_cast<std::size_t>(
      rng.next_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
  auto& layer = spec.backbone[i];
  const auto next = up ? width_above(config.widths, layer.out_channels())
                       : width_below(config.widths, layer.out_channels());
  layer.params["out_channels"] = *next;
  repair_chain(spec);
  return true;
}

void apply_insert(arch::ArchitectureSpec& spec, util::DetRng& rng) {
  // Insert a shape-preserving depthwise layer after a seeded position.
  const auto pos = static_cast<std::size_t>(
      rng.next_int(1, static_cast<std::int64_t>(spec.backbone.size())));
  const std::int64_t c = spec.backbone[pos - 1].out_channels();
  auto layer = make_layer(arch::ModuleKind::Depthwise,
                          {{"in_channels", c},
                           {"kernel_size", std::int64_t{3}},
                           {"out_channels", c},
                           {"padding", std::int64_t{1}},
                           {"stride", std::int64_t{1}}});
  spec.backbone.insert(spec.backbone.begin() + static_cast<std::ptrdiff_t>(pos),
                       std::move(layer));
  repair_chain(spec);
}

bool apply_delete(arch::ArchitectureSpec& spec, util::DetRng& rng) {
  if (spec.backbone.size() < 2) return false;
  const auto pos = static_cast<std::size_t>(
      rng.next_int(2, static_cast<std::int64_t>(spec.backbone.size())));
  spec.backbone.erase(spec.backbone.begin() +
                      static_cast<std::ptrdiff_t>(pos - 1));
  repair_chain(spec);
  return true;
}

}  // namespace

std::string SamplerConfig::digest() const {
  std::ostringstream key;
  key << min_depth << "|" << max_depth << "|";
  for (auto w : widths) key << w << ",";
  key << "|";
  for (auto k : conv_kernels) key << k << ",";
  key << "|" << ghost_kernel << "|" << ghost_ratio << "|" << ghost_dw << "|";
  for (auto e : expansions) key << e << ",";
  key << "|" << min_spatial;
  return util::hex_prefix(util::fnv1a64(key.str()), 16);
}

std::string extract_json(const std::string& text) {
  for (std::size_t start = text.find('{'); start != std::string::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          const std::string candidate = text.substr(start, i - start + 1);
          json parsed = json::parse(candidate, nullptr, false);
          if (parsed.is_object() && parsed.contains("backbone") &&
              parsed.contains("head")) {
            return candidate;
          }
          break;  // balanced but not a candidate document; try the next '{'
        }
      }
    }
  }
  throw ExtractionError(
      "no JSON object with \"backbone\" and \"head\" keys found in the reply");
}

std::string render_prompt(const ProposalContext& context) {
  const auto& in = context.task.input_shape;
  std::ostringstream out;
  out << "You are designing a compact convolutional neural network for "
         "deployment on a microcontroller.\n"
      << "Task: dataset \"" << context.task.dataset << "\", input "
      << in.channels << "x" << in.height << "x" << in.width << ", "
      << context.task.num_classes << " classes.\n"
      << "Hard deployment budgets: RAM "
      << format_kb(backend::kb_from_bytes(context.constraints.ram_budget_bytes))
      << " KB, Flash "
      << format_kb(backend::kb_from_bytes(context.constraints.flash_budget_bytes))
      << " KB. Candidates exceeding either budget are rejected before "
         "training.\n"
      << "Reply with exactly one JSON object in this document format and "
         "nothing else:\n"
      << "{\"backbone\": {\"layer_1\": {\"type\": \"<kind>\", ...}, ...}, "
         "\"head\": {\"type\": \"classifier\", \"num_classes\": "
      << context.task.num_classes << "}}\n"
      << "Backbone keys must be layer_1..layer_N, contiguous from 1. Allowed "
         "layer kinds and required fields:\n"
      << "- conv: in_channels, out_channels, kernel_size, stride, padding, "
         "use_bn\n"
      << "- depthwise: in_channels, out_channels, kernel_size, stride, "
         "padding (in_channels must equal out_channels)\n"
      << "- downsample: in_channels, out_channels\n"
      << "- pointwise: in_channels, out_channels, use_bn\n"
      << "- ghost: in_channels, out_channels, kernel_size, ratio, dw_size\n"
      << "- bottleneck: in_channels, out_channels, expansion\n"
      << "All fields are integers except use_bn (boolean). Each layer's "
         "in_channels must equal the previous layer's out_channels; layer_1 "
         "must take "
      << in.channels << " input channels.\n"
      << "Previously explored candidates:\n"
      << context.history.to_text();
  return out.str();
}

arch::ArchitectureSpec propose_llm(const ProposalContext& context,
                                   const LlmConfig& config,
                                   const ChatTransport& transport) {
  ChatRequest request;
  request.model = config.model;
  request.temperature = config.temperature;
  request.messages.push_back(ChatMessage{"user", render_prompt(context)});

  const int attempts_allowed = std::max(1, config.max_retries);
  std::string last_error = "no attempts made";
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    const std::string reply = transport(request);  // TransportError passes through
    try {
      const std::string doc = extract_json(reply);
      auto spec = arch::parse_spec(doc);
      graph::infer_shapes(graph::expand_blocks(spec),
                          context.task.input_shape);
      return spec;
    } catch (const std::exception& e) {
      last_error = e.what();
      request.messages.push_back(ChatMessage{"assistant", reply});
      request.messages.push_back(ChatMessage{
          "user", std::string("The previous candidate was rejected: ") +
                      e.what() +
                      "\nReply with a corrected JSON document only."});
    }
  }
  throw ProposalFailed(attempts_allowed, last_error);
}

ChatTransport make_http_chat_transport(const LlmConfig& config) {
  return [config](const ChatRequest& request) -> std::string {
    const char* key = std::getenv(config.credential_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw TransportError("credential environment variable " +
                           config.credential_env + " is not set");
    }

    // Split "<scheme>://<host>[:port]</prefix>" into client target + path.
    const auto scheme_end = config.base_url.find("://");
    if (scheme_end == std::string::npos) {
      throw TransportError("base URL \"" + config.base_url +
                           "\" lacks a scheme");
    }
    const auto path_start = config.base_url.find('/', scheme_end + 3);
    const std::string host = config.base_url.substr(
        0, path_start == std::string::npos ? config.base_url.size()
                                           : path_start);
    std::string prefix = path_start == std::string::npos
                             ? std::string{}
                             : config.base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    httplib::Client client(host);
    client.set_connection_timeout(static_cast<time_t>(config.timeout_seconds),
                                  0);
    client.set_read_timeout(static_cast<time_t>(config.timeout_seconds), 0);

    ordered_json body = ordered_json::object();
    body["model"] = request.model;
    ordered_json messages = ordered_json::array();
    for (const auto& m : request.messages) {
      messages.push_back(ordered_json{{"role", m.role}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;

    httplib::Headers headers = {
        {"Authorization", std::string("Bearer ") + key}};
    const auto res = client.Post(prefix + "/chat/completions", headers,
                                 body.dump(), "application/json");
    if (!res) {
      throw TransportError("request to " + config.base_url +
                           " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("chat endpoint returned HTTP " +
                           std::to_string(res->status));
    }
    json doc = json::parse(res->body, nullptr, false);
    if (!doc.is_object() || !doc.contains("choices") ||
        !doc["choices"].is_array() || doc["choices"].empty() ||
        !doc["choices"][0].contains("message") ||
        !doc["choices"][0]["message"].contains("content") ||
        !doc["choices"][0]["message"]["content"].is_string()) {
      throw TransportError("chat endpoint reply is not a completion document");
    }
    return doc["choices"][0]["message"]["content"].get<std::string>();
  };
}

arch::ArchitectureSpec LlmStrategy::propose(const ProposalContext& context) {
  LlmConfig config = config_;
  config.max_retries = std::max(1, std::min(config.max_retries,
                                            context.attempt_budget));
  return propose_llm(context, config, transport_);
}

arch::ArchitectureSpec propose_random(const ProposalContext& context,
                                      std::uint64_t seed,
                                      const SamplerConfig& config) {
  util::DetRng rng(seed);
  const auto& input = context.task.input_shape;

  // Draw order is part of the contract (golden outputs depend on it):
  // depth first, then per layer: kind, then fields in emission order.
  const int depth =
      static_cast<int>(rng.next_int(config.min_depth, config.max_depth));
  std::int64_t c = input.channels;
  std::int64_t h = input.height;
  std::int64_t w = input.width;

  arch::ArchitectureSpec spec;
  spec.backbone.reserve(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) {
    std::vector<arch::ModuleKind> kinds = {
        arch::ModuleKind::Conv, arch::ModuleKind::Depthwise,
        arch::ModuleKind::Pointwise, arch::ModuleKind::Ghost,
        arch::ModuleKind::Bottleneck,
    };
    const std::int64_t halved = (std::min(h, w) - 1) / 2 + 1;
    if (halved >= config.min_spatial) {
      kinds.push_back(arch::ModuleKind::Downsample);
    }
    const auto kind = rng.pick(kinds);

    switch (kind) {
      case arch::ModuleKind::Conv: {
        const std::int64_t k = rng.pick(config.conv_kernels);
        const std::int64_t out = rng.pick(config.widths);
        const bool use_bn = rng.next_bool();
        spec.backbone.push_back(make_layer(
            kind, {{"in_channels", c},
                   {"out_channels", out},
                   {"kernel_size", k},
                   {"stride", std::int64_t{1}},
                   {"padding", k / 2},
                   {"use_bn", use_bn}}));
        c = out;
        break;
      }
      case arch::ModuleKind::Depthwise: {
        const std::int64_t k = rng.pick(config.conv_kernels);
        spec.backbone.push_back(make_layer(
            kind, {{"in_channels", c},
                   {"out_channels", c},
                   {"kernel_size", k},
                   {"stride", std::int64_t{1}},
                   {"padding", k / 2}}));
        break;
      }
      case arch::ModuleKind::Downsample: {
        const std::int64_t out = rng.pick(config.widths);
        spec.backbone.push_back(
            make_layer(kind, {{"in_channels", c}, {"out_channels", out}}));
        c = out;
        h = (h - 1) / 2 + 1;
        w = (w - 1) / 2 + 1;
        break;
      }
      case arch::ModuleKind::Pointwise: {
        const std::int64_t out = rng.pick(config.widths);
        const bool use_bn = rng.next_bool();
        spec.backbone.push_back(make_layer(
            kind,
            {{"in_channels", c}, {"out_channels", out}, {"use_bn", use_bn}}));
        c = out;
        break;
      }
      case arch::ModuleKind::Ghost: {
        const std::int64_t out = rng.pick(config.widths);
        spec.backbone.push_back(make_layer(
            kind, {{"in_channels", c},
                   {"out_channels", out},
                   {"kernel_size", config.ghost_kernel},
                   {"ratio", config.ghost_ratio},
                   {"dw_size", config.ghost_dw}}));
        c = out;
        break;
      }
      case arch::ModuleKind::Bottleneck: {
        const std::int64_t out = rng.pick(config.widths);
        const std::int64_t expansion = rng.pick(config.expansions);
        spec.backbone.push_back(make_layer(kind, {{"in_channels", c},
                                                  {"out_channels", out},
                                                  {"expansion", expansion}}));
        c = out;
        break;
      }
      case arch::ModuleKind::Classifier:
        break;  // not in the draw set
    }
  }
  spec.head.num_classes = context.task.num_classes;

  require_constructible(spec, input, "propose_random");
  return spec;
}

arch::ArchitectureSpec propose_mutation(const ProposalContext& context,
                                        std::uint64_t seed,
                                        const arch::ArchitectureSpec& parent,
                                        const SamplerConfig& config) {
  util::DetRng rng(seed);
  arch::ArchitectureSpec spec = parent;

  enum Arm { kWiden = 0, kNarrow = 1, kInsert = 2, kDelete = 3 };
  const Arm arm = static_cast<Arm>(rng.next_int(0, 3));

  bool applied = false;
  switch (arm) {
    case kWiden:
      applied = apply_step(spec, rng, config, /*up=*/true);
      break;
    case kNarrow:
      applied = apply_step(spec, rng, config, /*up=*/false);
      break;
    case kInsert:
      apply_insert(spec, rng);
      applied = true;
      break;
    case kDelete:
      applied = apply_delete(spec, rng);
      break;
  }
  // Impossible draws fall back to widen, then to insert (always possible).
  if (!applied) applied = apply_step(spec, rng, config, /*up=*/true);
  if (!applied) apply_insert(spec, rng);

  require_constructible(spec, context.task.input_shape, "propose_mutation");
  return spec;
}

arch::ArchitectureSpec RandomStrategy::propose(const ProposalContext& context) {
  return propose_random(context, context.seed, config_);
}

arch::ArchitectureSpec MutationStrategy::propose(const ProposalContext& context) {
  if (context.parent) {
    return propose_mutation(context, context.seed, *context.parent, config_);
  }
  return propose_random(context, context.seed, config_);
}

}  // namespace automcu::proposal
