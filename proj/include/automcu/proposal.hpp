// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Candidate generation behind one strategy interface: an LLM-backed
// strategy (prompt → remote call → JSON extraction → validate-retry), a
// seeded random sampler that only emits constructible specs, and a seeded
// single-edit mutation of a parent spec.

#ifndef AUTOMCU_PROPOSAL_HPP
#define AUTOMCU_PROPOSAL_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "automcu/arch_spec.hpp"
#include "automcu/feasibility.hpp"
#include "automcu/repository.hpp"

namespace automcu::proposal {

struct TaskDescriptor {
  std::string dataset;
  graph::TensorShape input_shape;
  std::int64_t num_classes{10};
};

struct ProposalContext {
  TaskDescriptor task;
  backend::ConstraintSet constraints;
  repo::ContextSummary history;
  int attempt_budget{3};
  // Stream seed for this proposal (derived per iteration by the caller).
  std::uint64_t seed{0};
  // Refinement base for the mutation strategy; ignored by others.
  std::optional<arch::ArchitectureSpec> parent;
  std::optional<std::string> parent_id;
};

class ProposalFailed : public std::runtime_error {
 public:
  ProposalFailed(int attempts, const std::string& last_error)
      : std::runtime_error("proposal failed after " +
                           std::to_string(attempts) +
                           " attempt(s): " + last_error),
        attempts_(attempts),
        last_error_(last_error) {}
  int attempts() const { return attempts_; }
  const std::string& last_error() const { return last_error_; }

 private:
  int attempts_;
  std::string last_error_;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProposalStrategy {
 public:
  virtual ~ProposalStrategy() = default;
  // Returns a constructible spec for the context's input shape or throws
  // ProposalFailed (TransportError surfaces distinctly from LlmStrategy).
  virtual arch::ArchitectureSpec propose(const ProposalContext& context) = 0;
  virtual std::string kind() const = 0;
};

// ---------------------------------------------------------------------------
// LLM strategy

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature{0.0};
};

// Returns the assistant message content. Throws TransportError.
using ChatTransport = std::function<std::string(const ChatRequest&)>;

struct LlmConfig {
  std::string base_url;  // e.g. http://host:port/v1
  std::string model;
  std::string credential_env{"AUTOMCU_API_KEY"};
  double temperature{0.0};  // deterministic decoding by default
  int max_retries{3};       // total attempts
  double timeout_seconds{60.0};
};

// First balanced {...} region that parses as JSON and has both "backbone"
// and "head" keys; code fences and prose are skipped. Throws ExtractionError.
std::string extract_json(const std::string& text);

// Deterministic prompt: task, budgets in KB, module-kind grammar, document
// format, and the history summary.
std::string render_prompt(const ProposalContext& context);

arch::ArchitectureSpec propose_llm(const ProposalContext& context,
                                   const LlmConfig& config,
                                   const ChatTransport& transport);

// Blocking HTTP POST to <base-url>/chat/completions; reads the credential
// from config.credential_env at call time. Throws TransportError on network
// failure, non-2xx status, or a missing credential.
ChatTransport make_http_chat_transport(const LlmConfig& config);

class LlmStrategy : public ProposalStrategy {
 public:
  LlmStrategy(LlmConfig config, ChatTransport transport)
      : config_(std::move(config)), transport_(std::move(transport)) {}
  arch::ArchitectureSpec propose(const ProposalContext& context) override;
  std::string kind() const override { return "llm"; }

 private:
  LlmConfig config_;
  ChatTransport transport_;
};

// ---------------------------------------------------------------------------
// Seeded strategies

struct SamplerConfig {
  int min_depth{3};
  int max_depth{8};
  std::vector<std::int64_t> widths{4, 6, 8, 12, 16, 24, 32, 48, 64};
  std::vector<std::int64_t> conv_kernels{3, 5};
  std::int64_t ghost_kernel{3};
  std::int64_t ghost_ratio{2};
  std::int64_t ghost_dw{3};
  std::vector<std::int64_t> expansions{1, 2};
  // Downsample is excluded from the kind draw once another halving would
  // shrink the feature map below this extent (caps halvings at 3 for 32x32).
  std::int64_t min_spatial{4};

  std::string digest() const;
};

// Deterministic function of (context.task, seed, config); the result is
// always constructible for the task input shape.
arch::ArchitectureSpec propose_random(const ProposalContext& context,
                                      std::uint64_t seed,
                                      const SamplerConfig& config);

// One seeded edit of the parent — widen/narrow a layer's width by one step,
// insert a depthwise layer, or delete a non-first layer — followed by
// channel-chain repair. Impossible draws fall back to widen, then insert.
arch::ArchitectureSpec propose_mutation(const ProposalContext& context,
                                        std::uint64_t seed,
                                        const arch::ArchitectureSpec& parent,
                                        const SamplerConfig& config);

class RandomStrategy : public ProposalStrategy {
 public:
  explicit RandomStrategy(SamplerConfig config = {}) : config_(std::move(config)) {}
  arch::ArchitectureSpec propose(const ProposalContext& context) override;
  std::string kind() const override { return "random"; }

 private:
  SamplerConfig config_;
};

// Mutates context.parent when present; falls back to random sampling on the
// first iteration (no parent yet).
class MutationStrategy : public ProposalStrategy {
 public:
  explicit MutationStrategy(SamplerConfig config = {}) : config_(std::move(config)) {}
  arch::ArchitectureSpec propose(const ProposalContext& context) override;
  std::string kind() const override { return "mutation"; }

 private:
  SamplerConfig config_;
};

}  // namespace automcu::proposal

#endif  // AUTOMCU_PROPOSAL_HPP
