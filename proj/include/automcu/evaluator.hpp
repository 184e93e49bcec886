// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training-agent contract: evaluate a candidate under one fixed training
// configuration and return comparable results. Two implementations: a
// deterministic closed-form surrogate (default; no DL stack required) and
// a bridge to an external trainer over a line-delimited stdio protocol.

#ifndef AUTOMCU_EVALUATOR_HPP
#define AUTOMCU_EVALUATOR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include "automcu/arch_spec.hpp"
#include "automcu/graph.hpp"
#include "automcu/repository.hpp"

namespace automcu::eval {

struct TrainConfig {
  std::string dataset;
  graph::TensorShape input_shape;
  int num_classes{10};
  int max_epochs{30};
  int patience{5};
  std::uint64_t seed{0};

  // Stable fingerprint of every field; identical digests guarantee
  // result comparability within a run.
  std::string digest() const;
};

class EvalError : public std::runtime_error {
 public:
  enum class Kind {
    NotConstructible,
    TrainerSpawnFailed,
    TrainerTimeout,
    TrainerBadOutput,
    TrainerReportedFailure,
  };
  EvalError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual repo::EvalResult evaluate(const arch::ArchitectureSpec& spec,
                                    const TrainConfig& config) = 0;
  virtual std::string kind() const = 0;
};

// Closed-form pseudo-accuracy from parameter and MAC counts. Exposed
// separately so tests can pin the curve pointwise.
double surrogate_base(std::int64_t params, std::int64_t macs);
// Deterministic jitter in [-1, 1] from the canonical spec bytes + seed.
double surrogate_jitter(const std::string& canonical_doc, std::uint64_t seed);

// accuracy = clamp(base + jitter, 0, 99.9); converged; epochs_run =
// min(max_epochs, 10). Pure: equal inputs give equal results.
class SurrogateEvaluator : public Evaluator {
 public:
  repo::EvalResult evaluate(const arch::ArchitectureSpec& spec,
                            const TrainConfig& config) override;
  std::string kind() const override { return "surrogate"; }
};

struct TrainerConfig {
  std::string command;  // whitespace-tokenized; no shell
  double timeout_seconds{3600.0};
};

// Sends {"architecture_spec":..., "train_config":...} on stdin, then reads
// newline-delimited progress documents and one final status document from
// stdout. Maps protocol failures onto EvalError kinds; never hangs past the
// timeout.
class ExternalTrainer : public Evaluator {
 public:
  explicit ExternalTrainer(TrainerConfig config) : config_(std::move(config)) {}
  repo::EvalResult evaluate(const arch::ArchitectureSpec& spec,
                            const TrainConfig& config) override;
  std::string kind() const override { return "external"; }

 private:
  TrainerConfig config_;
};

}  // namespace automcu::eval

#endif  // AUTOMCU_EVALUATOR_HPP
