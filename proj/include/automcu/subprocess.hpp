// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal POSIX subprocess runner with piped stdio and a hard deadline.
// Used by the external backend adapter and external trainer protocols; both
// are line-oriented, write-once/read-until-EOF exchanges.

#ifndef AUTOMCU_SUBPROCESS_HPP
#define AUTOMCU_SUBPROCESS_HPP

#include <string>
#include <vector>

namespace automcu::util {

struct CommandResult {
  int exit_code{-1};
  bool timed_out{false};
  bool spawn_failed{false};
  std::string out;
  std::string err;
  std::string spawn_error;  // meaningful when spawn_failed
};

// Runs argv[0] with the given arguments, feeding stdin_data and capturing
// stdout/stderr until EOF or the deadline. On timeout the child is killed
// with SIGKILL and whatever output was captured is returned.
CommandResult run_command(const std::vector<std::string>& argv,
                          const std::string& stdin_data,
                          double timeout_seconds);

// Whitespace tokenization for user-supplied command strings. No shell
// interpretation: quoting, globbing, and substitution are deliberately
// unsupported.
std::vector<std::string> split_command(const std::string& command);

}  // namespace automcu::util

#endif  // AUTOMCU_SUBPROCESS_HPP
