// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#include "automcu/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <sstream>

namespace automcu::util {
namespace {

struct Fd {
  int fd{-1};
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
  }
};

struct PipePair {
  Fd read_end;
  Fd write_end;
  bool open() {
    int fds[2];
    if (::pipe(fds) != 0) return false;
    read_end.fd = fds[0];
    write_end.fd = fds[1];
    return true;
  }
};

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch())
      .count();
}

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

std::vector<std::string> split_command(const std::string& command) {
  std::vector<std::string> tokens;
  std::istringstream in(command);
  std::string token;
  while (in >> token) tokens.push_back(token);
  return tokens;
}

CommandResult run_command(const std::vector<std::string>& argv,
                          const std::string& stdin_data,
                          double timeout_seconds) {
  CommandResult result;
  if (argv.empty()) {
    result.spawn_failed = true;
    result.spawn_error = "empty command";
    return result;
  }

  // Writes to a pipe whose read end died must not kill the process.
  ::signal(SIGPIPE, SIG_IGN);

  PipePair child_in, child_out, child_err, exec_flag;
  if (!child_in.open() || !child_out.open() || !child_err.open() ||
      !exec_flag.open()) {
    result.spawn_failed = true;
    result.spawn_error = std::string("pipe: ") + std::strerror(errno);
    return result;
  }
  // The exec-flag pipe closes on successful exec; on failure the child
  // reports errno through it before exiting.
  ::fcntl(exec_flag.write_end.fd, F_SETFD, FD_CLOEXEC);

  const pid_t pid = ::fork();
  if (pid < 0) {
    result.spawn_failed = true;
    result.spawn_error = std::string("fork: ") + std::strerror(errno);
    return result;
  }

  if (pid == 0) {
    ::dup2(child_in.read_end.fd, STDIN_FILENO);
    ::dup2(child_out.write_end.fd, STDOUT_FILENO);
    ::dup2(child_err.write_end.fd, STDERR_FILENO);
    child_in.read_end.reset();
    child_in.write_end.reset();
    child_out.read_end.reset();
    child_out.write_end.reset();
    child_err.read_end.reset();
    child_err.write_end.reset();
    exec_flag.read_end.reset();

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());

    const int code = errno;
    (void)!::write(exec_flag.write_end.fd, &code, sizeof code);
    ::_exit(127);
  }

  child_in.read_end.reset();
  child_out.write_end.reset();
  child_err.write_end.reset();
  exec_flag.write_end.reset();

  // Blocks until exec succeeds (EOF) or fails (an errno arrives).
  int exec_errno = 0;
  const ssize_t flag_n =
      ::read(exec_flag.read_end.fd, &exec_errno, sizeof exec_errno);
  if (flag_n > 0) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    result.spawn_failed = true;
    result.spawn_error = argv[0] + ": " + std::strerror(exec_errno);
    return result;
  }

  set_nonblocking(child_in.write_end.fd);
  set_nonblocking(child_out.read_end.fd);
  set_nonblocking(child_err.read_end.fd);

  const std::int64_t deadline =
      now_ms() + static_cast<std::int64_t>(timeout_seconds * 1000.0);
  std::size_t written = 0;
  if (stdin_data.empty()) child_in.write_end.reset();

  bool out_open = true;
  bool err_open = true;
  char buf[4096];

  while (out_open || err_open || child_in.write_end.fd >= 0) {
    const std::int64_t remaining = deadline - now_ms();
    if (remaining <= 0) break;

    struct pollfd fds[3];
    nfds_t nfds = 0;
    int out_slot = -1, err_slot = -1, in_slot = -1;
    if (out_open) {
      out_slot = static_cast<int>(nfds);
      fds[nfds++] = {child_out.read_end.fd, POLLIN, 0};
    }
    if (err_open) {
      err_slot = static_cast<int>(nfds);
      fds[nfds++] = {child_err.read_end.fd, POLLIN, 0};
    }
    if (child_in.write_end.fd >= 0) {
      in_slot = static_cast<int>(nfds);
      fds[nfds++] = {child_in.write_end.fd, POLLOUT, 0};
    }

    const int rc = ::poll(fds, nfds, static_cast<int>(
                               remaining > 100 ? 100 : remaining));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }

    if (out_slot >= 0 && (fds[out_slot].revents & (POLLIN | POLLHUP))) {
      const ssize_t n = ::read(child_out.read_end.fd, buf, sizeof buf);
      if (n > 0) {
        result.out.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
        out_open = false;
      }
    }
    if (err_slot >= 0 && (fds[err_slot].revents & (POLLIN | POLLHUP))) {
      const ssize_t n = ::read(child_err.read_end.fd, buf, sizeof buf);
      if (n > 0) {
        result.err.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
        err_open = false;
      }
    }
    if (in_slot >= 0 && (fds[in_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = ::write(child_in.write_end.fd, stdin_data.data() + written,
                                stdin_data.size() - written);
      if (n > 0) {
        written += static_cast<std::size_t>(n);
      } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
        written = stdin_data.size();  // child stopped reading; give up
      }
      if (written >= stdin_data.size()) child_in.write_end.reset();
    }
  }

  // Output streams are done (or the deadline passed); now wait for exit,
  // still bounded by the same deadline.
  int status = 0;
  bool exited = false;
  while (now_ms() < deadline) {
    const pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) {
      exited = true;
      break;
    }
    if (w < 0) break;
    struct timespec ts {0, 2'000'000};  // 2 ms
    ::nanosleep(&ts, nullptr);
  }
  if (!exited) {
    result.timed_out = true;
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
  }

  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace automcu::util
