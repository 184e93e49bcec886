// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Trainer stand-in for tests. Usage: trainer_stub <mode>
// Reads one JSON request line from stdin, then emits NDJSON per the mode.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "ok";

  std::string request_line;
  std::getline(std::cin, request_line);

  if (mode == "ok") {
    std::printf("{\"event\": \"progress\", \"epoch\": 1, \"val_acc\": 40.5}\n");
    std::printf("{\"event\": \"progress\", \"epoch\": 2, \"val_acc\": 58.1}\n");
    std::printf(
        "{\"status\": \"ok\", \"val_acc\": 81.25, \"epochs_run\": 12, "
        "\"checkpoint_path\": \"ckpt/stub.bin\"}\n");
    return 0;
  }
  if (mode == "okmin") {
    std::printf("{\"status\": \"ok\", \"val_acc\": 70.0, \"epochs_run\": 30}\n");
    return 0;
  }
  if (mode == "echo") {
    // Derives the result from the request so tests can verify the handoff.
    nlohmann::json request;
    try {
      request = nlohmann::json::parse(request_line);
    } catch (const nlohmann::json::exception&) {
      std::printf("{\"status\": \"error\", \"detail\": \"bad request\"}\n");
      return 0;
    }
    if (!request.contains("architecture_spec") ||
        !request.contains("train_config")) {
      std::printf("{\"status\": \"error\", \"detail\": \"missing fields\"}\n");
      return 0;
    }
    const auto& tc = request["train_config"];
    const auto seed = tc["seed"].get<std::uint64_t>();
    const double acc = static_cast<double>(seed % 10000ull) / 100.0;
    std::printf("{\"status\": \"ok\", \"val_acc\": %.2f, \"epochs_run\": %d}\n",
                acc, tc["max_epochs"].get<int>());
    return 0;
  }
  if (mode == "fail") {
    std::printf("{\"event\": \"progress\", \"epoch\": 1, \"val_acc\": 9.8}\n");
    std::printf("{\"status\": \"error\", \"detail\": \"loss diverged\"}\n");
    return 0;
  }
  if (mode == "badjson") {
    std::printf("epoch 1 done\n");
    return 0;
  }
  if (mode == "nofinal") {
    std::printf("{\"event\": \"progress\", \"epoch\": 1, \"val_acc\": 31.0}\n");
    return 0;
  }
  if (mode == "silent") {
    return 0;
  }
  if (mode == "badacc") {
    std::printf("{\"status\": \"ok\", \"val_acc\": 140.0, \"epochs_run\": 3}\n");
    return 0;
  }
  if (mode == "sleep") {
    std::this_thread::sleep_for(std::chrono::seconds(10));
    std::printf("{\"status\": \"ok\", \"val_acc\": 50.0, \"epochs_run\": 1}\n");
    return 0;
  }
  std::fprintf(stderr, "trainer_stub: unknown mode %s\n", mode.c_str());
  return 64;
}
