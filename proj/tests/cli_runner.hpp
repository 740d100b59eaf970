// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Runs the CLI binary in a subprocess and captures stdout and the exit code.

#pragma once

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <string>

namespace fixture {

struct CliResult {
  int code = -1;
  std::string out;
};

inline CliResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + CONTENTION_CLI_PATH + "\" " +
                          args + " 2>/dev/null";
  CliResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// Small run configuration that trains in about a second.
inline std::string small_config_json(const std::string& out_dir) {
  return R"({
  "scenario": {"window": 16},
  "model": {"hidden": 12, "embed": 8, "prop": 8, "head_hidden": 6},
  "train": {"max_epochs": 4, "batch_size": 32, "learning_rate": 0.005},
  "experiment": {"n_train": 120, "n_val": 40, "n_test": 40},
  "sweep": {"batch_sizes": [32, 64], "fractions": [0.5, 1.0], "dims": [8, 12]},
  "output_dir": ")" + out_dir + R"("
}
)";
}

}  // namespace fixture
