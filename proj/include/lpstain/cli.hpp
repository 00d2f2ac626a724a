/* Copyright 2026 The lpstain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpstain/error.hpp"
#include "lpstain/generator.hpp"

namespace lpstain::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitFormat = 4;

int exit_code_for(ErrorCode code);

/// Runs one command line (args[0] is the program name) and returns the
/// process exit code. Machine output goes to stdout, logs to stderr.
int run(const std::vector<std::string>& args);

/// Seed of one input file: the global seed mixed with the file stem, so
/// results do not depend on scheduling or input order.
std::uint64_t file_seed(std::uint64_t seed, const std::string& stem);

struct BenchConfig {
  std::vector<int> sizes{256, 512, 1024, 2048};
  std::vector<std::string> methods{"gsan@k0", "gsan@k1", "hed-jitter", "macenko"};
  int repetitions = 5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string method;
  int size = 0;
  double median_seconds = 0.0;
  std::optional<std::int64_t> flops;  // analytic, network methods only
};

std::vector<BenchRow> run_bench(const BenchConfig& cfg, const StainNetwork& net);

/// `method,size,median_s,flops`, one row per (method, size).
std::string bench_csv(const std::vector<BenchRow>& rows);

/// Per-pathway multiply-accumulate table for a K-level generator.
std::string flop_table(const std::vector<int>& sizes, int levels);

}  // namespace lpstain::cli
