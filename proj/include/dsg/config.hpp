// Copyright 2026 The dsgsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON run configuration. Every field is optional; defaults reproduce the
// nominal setup (-3.1 dB ancilla, 1 MHz sine of amplitude 2, 5 MHz input,
// 10851 trials per station angle).

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dsg/experiment.hpp"

namespace dsg {

/// Invalid configuration; what() names the JSON line or field at fault.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  ExperimentConfig experiment;
  std::string output_dir = ".";
};

RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every field spelled out.
std::string dump_config(const RunConfig& cfg);

/// 16 hex digits identifying the physics of a run (seed and output
/// directory excluded).
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace dsg
