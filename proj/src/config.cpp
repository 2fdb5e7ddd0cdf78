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

#include "dsg/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dsg {

namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError("config: '" + where() + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: field '" + path(key) + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  std::string path(const char* key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("config: unknown field '" + path(item.key().c_str()) + "'");
      }
    }
  }

 private:
  std::string where() const { return prefix_.empty() ? "<root>" : prefix_; }

  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

// JSON only carries doubles; seeds above 2^53 are accepted as strings too.
std::uint64_t read_seed(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  if (v.is_string()) {
    try {
      std::size_t pos = 0;
      const std::string s = v.get<std::string>();
      const auto seed = std::stoull(s, &pos);
      if (pos == s.size()) return seed;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("config: field 'seed' must be a non-negative integer");
}

Waveform parse_waveform(const std::string& s) {
  if (s == "sine") return Waveform::kSine;
  if (s == "square") return Waveform::kSquare;
  if (s == "custom") return Waveform::kCustom;
  throw ConfigError("config: field 'control.waveform' must be sine, square or custom");
}

const char* waveform_name(Waveform w) {
  switch (w) {
    case Waveform::kSine:
      return "sine";
    case Waveform::kSquare:
      return "square";
    case Waveform::kCustom:
      return "custom";
  }
  return "sine";
}

json experiment_json(const ExperimentConfig& e) {
  const auto& c = e.control;
  const auto& el = e.electronics;
  return json{
      {"control",
       {{"waveform", waveform_name(c.waveform)},
        {"frequency_mhz", c.frequency_mhz},
        {"amplitude", c.amplitude},
        {"phase_rad", c.phase},
        {"sample_rate_mhz", c.sample_rate_mhz},
        {"samples", c.samples}}},
      {"input",
       {{"x_amplitude", e.input.x_amplitude},
        {"frequency_mhz", e.input.frequency_mhz},
        {"p_amplitude", e.input.p_amplitude}}},
      {"ancilla_db", e.ancilla_db},
      {"n_trials", e.n_trials},
      {"n_bins", e.n_bins},
      {"detection_efficiency", e.detection_efficiency},
      {"electronics",
       {{"use_pwl", el.use_pwl},
        {"arctan_segments", el.arctan_segments},
        {"sqrt_segments", el.sqrt_segments},
        {"range", {el.range_lo, el.range_hi}},
        {"model_latency", el.model_latency},
        {"optical_delay_ns", el.delays.optical_delay_ns},
        {"electronics_latency_ns", el.delays.electronics_latency_ns}}},
  };
}

}  // namespace

RunConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  Reader r(root, "");
  if (const json* control = r.child("control")) {
    Reader c(*control, "control");
    std::string waveform = waveform_name(e.control.waveform);
    c.get("waveform", waveform);
    e.control.waveform = parse_waveform(waveform);
    c.get("frequency_mhz", e.control.frequency_mhz);
    c.get("amplitude", e.control.amplitude);
    c.get("phase_rad", e.control.phase);
    c.get("sample_rate_mhz", e.control.sample_rate_mhz);
    c.get("samples", e.control.samples);
    c.finish();
  }
  if (const json* input = r.child("input")) {
    Reader in(*input, "input");
    in.get("x_amplitude", e.input.x_amplitude);
    in.get("frequency_mhz", e.input.frequency_mhz);
    in.get("p_amplitude", e.input.p_amplitude);
    in.finish();
  }
  r.get("ancilla_db", e.ancilla_db);
  r.get("n_trials", e.n_trials);
  r.get("n_bins", e.n_bins);
  r.get("detection_efficiency", e.detection_efficiency);
  if (const json* seed = r.child("seed")) e.seed = read_seed(*seed);
  if (const json* el = r.child("electronics")) {
    Reader x(*el, "electronics");
    x.get("use_pwl", e.electronics.use_pwl);
    x.get("arctan_segments", e.electronics.arctan_segments);
    x.get("sqrt_segments", e.electronics.sqrt_segments);
    if (const json* range = x.child("range")) {
      if (!range->is_array() || range->size() != 2 || !(*range)[0].is_number() ||
          !(*range)[1].is_number()) {
        throw ConfigError("config: field 'electronics.range' must be [lo, hi]");
      }
      e.electronics.range_lo = (*range)[0].get<double>();
      e.electronics.range_hi = (*range)[1].get<double>();
    }
    x.get("model_latency", e.electronics.model_latency);
    x.get("optical_delay_ns", e.electronics.delays.optical_delay_ns);
    x.get("electronics_latency_ns", e.electronics.delays.electronics_latency_ns);
    x.finish();
  }
  r.get("output_dir", cfg.output_dir);
  r.finish();
  try {
    e.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string dump_config(const RunConfig& cfg) {
  json j = experiment_json(cfg.experiment);
  j["seed"] = cfg.experiment.seed;
  j["output_dir"] = cfg.output_dir;
  return j.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // FNV-1a over the canonical (key-sorted) dump.
  const std::string text = experiment_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dsg
