#pragma once

// Experiment configuration and its `key = value` text form.
//
// Lines are `key = value`; `#` starts a comment; blank lines are ignored.
// Keys absent from the file keep their defaults. `to_text` emits every key,
// so `parse_config(to_text(c)) == c`.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pcam/activation.hpp"
#include "pcam/audio_io.hpp"
#include "pcam/errors.hpp"
#include "pcam/memory.hpp"
#include "pcam/model.hpp"

namespace pcam {

struct ExperimentConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir = "results";
  std::uint32_t target_rate = 16000;  // 0 keeps each clip's own rate
  double segment_ms = 200.0;
  std::size_t max_segments = 20;
  std::size_t hidden_dim = 1600;
  Activation output_activation = Activation::tanh;
  Activation hidden_activation = Activation::tanh;
  bool normalize_peak = false;
  std::uint64_t seed = 0;
  std::vector<ReadMode> modes = {ReadMode::open_loop, ReadMode::closed_loop};
  double max_lag_ms = 10.0;
  std::size_t jobs = 1;
  WriteConfig write;
  ReadConfig read;  // mode and n_segments are filled in per run
  bool save_recalled = true;
  WavEncoding recalled_encoding = WavEncoding::float32;
  bool save_models = false;
  bool record_wall_time = false;

  void validate() const {
    if (!(segment_ms > 0.0)) throw ConfigError("segment_ms must be > 0");
    if (max_segments < 1) throw ConfigError("max_segments must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (modes.empty()) throw ConfigError("modes must name at least one read mode");
    if (!(max_lag_ms >= 0.0)) throw ConfigError("max_lag_ms must be >= 0");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    write.validate();
    ReadConfig r = read;
    r.n_segments = max_segments;
    r.validate();
    if (read.prime_segments > max_segments) throw ConfigError("read.prime_segments exceeds max_segments");
  }

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    throw ConfigError("invalid value '" + value + "' for " + key);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean '" + value + "' for " + key);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

inline std::string to_text(const ExperimentConfig& c) {
  using detail::format_double;
  std::ostringstream o;
  std::string modes;
  for (std::size_t i = 0; i < c.modes.size(); ++i) modes += (i ? "," : "") + std::string(to_string(c.modes[i]));
  o << "# pcam experiment configuration\n"
    << "input = " << c.input.string() << "\n"
    << "output_dir = " << c.output_dir.string() << "\n"
    << "target_rate = " << c.target_rate << "\n"
    << "segment_ms = " << format_double(c.segment_ms) << "\n"
    << "max_segments = " << c.max_segments << "\n"
    << "hidden_dim = " << c.hidden_dim << "\n"
    << "output_activation = " << to_string(c.output_activation) << "\n"
    << "hidden_activation = " << to_string(c.hidden_activation) << "\n"
    << "normalize_peak = " << (c.normalize_peak ? "true" : "false") << "\n"
    << "seed = " << c.seed << "\n"
    << "modes = " << modes << "\n"
    << "max_lag_ms = " << format_double(c.max_lag_ms) << "\n"
    << "jobs = " << c.jobs << "\n"
    << "write.epochs = " << c.write.epochs << "\n"
    << "write.n1_iters = " << c.write.n1_iters << "\n"
    << "write.eta_h = " << format_double(c.write.eta_h) << "\n"
    << "write.eta_w = " << format_double(c.write.eta_w) << "\n"
    << "write.weight_init_std = "
    << (c.write.weight_init_std ? format_double(*c.write.weight_init_std) : std::string("auto")) << "\n"
    << "write.cue_init = " << to_string(c.write.cue_init) << "\n"
    << "write.cue_std = " << format_double(c.write.cue_std) << "\n"
    << "write.kernel = " << to_string(c.write.kernel) << "\n"
    << "read.n2_iters = " << c.read.n2_iters << "\n"
    << "read.eta_x = " << format_double(c.read.eta_x) << "\n"
    << "read.eta_h = " << format_double(c.read.eta_h) << "\n"
    << "read.prime_segments = " << c.read.prime_segments << "\n"
    << "read.kernel = " << to_string(c.read.kernel) << "\n"
    << "save_recalled = " << (c.save_recalled ? "true" : "false") << "\n"
    << "recalled_encoding = " << (c.recalled_encoding == WavEncoding::pcm16 ? "pcm16" : "float32") << "\n"
    << "save_models = " << (c.save_models ? "true" : "false") << "\n"
    << "record_wall_time = " << (c.record_wall_time ? "true" : "false") << "\n";
  return o.str();
}

/// Applies one `key = value` assignment to `c`.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "input") c.input = value;
  else if (key == "output_dir") c.output_dir = value;
  else if (key == "target_rate") c.target_rate = parse_number<std::uint32_t>(key, value);
  else if (key == "segment_ms") c.segment_ms = parse_number<double>(key, value);
  else if (key == "max_segments") c.max_segments = parse_number<std::size_t>(key, value);
  else if (key == "hidden_dim") c.hidden_dim = parse_number<std::size_t>(key, value);
  else if (key == "output_activation") c.output_activation = parse_activation(value);
  else if (key == "hidden_activation") c.hidden_activation = parse_activation(value);
  else if (key == "normalize_peak") c.normalize_peak = parse_bool(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "modes") {
    c.modes.clear();
    for (const auto& m : detail::split_list(value)) {
      const ReadMode mode = parse_read_mode(m);
      if (std::find(c.modes.begin(), c.modes.end(), mode) == c.modes.end()) c.modes.push_back(mode);
    }
  } else if (key == "max_lag_ms") c.max_lag_ms = parse_number<double>(key, value);
  else if (key == "jobs") c.jobs = parse_number<std::size_t>(key, value);
  else if (key == "write.epochs") c.write.epochs = parse_number<std::size_t>(key, value);
  else if (key == "write.n1_iters") c.write.n1_iters = parse_number<std::size_t>(key, value);
  else if (key == "write.eta_h") c.write.eta_h = parse_number<double>(key, value);
  else if (key == "write.eta_w") c.write.eta_w = parse_number<double>(key, value);
  else if (key == "write.weight_init_std") {
    if (value == "auto") c.write.weight_init_std.reset();
    else c.write.weight_init_std = parse_number<double>(key, value);
  } else if (key == "write.cue_init") c.write.cue_init = parse_cue_init(value);
  else if (key == "write.cue_std") c.write.cue_std = parse_number<double>(key, value);
  else if (key == "write.kernel") c.write.kernel = parse_kernel(value);
  else if (key == "read.n2_iters") c.read.n2_iters = parse_number<std::size_t>(key, value);
  else if (key == "read.eta_x") c.read.eta_x = parse_number<double>(key, value);
  else if (key == "read.eta_h") c.read.eta_h = parse_number<double>(key, value);
  else if (key == "read.prime_segments") c.read.prime_segments = parse_number<std::size_t>(key, value);
  else if (key == "read.kernel") c.read.kernel = parse_kernel(value);
  else if (key == "save_recalled") c.save_recalled = parse_bool(key, value);
  else if (key == "recalled_encoding") {
    if (value == "pcm16") c.recalled_encoding = WavEncoding::pcm16;
    else if (value == "float32") c.recalled_encoding = WavEncoding::float32;
    else throw ConfigError("invalid recalled_encoding '" + value + "' (expected pcm16 or float32)");
  } else if (key == "save_models") c.save_models = parse_bool(key, value);
  else if (key == "record_wall_time") c.record_wall_time = parse_bool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    try {
      set_config_value(c, detail::trim(std::string_view(line).substr(0, eq)),
                       detail::trim(std::string_view(line).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// FNV-1a 64 of the canonical text form, as 16 hex digits. output_dir and
/// jobs do not change results and are left out.
inline std::string config_hash(const ExperimentConfig& c) {
  ExperimentConfig k = c;
  k.output_dir = ExperimentConfig{}.output_dir;
  k.jobs = 1;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text(k)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

}  // namespace pcam
