#pragma once

// Config-driven runner: one model per clip, written once and read back in
// every configured mode, with CSV/JSON output.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pcam/audio_io.hpp"
#include "pcam/config.hpp"
#include "pcam/errors.hpp"
#include "pcam/memory.hpp"
#include "pcam/metrics.hpp"
#include "pcam/model.hpp"
#include "pcam/model_file.hpp"

namespace pcam {

struct RunRecord {
  std::string clip_id;
  ReadMode mode = ReadMode::closed_loop;
  std::string status = "ok";  // "ok" or "error: ..."
  double clip_cosine = 0.0;
  double clip_snr_db = 0.0;
  double mean_seg_cosine = 0.0;
  double min_seg_cosine = 0.0;
  long xcorr_lag_median = 0;
  std::size_t n_segments = 0;
  double wall_time_s = 0.0;
  std::string config_hash;
  std::filesystem::path original_wav;
  std::filesystem::path recalled_wav;  // empty unless the recall was saved

  bool ok() const { return status == "ok"; }
};

inline const char* kResultsCsvHeader =
    "clip_id,mode,clip_cosine,clip_snr_db,mean_seg_cosine,min_seg_cosine,xcorr_lag_median,wall_time_s,status";

/// pairs.csv lists every saved recall next to its source clip, for
/// downstream listening or transcription tools.
inline const char* kPairsCsvHeader = "clip_id,mode,original_wav,recalled_wav";

/// WAV files directly inside `input` (or `input` itself), sorted by path.
inline std::vector<std::filesystem::path> discover_clips(const std::filesystem::path& input) {
  namespace fs = std::filesystem;
  if (input.empty()) throw ConfigError("input is not set");
  if (!fs::exists(input)) throw IoError("input '" + input.string() + "' does not exist");
  std::vector<fs::path> clips;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
      if (ext == ".wav") clips.push_back(entry.path());
    }
    std::sort(clips.begin(), clips.end());
  } else {
    clips.push_back(input);
  }
  return clips;
}

namespace detail {

inline std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out + "\"";
}

inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// load -> optional peak normalization -> resample -> segment.
inline SegmentedSequence prepare_clip(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  Waveform w = load_wav(path);
  if (cfg.normalize_peak) w = peak_normalize(w);
  if (cfg.target_rate != 0) w = resample(w, cfg.target_rate);
  return segment(w, cfg.segment_ms, cfg.max_segments);
}

inline std::string to_csv_row(const RunRecord& r, bool with_wall_time) {
  std::ostringstream o;
  o << detail::csv_field(r.clip_id) << ',' << to_string(r.mode) << ',';
  if (r.ok()) {
    o << detail::csv_number(r.clip_cosine) << ',' << detail::csv_number(r.clip_snr_db) << ','
      << detail::csv_number(r.mean_seg_cosine) << ',' << detail::csv_number(r.min_seg_cosine) << ','
      << r.xcorr_lag_median << ',';
  } else {
    o << ",,,,,";
  }
  if (with_wall_time) o << detail::csv_number(r.wall_time_s);
  o << ',' << detail::csv_field(r.status);
  return o.str();
}

/// Writes, then reads once per configured mode. Failures become error
/// records for every mode of the clip.
inline std::vector<RunRecord> run_clip(const std::filesystem::path& path, const ExperimentConfig& cfg,
                                       const std::string& hash) {
  using clock = std::chrono::steady_clock;
  const std::string clip_id = path.stem().string();
  std::vector<RunRecord> out;
  for (ReadMode mode : cfg.modes) {
    RunRecord r;
    r.clip_id = clip_id;
    r.mode = mode;
    r.config_hash = hash;
    r.original_wav = path;
    out.push_back(r);
  }

  try {
    const auto t0 = clock::now();
    const SegmentedSequence seq = prepare_clip(path, cfg);
    MemoryModel model = init_model(cfg.hidden_dim, seq.segment_len, cfg.output_activation, cfg.hidden_activation,
                                   cfg.seed, cfg.write);
    model = write_sequence(std::move(model), seq, cfg.write).model;
    const double write_s = std::chrono::duration<double>(clock::now() - t0).count();
    if (cfg.save_models) save_model(model, cfg.output_dir / (clip_id + ".model.pcam"));

    const std::size_t max_lag = default_max_lag(seq.sample_rate, cfg.max_lag_ms);
    for (RunRecord& r : out) {
      const auto t1 = clock::now();
      ReadConfig rc = cfg.read;
      rc.mode = r.mode;
      rc.n_segments = seq.count();
      const RecallResult recall = read_sequence(model, rc, rc.prime_segments ? &seq.segments : nullptr);
      const FidelityReport rep = fidelity_report(seq, recall, max_lag);
      r.clip_cosine = rep.clip_cosine;
      r.clip_snr_db = rep.clip_snr_db;
      r.mean_seg_cosine = rep.mean_segment_cosine();
      r.min_seg_cosine = rep.min_segment_cosine();
      r.xcorr_lag_median = rep.median_lag();
      r.n_segments = rep.n_segments;
      if (cfg.save_recalled) {
        SegmentedSequence rs = as_sequence(recall, seq.sample_rate);
        rs.original_len = seq.original_len;
        r.recalled_wav = cfg.output_dir / (clip_id + "." + std::string(to_string(r.mode)) + ".recalled.wav");
        save_wav(reassemble(rs), r.recalled_wav, cfg.recalled_encoding);
      }
      r.wall_time_s = write_s + std::chrono::duration<double>(clock::now() - t1).count();
    }
  } catch (const std::exception& e) {
    for (RunRecord& r : out) {
      r.status = std::string("error: ") + e.what();
      r.n_segments = 0;
      r.recalled_wav.clear();
    }
  }
  return out;
}

inline void write_results_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path,
                              bool with_wall_time) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << kResultsCsvHeader << '\n';
  for (const auto& r : records) os << to_csv_row(r, with_wall_time) << '\n';
}

inline void write_pairs_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << kPairsCsvHeader << '\n';
  for (const auto& r : records)
    if (r.ok() && !r.recalled_wav.empty())
      os << detail::csv_field(r.clip_id) << ',' << to_string(r.mode) << ',' << detail::csv_field(r.original_wav.string())
         << ',' << detail::csv_field(r.recalled_wav.string()) << '\n';
}

/// Per-mode aggregates and the paired closed-vs-open comparison.
/// `elapsed_s` is the whole run's wall time, reported only with record_wall_time.
inline nlohmann::json summarize(const std::vector<RunRecord>& records, const ExperimentConfig& cfg,
                                const std::string& hash, double elapsed_s = 0.0) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["config_hash"] = hash;
  std::vector<std::string> clips;
  for (const auto& r : records)
    if (std::find(clips.begin(), clips.end(), r.clip_id) == clips.end()) clips.push_back(r.clip_id);
  j["n_clips"] = clips.size();

  for (ReadMode mode : cfg.modes) {
    std::vector<double> cos, snr;
    std::size_t errors = 0;
    for (const auto& r : records) {
      if (r.mode != mode) continue;
      if (!r.ok()) {
        ++errors;
        continue;
      }
      cos.push_back(r.clip_cosine);
      if (std::isfinite(r.clip_snr_db)) snr.push_back(r.clip_snr_db);
    }
    nlohmann::json m;
    m["n_ok"] = cos.size();
    m["n_error"] = errors;
    double mean = 0.0;
    for (double c : cos) mean += c;
    m["mean_clip_cosine"] = detail::json_number(cos.empty() ? 0.0 : mean / double(cos.size()));
    m["median_clip_cosine"] = detail::json_number(detail::median(cos));
    double snr_mean = 0.0;
    for (double s : snr) snr_mean += s;
    m["mean_clip_snr_db"] = detail::json_number(snr.empty() ? 0.0 : snr_mean / double(snr.size()));
    j["modes"][std::string(to_string(mode))] = m;
  }

  std::size_t pairs = 0, closed_better = 0;
  double gain = 0.0;
  for (const auto& id : clips) {
    const RunRecord* open = nullptr;
    const RunRecord* closed = nullptr;
    for (const auto& r : records) {
      if (r.clip_id != id || !r.ok()) continue;
      (r.mode == ReadMode::open_loop ? open : closed) = &r;
    }
    if (!open || !closed) continue;
    ++pairs;
    if (closed->clip_cosine > open->clip_cosine) ++closed_better;
    gain += closed->clip_cosine - open->clip_cosine;
  }
  if (pairs > 0) {
    j["closed_vs_open"] = {{"n_pairs", pairs},
                           {"closed_better", closed_better},
                           {"fraction_closed_better", double(closed_better) / double(pairs)},
                           {"mean_cosine_gain", gain / double(pairs)}};
  }
  if (cfg.record_wall_time) j["total_wall_time_s"] = elapsed_s;
  return j;
}

/// Runs every clip under `cfg.input`; writes results.csv, pairs.csv,
/// summary.json and recalled WAVs into cfg.output_dir. Records are ordered by clip_id, then
/// by the order of cfg.modes.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto clips = discover_clips(cfg.input);
  std::filesystem::create_directories(cfg.output_dir);
  const std::string hash = config_hash(cfg);

  std::vector<std::vector<RunRecord>> per_clip(clips.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < clips.size(); i = next++) per_clip[i] = run_clip(clips[i], cfg, hash);
  };
  const std::size_t n_threads = std::min(cfg.jobs, std::max<std::size_t>(clips.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  std::vector<RunRecord> records;
  for (auto& rs : per_clip) records.insert(records.end(), rs.begin(), rs.end());
  std::stable_sort(records.begin(), records.end(),
                   [](const RunRecord& a, const RunRecord& b) { return a.clip_id < b.clip_id; });

  write_results_csv(records, cfg.output_dir / "results.csv", cfg.record_wall_time);
  write_pairs_csv(records, cfg.output_dir / "pairs.csv");
  std::ofstream js(cfg.output_dir / "summary.json", std::ios::trunc);
  if (!js) throw IoError("cannot write summary.json in '" + cfg.output_dir.string() + "'");
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  js << summarize(records, cfg, hash, elapsed).dump(2) << '\n';
  return records;
}

enum class SweepAxis { hidden_dim, max_segments, n2_iters, segment_ms };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::hidden_dim: return "hidden_dim";
    case SweepAxis::max_segments: return "max_segments";
    case SweepAxis::n2_iters: return "n2_iters";
    case SweepAxis::segment_ms: return "segment_ms";
  }
  return "hidden_dim";
}

inline SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "hidden_dim") return SweepAxis::hidden_dim;
  if (s == "max_segments") return SweepAxis::max_segments;
  if (s == "n2_iters") return SweepAxis::n2_iters;
  if (s == "segment_ms") return SweepAxis::segment_ms;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "'");
}

/// Copy of `base` with the axis set to `value`. Integer axes require a
/// positive whole number.
inline ExperimentConfig with_axis_value(ExperimentConfig cfg, SweepAxis axis, double value) {
  const bool integral = axis != SweepAxis::segment_ms;
  if (!std::isfinite(value) || !(value > 0.0) || (integral && value != std::floor(value)))
    throw ConfigError("invalid " + std::string(to_string(axis)) + " value " + detail::format_double(value));
  switch (axis) {
    case SweepAxis::hidden_dim: cfg.hidden_dim = std::size_t(value); break;
    case SweepAxis::max_segments: cfg.max_segments = std::size_t(value); break;
    case SweepAxis::n2_iters: cfg.read.n2_iters = std::size_t(value); break;
    case SweepAxis::segment_ms: cfg.segment_ms = value; break;
  }
  cfg.validate();
  return cfg;
}

struct SweepBlock {
  double value = 0.0;
  std::vector<RunRecord> records;
};

/// One run_experiment per value, each in output_dir/<axis>-<value>/, plus a
/// long-format sweep.csv in output_dir. All values are validated first.
inline std::vector<SweepBlock> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  base.validate();
  std::vector<ExperimentConfig> configs;
  for (double v : values) {
    ExperimentConfig c = with_axis_value(base, axis, v);
    c.output_dir = base.output_dir / (std::string(to_string(axis)) + "-" + detail::format_double(v));
    configs.push_back(std::move(c));
  }

  std::vector<SweepBlock> blocks;
  for (std::size_t i = 0; i < configs.size(); ++i) blocks.push_back({values[i], run_experiment(configs[i])});

  std::filesystem::create_directories(base.output_dir);
  std::ofstream os(base.output_dir / "sweep.csv", std::ios::trunc);
  if (!os) throw IoError("cannot write sweep.csv in '" + base.output_dir.string() + "'");
  os << "axis,value," << kResultsCsvHeader << '\n';
  for (const auto& b : blocks)
    for (const auto& r : b.records)
      os << to_string(axis) << ',' << detail::format_double(b.value) << ',' << to_csv_row(r, base.record_wall_time)
         << '\n';
  return blocks;
}

}  // namespace pcam
