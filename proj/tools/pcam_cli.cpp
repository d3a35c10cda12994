// pcam: command-line front end for the predictive-coding audio memory.
//
// Exit codes:
//   0  success
//   1  runtime failure (I/O, malformed file, divergence, shape mismatch)
//   2  usage or configuration error
//   3  gradcheck found a trial above tolerance
//
// Data goes to stdout; failures print one line to stderr:
//   error kind=<kind> message="<text>"

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcam/pcam.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitGradcheck = 3;

void report_error(const std::string& kind, const std::string& message) {
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += (c == '\n') ? ' ' : c;
  }
  std::cerr << "error kind=" << kind << " message=\"" << escaped << "\"\n";
}

/// Options shared by `write` that override an optional --config file.
struct WriteOptions {
  std::string input, model_out, config_path;
  std::optional<std::size_t> epochs, n1, hidden, max_segments;
  std::optional<double> eta_h, lr, segment_ms, init_std;
  std::optional<std::uint32_t> target_rate;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> f, h, cue_init, kernel;
  bool normalize_peak = false;
};

pcam::ExperimentConfig resolve(const WriteOptions& o) {
  pcam::ExperimentConfig c = o.config_path.empty() ? pcam::ExperimentConfig{} : pcam::load_config(o.config_path);
  if (o.epochs) c.write.epochs = *o.epochs;
  if (o.n1) c.write.n1_iters = *o.n1;
  if (o.hidden) c.hidden_dim = *o.hidden;
  if (o.max_segments) c.max_segments = *o.max_segments;
  if (o.eta_h) c.write.eta_h = *o.eta_h;
  if (o.lr) c.write.eta_w = *o.lr;
  if (o.segment_ms) c.segment_ms = *o.segment_ms;
  if (o.init_std) c.write.weight_init_std = *o.init_std;
  if (o.target_rate) c.target_rate = *o.target_rate;
  if (o.seed) c.seed = *o.seed;
  if (o.f) c.output_activation = pcam::parse_activation(*o.f);
  if (o.h) c.hidden_activation = pcam::parse_activation(*o.h);
  if (o.cue_init) c.write.cue_init = pcam::parse_cue_init(*o.cue_init);
  if (o.kernel) c.write.kernel = pcam::parse_kernel(*o.kernel);
  if (o.normalize_peak) c.normalize_peak = true;
  c.validate();
  return c;
}

int cmd_write(const WriteOptions& o) {
  const pcam::ExperimentConfig c = resolve(o);
  const pcam::SegmentedSequence seq = pcam::prepare_clip(o.input, c);
  pcam::MemoryModel model =
      pcam::init_model(c.hidden_dim, seq.segment_len, c.output_activation, c.hidden_activation, c.seed, c.write);
  auto result = pcam::write_sequence(std::move(model), seq, c.write, [](std::size_t epoch, double e) {
    std::cout << "epoch=" << epoch << " energy=" << pcam::detail::format_double(e) << '\n' << std::flush;
  });
  pcam::save_model(result.model, o.model_out);
  std::cout << "model=" << o.model_out << " segments=" << seq.count() << " segment_len=" << seq.segment_len
            << " hidden_dim=" << c.hidden_dim << " sample_rate=" << seq.sample_rate << '\n';
  return 0;
}

struct ReadOptions {
  std::string model_in, output, mode = "closed_loop", encoding = "float32", prime_wav;
  std::size_t segments = 20, n2 = 500, prime = 0;
  double eta_x = 0.1, eta_h = 0.05, prime_segment_ms = 200.0;
  std::uint32_t sample_rate = 16000;
};

int cmd_read(const ReadOptions& o) {
  pcam::ReadConfig rc;
  rc.mode = pcam::parse_read_mode(o.mode);
  rc.n_segments = o.segments;
  rc.n2_iters = o.n2;
  rc.eta_x = o.eta_x;
  rc.eta_h = o.eta_h;
  rc.prime_segments = o.prime;
  if (o.sample_rate == 0) throw pcam::ConfigError("--sample-rate must be > 0");
  if (o.encoding != "float32" && o.encoding != "pcm16") throw pcam::ConfigError("--encoding must be float32 or pcm16");
  rc.validate();

  const pcam::MemoryModel model = pcam::load_model(o.model_in);
  std::optional<pcam::SegmentedSequence> primer;
  if (o.prime > 0) {
    if (o.prime_wav.empty()) throw pcam::ConfigError("--prime requires --prime-wav");
    primer = pcam::segment(pcam::resample(pcam::load_wav(o.prime_wav), o.sample_rate), o.prime_segment_ms);
  }
  const pcam::RecallResult r = pcam::read_sequence(model, rc, primer ? &primer->segments : nullptr);
  for (std::size_t mu = 0; mu < r.energy_trace.size(); ++mu) {
    const auto& t = r.energy_trace[mu];
    std::cout << "segment=" << mu + 1 << " final_energy=" << pcam::detail::format_double(t.empty() ? 0.0 : t.back())
              << '\n';
  }
  pcam::save_wav(pcam::reassemble(pcam::as_sequence(r, o.sample_rate)), o.output,
                 o.encoding == "pcm16" ? pcam::WavEncoding::pcm16 : pcam::WavEncoding::float32);
  std::cout << "recalled=" << o.output << " mode=" << pcam::to_string(rc.mode) << " segments=" << rc.n_segments
            << '\n';
  return 0;
}

nlohmann::json to_json(const pcam::FidelityReport& rep) {
  using pcam::detail::json_number;
  nlohmann::json j;
  j["n_segments"] = rep.n_segments;
  j["clip_cosine"] = json_number(rep.clip_cosine);
  j["clip_snr_db"] = json_number(rep.clip_snr_db);
  j["per_segment"] = nlohmann::json::array();
  for (const auto& s : rep.per_segment)
    j["per_segment"].push_back({{"mse", json_number(s.mse)},
                                {"cosine", json_number(s.cosine)},
                                {"snr_db", json_number(s.snr_db)},
                                {"xcorr_peak", json_number(s.xcorr_peak)},
                                {"xcorr_lag", s.xcorr_lag}});
  return j;
}

struct EvalOptions {
  std::string original, recalled;
  double segment_ms = 200.0, max_lag_ms = 10.0;
  bool crop = false;
};

int cmd_eval(const EvalOptions& o) {
  pcam::Waveform a = pcam::load_wav(o.original);
  pcam::Waveform b = pcam::load_wav(o.recalled);
  if (b.sample_rate != a.sample_rate) b = pcam::resample(b, a.sample_rate);
  if (a.size() != b.size()) {
    if (!o.crop)
      throw pcam::DimensionError("length mismatch: original has " + std::to_string(a.size()) + " samples, recalled " +
                                 std::to_string(b.size()) + " (use --crop to compare the common prefix)");
    const std::size_t n = std::min(a.size(), b.size());
    a.samples.resize(n);
    b.samples.resize(n);
  }
  const auto sa = pcam::segment(a, o.segment_ms);
  const auto sb = pcam::segment(b, o.segment_ms);
  const auto rep = pcam::fidelity_report(sa, sb, pcam::default_max_lag(a.sample_rate, o.max_lag_ms));
  std::cout << to_json(rep).dump(2) << '\n';
  return 0;
}

struct RunOptions {
  std::string config_path, input, output_dir;
  std::optional<std::size_t> jobs;
};

pcam::ExperimentConfig resolve(const RunOptions& o) {
  pcam::ExperimentConfig c = pcam::load_config(o.config_path);
  if (!o.input.empty()) c.input = o.input;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (o.jobs) c.jobs = *o.jobs;
  c.validate();
  return c;
}

void print_records(const std::vector<pcam::RunRecord>& records) {
  for (const auto& r : records) {
    std::cout << "clip=" << r.clip_id << " mode=" << pcam::to_string(r.mode);
    if (r.ok())
      std::cout << " clip_cosine=" << pcam::detail::csv_number(r.clip_cosine)
                << " clip_snr_db=" << pcam::detail::csv_number(r.clip_snr_db) << " status=ok\n";
    else
      std::cout << " status=error\n";
  }
}

int cmd_run(const RunOptions& o) {
  const auto c = resolve(o);
  const auto records = pcam::run_experiment(c);
  print_records(records);
  std::cout << "results=" << (c.output_dir / "results.csv").string()
            << " summary=" << (c.output_dir / "summary.json").string() << '\n';
  return 0;
}

struct SweepOptions {
  RunOptions run;
  std::string axis;
  std::vector<double> values;
};

int cmd_sweep(const SweepOptions& o) {
  const auto c = resolve(o.run);
  const auto blocks = pcam::sweep(c, pcam::parse_sweep_axis(o.axis), o.values);
  for (const auto& b : blocks) {
    std::cout << "value=" << pcam::detail::format_double(b.value) << '\n';
    print_records(b.records);
  }
  std::cout << "sweep=" << (c.output_dir / "sweep.csv").string() << '\n';
  return 0;
}

struct GradcheckOptions {
  std::size_t trials = 20, hidden = 8, seglen = 4;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
  std::string fault = "none";
};

int cmd_gradcheck(const GradcheckOptions& o) {
  if (o.trials < 1) throw pcam::ConfigError("--trials must be >= 1");
  if (o.hidden < 1 || o.hidden > 32) throw pcam::ConfigError("--hidden must be in [1, 32]");
  if (o.seglen < 1 || o.seglen > 16) throw pcam::ConfigError("--seglen must be in [1, 16]");
  if (!(o.tolerance > 0.0)) throw pcam::ConfigError("--tolerance must be > 0");
  const pcam::InjectedFault fault = pcam::parse_fault(o.fault);
  std::size_t failures = 0;
  for (std::size_t t = 0; t < o.trials; ++t) {
    const auto r = pcam::gradcheck_trial(o.seed + t, o.hidden, o.seglen, fault);
    const bool pass = r.worst() <= o.tolerance;
    failures += pass ? 0 : 1;
    std::cout << "trial=" << t + 1 << " hidden_err=" << pcam::detail::format_double(r.hidden_error)
              << " w_out_err=" << pcam::detail::format_double(r.w_out_error)
              << " w_hidden_err=" << pcam::detail::format_double(r.w_hidden_error)
              << " worst=" << pcam::detail::format_double(r.worst()) << " pass=" << (pass ? "true" : "false") << '\n';
  }
  std::cout << "trials=" << o.trials << " failures=" << failures << '\n';
  return failures == 0 ? 0 : kExitGradcheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive-coding memory for audio sequences"};
  app.require_subcommand(1);

  WriteOptions wo;
  auto* write = app.add_subcommand("write", "Memorize a WAV clip into a model file");
  write->add_option("-i,--input", wo.input, "Input WAV")->required();
  write->add_option("-m,--model", wo.model_out, "Model file to write")->required();
  write->add_option("--config", wo.config_path, "Config file providing defaults");
  write->add_option("--epochs", wo.epochs, "Write epochs (default 100)");
  write->add_option("--n1", wo.n1, "Hidden inference steps per segment (default 100)");
  write->add_option("--hidden", wo.hidden, "Hidden units H (default 1600)");
  write->add_option("--lr", wo.lr, "Weight learning rate (default 1e-4)");
  write->add_option("--eta-h", wo.eta_h, "Hidden inference step size (default 0.05)");
  write->add_option("--segment-ms", wo.segment_ms, "Segment length in ms (default 200)");
  write->add_option("--max-segments", wo.max_segments, "Segments kept (default 20)");
  write->add_option("--target-rate", wo.target_rate, "Resample rate in Hz, 0 keeps the file rate (default 16000)");
  write->add_option("--seed", wo.seed, "Initialization seed (default 0)");
  write->add_option("--init-std", wo.init_std, "Initial weight std (default 1/sqrt(H))");
  write->add_option("--cue-init", wo.cue_init, "zeros or gaussian (default gaussian)");
  write->add_option("--output-activation", wo.f, "Output nonlinearity f: tanh, identity, relu (default tanh)");
  write->add_option("--hidden-activation", wo.h, "Hidden nonlinearity g: tanh, identity, relu (default tanh)");
  write->add_option("--kernel", wo.kernel, "auto, direct or gram");
  write->add_flag("--normalize-peak", wo.normalize_peak, "Peak-normalize before writing");

  ReadOptions ro;
  auto* read = app.add_subcommand("read", "Recall a clip from a model file");
  read->add_option("-m,--model", ro.model_in, "Model file")->required();
  read->add_option("-o,--output", ro.output, "Recalled WAV to write")->required();
  read->add_option("--mode", ro.mode, "open_loop or closed_loop (default closed_loop)");
  read->add_option("--segments", ro.segments, "Segments to recall (default 20)");
  read->add_option("--n2", ro.n2, "Relaxation iterations per segment (default 500)");
  read->add_option("--eta-x", ro.eta_x, "Output relaxation step (default 0.1)");
  read->add_option("--eta-h", ro.eta_h, "Hidden relaxation step (default 0.05)");
  read->add_option("--sample-rate", ro.sample_rate, "Sample rate of the output WAV (default 16000)");
  read->add_option("--encoding", ro.encoding, "float32 or pcm16 (default float32)");
  read->add_option("--prime", ro.prime, "Prime with the first k ground-truth segments (default 0)");
  read->add_option("--prime-wav", ro.prime_wav, "Ground-truth WAV for --prime");
  read->add_option("--prime-segment-ms", ro.prime_segment_ms, "Segment length of --prime-wav (default 200)");

  EvalOptions eo;
  auto* eval = app.add_subcommand("eval", "Compare an original and a recalled WAV");
  eval->add_option("original", eo.original, "Original WAV")->required();
  eval->add_option("recalled", eo.recalled, "Recalled WAV")->required();
  eval->add_option("--segment-ms", eo.segment_ms, "Segment length in ms (default 200)");
  eval->add_option("--max-lag-ms", eo.max_lag_ms, "Cross-correlation lag window (default 10)");
  eval->add_flag("--crop", eo.crop, "Compare the common prefix when lengths differ");

  RunOptions uo;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("-c,--config", uo.config_path, "Config file")->required();
  run->add_option("--input", uo.input, "Override input");
  run->add_option("--output-dir", uo.output_dir, "Override output_dir");
  run->add_option("--jobs", uo.jobs, "Clips processed in parallel (default 1)");

  SweepOptions so;
  auto* sweep = app.add_subcommand("sweep", "Repeat an experiment over values of one parameter");
  sweep->add_option("-c,--config", so.run.config_path, "Config file")->required();
  sweep->add_option("--input", so.run.input, "Override input");
  sweep->add_option("--output-dir", so.run.output_dir, "Override output_dir");
  sweep->add_option("--jobs", so.run.jobs, "Clips processed in parallel (default 1)");
  sweep->add_option("--axis", so.axis, "hidden_dim, max_segments, n2_iters or segment_ms")->required();
  sweep->add_option("--values", so.values, "Comma-separated values")->required()->delimiter(',');

  GradcheckOptions go;
  auto* grad = app.add_subcommand("gradcheck", "Check the update rules against finite differences");
  grad->add_option("--trials", go.trials, "Random instances (default 20)");
  grad->add_option("--hidden", go.hidden, "Hidden units, at most 32 (default 8)");
  grad->add_option("--seglen", go.seglen, "Segment length, at most 16 (default 4)");
  grad->add_option("--tolerance", go.tolerance, "Relative error bound (default 1e-5)");
  grad->add_option("--seed", go.seed, "First trial seed (default 0)");
  grad->add_option("--inject-fault", go.fault, "none, hidden_sign or missing_hidden_derivative")->group("");

  std::string print_config_path;
  auto* print_config = app.add_subcommand("print-config", "Print a complete config with every default");
  print_config->add_option("--config", print_config_path, "Start from this config instead of the defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kExitUsage;
  }

  try {
    if (*write) return cmd_write(wo);
    if (*read) return cmd_read(ro);
    if (*eval) return cmd_eval(eo);
    if (*run) return cmd_run(uo);
    if (*sweep) return cmd_sweep(so);
    if (*grad) return cmd_gradcheck(go);
    if (*print_config) {
      const auto c = print_config_path.empty() ? pcam::ExperimentConfig{} : pcam::load_config(print_config_path);
      std::cout << pcam::to_text(c);
      return 0;
    }
  } catch (const pcam::ConfigError& e) {
    report_error(e.kind(), e.what());
    return kExitUsage;
  } catch (const pcam::Error& e) {
    report_error(e.kind(), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
