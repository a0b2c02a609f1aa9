#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "run_config.hpp"
#include "ssenc/data.hpp"
#include "ssenc/error.hpp"
#include "ssenc/kernels.hpp"
#include "ssenc/metrics.hpp"
#include "ssenc/model.hpp"
#include "ssenc/optim.hpp"

namespace ssenc::cli {
namespace {

namespace fs = std::filesystem;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

std::string fmt(double v, const char* spec = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void print_report(std::ostream& out, const std::string& prefix, const MetricReport& r) {
  out << prefix << "t0: " << r.t0 << '\n';
  out << prefix << "scored_samples: " << r.samples << '\n';
  out << prefix << "rms: " << fmt(r.rms) << '\n';
  out << prefix << "sigma_y: " << fmt(r.sigma_y) << '\n';
  out << prefix << "nrms: " << fmt(r.nrms) << '\n';
  out << prefix << "nrms_percent: " << fmt(100.0 * r.nrms, "%.4f") << "%\n";
}

// ---------------------------------------------------------------------------
// train

template <class T>
int train_typed(const RunConfig& cfg, const Dataset& train_set, const Dataset& val, std::ostream& out) {
  const auto [u_norm, y_norm] = fit_normalizer(train_set);
  const ModelDims dims{cfg.train.n_x, cfg.n_u, cfg.n_y, cfg.train.n_a, cfg.train.n_b};
  const auto model = SSEncoderModel<T>::create(dims, cfg.arch, u_norm, y_norm, cfg.train.seed, cfg.init_rule);
  const auto result = train(model, train_set, val, cfg.train);

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  save_model(result.model, dir / "model.json");
  write_log_csv(result.log, dir / "train_log.csv", cfg.log_wall_time);
  write_text(dir / "config.ini", to_config_text(cfg));

  out << "parameters: " << model.parameter_count() << '\n';
  out << "kernels: " << kernels::backend_name(kernels::active_backend()) << '\n';
  out << "epochs: " << result.log.records.size() << '\n';
  if (!result.log.records.empty()) {
    const auto& recs = result.log.records;
    std::size_t best = 0;
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (recs[i].is_best) best = i;
    out << "best_epoch: " << recs[best].epoch << '\n';
    out << "best_val_nrms: " << fmt(recs[best].val_nrms) << '\n';
  }
  out << "model_file: " << (dir / "model.json").string() << '\n';
  out << "log_file: " << (dir / "train_log.csv").string() << '\n';
  out << "config_file: " << (dir / "config.ini").string() << '\n';
  if (!cfg.test_file.empty()) {
    const auto test = load_csv(cfg.test_file, cfg.n_u, cfg.n_y);
    print_report(out, "test_", evaluate_simulation(result.model, test, cfg.train.sim_init));
  }
  return kExitOk;
}

int cmd_train(const std::string& config_file, const std::map<std::string, std::string>& flags, std::ostream& out) {
  auto values = config_file.empty() ? std::map<std::string, std::string>{} : parse_config_text(read_text(config_file));
  for (const auto& [k, v] : flags) values[k] = v;
  const RunConfig cfg = resolve_config(values);
  const auto train_set = load_csv(cfg.train_file, cfg.n_u, cfg.n_y);
  const auto val = load_csv(cfg.val_file, cfg.n_u, cfg.n_y);
  return cfg.train.precision == Precision::F32 ? train_typed<float>(cfg, train_set, val, out)
                                               : train_typed<double>(cfg, train_set, val, out);
}

// ---------------------------------------------------------------------------
// evaluation commands

struct EvalArgs {
  std::string model_file;
  std::string data_file;
  std::string sim_init = "encoder";
  std::size_t nstep = 0;
  bool nstep_set = false;
  std::string nstep_out = "nstep.csv";
  std::string spectrum_out;
  std::string out;
  double sample_period = 0.0;
  std::size_t channel = 1;
};

template <class F>
int with_model(const EvalArgs& a, F&& f) {
  const AnyModel any = load_model(a.model_file);
  return std::visit(
      [&](const auto& m) {
        const auto& d = m.dims();
        const auto data = load_csv(a.data_file, d.n_u, d.n_y);
        return f(m, data);
      },
      any);
}

std::optional<double> period_of(const EvalArgs& a) {
  if (a.sample_period > 0.0) return a.sample_period;
  return std::nullopt;
}

template <class M>
Spectrum spectrum_of(const M& m, const Dataset& data, const EvalArgs& a, SimInit init) {
  if (a.channel == 0 || a.channel > data.n_y()) throw ConfigError("channel must be in 1..n_y");
  const auto sim = m.simulate(data, init);
  const std::size_t rows = sim.y_hat.samples();
  std::vector<double> yh(rows), y(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    yh[t] = sim.y_hat.at(t, a.channel - 1);
    y[t] = data.y.at(sim.t0 + t, a.channel - 1);
  }
  return error_spectrum(yh, y, period_of(a));
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  const SimInit init = sim_init_from_string(a.sim_init);
  return with_model(a, [&](const auto& m, const Dataset& data) {
    const auto report = evaluate_simulation(m, data, init);
    out << "model: " << a.model_file << '\n';
    out << "data: " << a.data_file << '\n';
    out << "samples: " << data.samples() << '\n';
    out << "sim_init: " << to_string(init) << '\n';
    print_report(out, "", report);
    if (a.nstep_set) {
      const auto curve = nstep_nrms(m, data, a.nstep);
      write_nstep_csv(curve, a.nstep_out);
      out << "nstep_file: " << a.nstep_out << '\n';
      out << "nstep_sections: " << curve.sections << '\n';
    }
    if (!a.spectrum_out.empty()) {
      write_spectrum_csv(spectrum_of(m, data, a, init), a.spectrum_out);
      out << "spectrum_file: " << a.spectrum_out << '\n';
    }
    return kExitOk;
  });
}

int cmd_simulate(const EvalArgs& a, std::ostream& out) {
  const SimInit init = sim_init_from_string(a.sim_init);
  return with_model(a, [&](const auto& m, const Dataset& data) {
    const auto sim = m.simulate(data, init);
    std::ofstream csv(a.out, std::ios::binary);
    if (!csv) throw Error("cannot write '" + a.out + "'");
    csv << "t";
    for (std::size_t c = 1; c <= data.n_y(); ++c) csv << ",y_hat" << c;
    for (std::size_t c = 1; c <= data.n_y(); ++c) csv << ",y" << c;
    csv << '\n';
    char buf[32];
    for (std::size_t t = 0; t < sim.y_hat.samples(); ++t) {
      csv << sim.t0 + t;
      for (double v : sim.y_hat.row(t)) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        csv << ',' << buf;
      }
      for (double v : data.y.row(sim.t0 + t)) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        csv << ',' << buf;
      }
      csv << '\n';
    }
    out << "t0: " << sim.t0 << '\n';
    out << "predictions: " << sim.y_hat.samples() << '\n';
    out << "output_file: " << a.out << '\n';
    return kExitOk;
  });
}

int cmd_nstep(const EvalArgs& a, std::ostream& out) {
  return with_model(a, [&](const auto& m, const Dataset& data) {
    const auto curve = nstep_nrms(m, data, a.nstep);
    write_nstep_csv(curve, a.out);
    double worst = 0.0;
    for (double v : curve.values) worst = std::max(worst, v);
    out << "n_max: " << a.nstep << '\n';
    out << "sections: " << curve.sections << '\n';
    out << "sigma_y: " << fmt(curve.sigma_y) << '\n';
    out << "max_nrms: " << fmt(worst) << '\n';
    out << "output_file: " << a.out << '\n';
    return kExitOk;
  });
}

int cmd_spectrum(const EvalArgs& a, std::ostream& out) {
  const SimInit init = sim_init_from_string(a.sim_init);
  return with_model(a, [&](const auto& m, const Dataset& data) {
    const auto s = spectrum_of(m, data, a, init);
    write_spectrum_csv(s, a.out);
    out << "bins: " << s.frequency.size() / 2 + 1 << '\n';
    out << "output_file: " << a.out << '\n';
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string system_file;
  std::string input = "filtered";
  std::size_t samples = 10000;
  double amplitude = 1.0;
  double pole = 0.8;
  std::size_t lines = 50;
  double max_fraction = 0.5;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const SyntheticSystem sys = system_from_json(read_text(a.system_file));
  if (a.samples == 0) throw ConfigError("samples must be >= 1");
  std::mt19937_64 streams(a.seed);
  const std::uint64_t input_seed = streams(), noise_seed = streams();
  Signal u;
  if (a.input == "gaussian") {
    u = gaussian_input(a.samples, sys.n_u(), a.amplitude, input_seed);
  } else if (a.input == "filtered") {
    u = filtered_gaussian_input(a.samples, sys.n_u(), a.amplitude, a.pole, input_seed);
  } else if (a.input == "multisine") {
    u = multisine_input(a.samples, sys.n_u(), a.amplitude, a.lines, a.max_fraction, input_seed);
  } else {
    throw ConfigError("input must be gaussian, filtered or multisine, got '" + a.input + "'");
  }
  const Dataset d = generate(sys, u, noise_seed);
  save_csv(d, a.out);
  out << "samples: " << d.samples() << '\n';
  out << "n_u: " << d.n_u() << '\n';
  out << "n_y: " << d.n_y() << '\n';
  out << "output_file: " << a.out << '\n';
  return kExitOk;
}

void add_eval_common(CLI::App* sub, EvalArgs& a) {
  sub->add_option("--model", a.model_file, "model JSON file")->required();
  sub->add_option("--data", a.data_file, "data CSV file")->required();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Encoder-initialized multiple-shooting identification of nonlinear state-space models", "ssenc"};
  app.require_subcommand(1);
  std::string kernel_choice = "auto";
  app.add_option("--kernels", kernel_choice, "arithmetic kernels: auto, scalar or avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model from a run configuration");
  std::string config_file;
  train_cmd->add_option("--config", config_file, "run configuration file (key = value)");
  std::map<std::string, std::string> flag_storage;
  std::vector<std::pair<std::string, CLI::Option*>> flag_opts;
  for (const auto& key : config_keys()) {
    flag_opts.emplace_back(key.name, train_cmd->add_option("--" + key.name, flag_storage[key.name], key.help));
  }

  // evaluate / simulate / nstep / spectrum
  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "print RMS / NRMS of a free-run simulation");
  add_eval_common(eval_cmd, eval);
  eval_cmd->add_option("--sim_init", eval.sim_init, "encoder or zero")->check(CLI::IsMember({"encoder", "zero"}));
  auto* nstep_opt = eval_cmd->add_option("--nstep", eval.nstep, "also write the n-step NRMS curve up to this n");
  eval_cmd->add_option("--nstep_out", eval.nstep_out, "n-step curve CSV path");
  eval_cmd->add_option("--spectrum_out", eval.spectrum_out, "error spectrum CSV path");
  eval_cmd->add_option("--sample_period", eval.sample_period, "sample period in seconds for the spectrum");
  eval_cmd->add_option("--channel", eval.channel, "output channel for the spectrum (1-based)");

  EvalArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "write free-run predictions as CSV");
  add_eval_common(sim_cmd, sim);
  sim_cmd->add_option("--sim_init", sim.sim_init, "encoder or zero")->check(CLI::IsMember({"encoder", "zero"}));
  sim_cmd->add_option("--out", sim.out, "predictions CSV path")->required();

  EvalArgs nstep;
  auto* nstep_cmd = app.add_subcommand("nstep", "write the n-step NRMS curve as CSV");
  add_eval_common(nstep_cmd, nstep);
  nstep_cmd->add_option("--n_max", nstep.nstep, "largest n")->required();
  nstep_cmd->add_option("--out", nstep.out, "curve CSV path")->required();

  EvalArgs spec;
  auto* spec_cmd = app.add_subcommand("spectrum", "write the DFT magnitude of the simulation error as CSV");
  add_eval_common(spec_cmd, spec);
  spec_cmd->add_option("--sim_init", spec.sim_init, "encoder or zero")->check(CLI::IsMember({"encoder", "zero"}));
  spec_cmd->add_option("--sample_period", spec.sample_period, "sample period in seconds (bins in Hz)");
  spec_cmd->add_option("--channel", spec.channel, "output channel (1-based)");
  spec_cmd->add_option("--out", spec.out, "spectrum CSV path")->required();

  // generate
  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "simulate a synthetic system and write a CSV dataset");
  gen_cmd->add_option("--system", gen.system_file, "system description JSON")->required();
  gen_cmd->add_option("--input", gen.input, "excitation: gaussian, filtered or multisine");
  gen_cmd->add_option("--samples", gen.samples, "number of samples");
  gen_cmd->add_option("--amplitude", gen.amplitude, "input standard deviation");
  gen_cmd->add_option("--pole", gen.pole, "low-pass pole radius for the filtered input");
  gen_cmd->add_option("--lines", gen.lines, "excited lines for the multisine");
  gen_cmd->add_option("--max_fraction", gen.max_fraction, "multisine band edge as a fraction of Nyquist");
  gen_cmd->add_option("--seed", gen.seed, "seed for the input and the noise");
  gen_cmd->add_option("--out", gen.out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (kernel_choice == "scalar") kernels::set_backend(kernels::Backend::Scalar);
    if (kernel_choice == "avx2") kernels::set_backend(kernels::Backend::Avx2);
    if (train_cmd->parsed()) {
      std::map<std::string, std::string> flags;
      for (const auto& [name, opt] : flag_opts)
        if (opt->count() > 0) flags[name] = flag_storage[name];
      return cmd_train(config_file, flags, out);
    }
    if (eval_cmd->parsed()) {
      eval.nstep_set = nstep_opt->count() > 0;
      return cmd_evaluate(eval, out);
    }
    if (sim_cmd->parsed()) return cmd_simulate(sim, out);
    if (nstep_cmd->parsed()) return cmd_nstep(nstep, out);
    if (spec_cmd->parsed()) return cmd_spectrum(spec, out);
    if (gen_cmd->parsed()) return cmd_generate(gen, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ssenc::cli
