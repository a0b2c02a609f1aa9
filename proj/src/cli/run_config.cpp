#include "run_config.hpp"

#include <charconv>
#include <sstream>

#include "ssenc/error.hpp"

namespace ssenc::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string real_to_string(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? end : buf);
}

template <class F>
auto rethrow_named(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.find(key) != std::string::npos) throw;
    throw ConfigError("config key '" + key + "': " + what);
  }
}

ConfigKey count_key(std::string name, std::string help, std::size_t RunConfig::*outer) {
  return {name, std::move(help),
          [name, outer](RunConfig& c, const std::string& v) { c.*outer = parse_count(name, v); },
          [outer](const RunConfig& c) { return std::to_string(c.*outer); }};
}

ConfigKey train_count(std::string name, std::string help, std::size_t TrainConfig::*field) {
  return {name, std::move(help),
          [name, field](RunConfig& c, const std::string& v) { c.train.*field = parse_count(name, v); },
          [field](const RunConfig& c) { return std::to_string(c.train.*field); }};
}

ConfigKey train_real(std::string name, std::string help, double TrainConfig::*field) {
  return {name, std::move(help),
          [name, field](RunConfig& c, const std::string& v) { c.train.*field = parse_real(name, v); },
          [field](const RunConfig& c) { return real_to_string(c.train.*field); }};
}

ConfigKey string_key(std::string name, std::string help, std::string RunConfig::*field, bool required) {
  return {name, std::move(help), [field](RunConfig& c, const std::string& v) { c.*field = v; },
          [field](const RunConfig& c) { return c.*field; }, required};
}

ConfigKey widths_key(std::string name, std::string help, std::vector<std::size_t> ModelArch::*field) {
  return {name, std::move(help),
          [name, field](RunConfig& c, const std::string& v) { c.arch.*field = widths_from_string(name, v); },
          [field](const RunConfig& c) { return widths_to_string(c.arch.*field); }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  k.push_back(string_key("train_file", "training CSV (required)", &RunConfig::train_file, true));
  k.push_back(string_key("val_file", "validation CSV used for early stopping (required)", &RunConfig::val_file, true));
  k.push_back(string_key("test_file", "optional test CSV scored after training", &RunConfig::test_file, false));
  k.push_back(string_key("out_dir", "directory for model.json, train_log.csv and config.ini", &RunConfig::out_dir,
                         false));
  k.push_back(count_key("n_u", "number of input channels", &RunConfig::n_u));
  k.push_back(count_key("n_y", "number of output channels", &RunConfig::n_y));
  k.push_back(train_count("n_x", "model state dimension", &TrainConfig::n_x));
  k.push_back(train_count("n_a", "encoder output history length", &TrainConfig::n_a));
  k.push_back(train_count("n_b", "encoder input history length", &TrainConfig::n_b));
  k.push_back(train_count("horizon", "scored steps per section minus one (T)", &TrainConfig::horizon));
  k.push_back(train_count("burn_in", "unscored leading steps per section (k0)", &TrainConfig::burn_in));
  k.push_back(train_count("batch_size", "sections per batch", &TrainConfig::batch_size));
  k.push_back(train_real("learning_rate", "Adam step size", &TrainConfig::learning_rate));
  k.push_back(train_real("beta1", "Adam first-moment decay", &TrainConfig::beta1));
  k.push_back(train_real("beta2", "Adam second-moment decay", &TrainConfig::beta2));
  k.push_back(train_real("epsilon", "Adam denominator offset", &TrainConfig::epsilon));
  k.push_back(train_count("max_epochs", "training epochs", &TrainConfig::max_epochs));
  k.push_back({"seed", "seed for initialization and batch shuffling",
               [](RunConfig& c, const std::string& v) { c.train.seed = parse_count("seed", v); },
               [](const RunConfig& c) { return std::to_string(c.train.seed); }});
  k.push_back({"precision", "f32 or f64",
               [](RunConfig& c, const std::string& v) {
                 c.train.precision = rethrow_named("precision", [&] { return precision_from_string(v); });
               },
               [](const RunConfig& c) { return to_string(c.train.precision); }});
  k.push_back({"mode", "encoder-batch, encoder-full or simulation",
               [](RunConfig& c, const std::string& v) {
                 c.train.mode = rethrow_named("mode", [&] { return train_mode_from_string(v); });
               },
               [](const RunConfig& c) { return to_string(c.train.mode); }});
  k.push_back(train_count("final_refine_epochs", "full-batch refinement epochs after training (0 = off)",
                          &TrainConfig::final_refine_epochs));
  k.push_back({"sim_init", "free-run initialization for validation: encoder or zero",
               [](RunConfig& c, const std::string& v) {
                 c.train.sim_init = rethrow_named("sim_init", [&] { return sim_init_from_string(v); });
               },
               [](const RunConfig& c) { return to_string(c.train.sim_init); }});
  k.push_back(widths_key("encoder_hidden", "encoder hidden widths, e.g. 15 or 64,64; none = affine",
                         &ModelArch::encoder_hidden));
  k.push_back(widths_key("f_hidden", "state-transition hidden widths", &ModelArch::f_hidden));
  k.push_back(widths_key("h_hidden", "output-map hidden widths", &ModelArch::h_hidden));
  k.push_back({"init_k", "initialization bound: standard (k = 1/n_in) or sqrt (k = 1/sqrt(n_in))",
               [](RunConfig& c, const std::string& v) {
                 c.init_rule = rethrow_named("init_k", [&] { return init_rule_from_string(v); });
               },
               [](const RunConfig& c) { return to_string(c.init_rule); }});
  k.push_back({"workers", "threads for section evaluation",
               [](RunConfig& c, const std::string& v) {
                 c.train.workers = static_cast<unsigned>(parse_count("workers", v));
               },
               [](const RunConfig& c) { return std::to_string(c.train.workers); }});
  k.push_back(train_real("max_seconds", "wall-clock budget for the main phase (0 = unlimited)",
                         &TrainConfig::max_seconds));
  k.push_back({"log_wall_time", "write wall time into train_log.csv (false gives byte-identical logs)",
               [](RunConfig& c, const std::string& v) { c.log_wall_time = parse_bool("log_wall_time", v); },
               [](const RunConfig& c) { return std::string(c.log_wall_time ? "true" : "false"); }});
  return k;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

std::string widths_to_string(const std::vector<std::size_t>& w) {
  if (w.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

std::vector<std::size_t> widths_from_string(const std::string& key, const std::string& s) {
  const std::string v = trim(s);
  if (v == "none" || v.empty()) return {};
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto w = parse_count(key, trim(part));
    if (w == 0) throw ConfigError("config key '" + key + "': hidden widths must be >= 1");
    out.push_back(w);
  }
  return out;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    bool known = false;
    for (const auto& k : config_keys()) known = known || k.name == key;
    if (!known) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!out.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

RunConfig resolve_config(const std::map<std::string, std::string>& values) {
  RunConfig cfg;
  for (const auto& key : config_keys()) {
    const auto it = values.find(key.name);
    if (it != values.end()) {
      key.set(cfg, it->second);
    } else if (key.required) {
      throw ConfigError("missing required config key '" + key.name + "'");
    }
  }
  for (const auto& key : config_keys()) {
    if (key.required && key.get(cfg).empty()) throw ConfigError("config key '" + key.name + "' must not be empty");
  }
  if (cfg.n_u == 0) throw ConfigError("config key 'n_u' must be >= 1");
  if (cfg.n_y == 0) throw ConfigError("config key 'n_y' must be >= 1");
  try {
    cfg.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out = "# resolved ssenc run configuration\n";
  for (const auto& key : config_keys()) out += key.name + " = " + key.get(cfg) + "\n";
  return out;
}

}  // namespace ssenc::cli
