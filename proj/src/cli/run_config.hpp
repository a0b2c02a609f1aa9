#pragma once

// Flat, typed key = value run configuration for `ssenc train`.
//
//   # comment
//   train_file = data/train.csv
//   horizon = 80
//
// Every key is also accepted as a `--key value` flag; flags override the file.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ssenc/model.hpp"
#include "ssenc/net.hpp"
#include "ssenc/optim.hpp"

namespace ssenc::cli {

struct RunConfig {
  std::string train_file;
  std::string val_file;
  std::string test_file;
  std::string out_dir = "run";
  std::size_t n_u = 1;
  std::size_t n_y = 1;
  TrainConfig train;
  ModelArch arch{{15}, {15}, {15}};
  InitRule init_rule = InitRule::Standard;
  bool log_wall_time = true;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool required = false;
};

const std::vector<ConfigKey>& config_keys();

// Parses `key = value` lines. Throws ConfigError with the line number on
// malformed lines and naming the key on unknown or duplicate keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Applies values over the defaults; throws ConfigError naming the first bad
// or missing required key.
RunConfig resolve_config(const std::map<std::string, std::string>& values);

// Serializes every key, in table order, in the parse_config_text grammar.
std::string to_config_text(const RunConfig& cfg);

std::string widths_to_string(const std::vector<std::size_t>& w);
std::vector<std::size_t> widths_from_string(const std::string& key, const std::string& s);

}  // namespace ssenc::cli
