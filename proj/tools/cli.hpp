#pragma once
// The skbqa command line: configuration resolution and the subcommands, kept
// in a library so tests can drive them in-process.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "skbqa/agent.hpp"

namespace skbqa::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitExhausted = 2;

using KeyValues = std::map<std::string, std::string>;

// Every key a config file, SKBQA_* variable or --set flag may name.
const std::vector<std::string>& config_keys();

// `key = value` lines; '#' starts a comment. Relative path values are taken
// relative to the file's directory. Throws ConfigError naming an unknown key
// or a malformed line.
KeyValues read_config_file(const std::filesystem::path& path);

// SKBQA_<KEY> for every known key, read through `getenv`.
KeyValues read_env(const std::function<const char*(const char*)>& getenv);

struct RunConfig {
  std::filesystem::path entities;
  std::filesystem::path edges;
  std::filesystem::path index;
  std::filesystem::path prompts;
  std::filesystem::path fewshot;
  std::filesystem::path experiences;
  std::filesystem::path validator_examples;
  std::filesystem::path script;
  std::filesystem::path traces;
  std::filesystem::path questions;
  std::filesystem::path out;
  AgentConfig agent;
  std::string backend = "scripted";       // scripted | http
  std::string embedder = "deterministic";  // deterministic | http
  std::size_t workers = 1;

  // Later layers override earlier ones. Throws ConfigError naming the key of
  // any unparseable value.
  static RunConfig resolve(const std::vector<KeyValues>& layers);

  // Throws ConfigError naming the first key that is unset or whose path does
  // not exist.
  void require_paths(const std::vector<std::string>& keys) const;
  // Backend and embedder choices, checked against the credentials in the
  // environment.
  void check_services(const std::function<const char*(const char*)>& getenv) const;
};

// Runs the command line; output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::function<const char*(const char*)>& getenv);

}  // namespace skbqa::cli
