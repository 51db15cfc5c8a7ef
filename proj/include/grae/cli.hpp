#pragma once

// Configuration and subcommands of the grae_lab tool.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace grae {

/// Flat `key = value` configuration with typed accessors. Unknown keys and
/// malformed values raise ConfigError.
class ConfigMap {
public:
    static ConfigMap parse(std::string_view text);
    static ConfigMap load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    /// "key=value"
    void apply(std::string_view assignment);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::size_t> get_uint_list(const std::string& key, const std::vector<std::size_t>& fallback) const;
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

    static const std::vector<std::string>& known_keys();

private:
    std::map<std::string, std::string> entries_;
};

/// File keys, then GRAE_LAB_SEED (when `env_seed` is non-null), then the
/// command-line assignments.
ConfigMap resolve_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& assignments,
                         const char* env_seed);

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    std::vector<std::string> files;  ///< relative to out_dir
    double duration_seconds = 0.0;
};

void write_manifest(const RunManifest& manifest);

RunManifest cmd_gen_data(const ConfigMap& config);
RunManifest cmd_train(const ConfigMap& config);
RunManifest cmd_uniqueness_sweep(const ConfigMap& config);
RunManifest cmd_compare_objectives(const ConfigMap& config);
RunManifest cmd_jacobian_structure(const ConfigMap& config);

/// 2 for usage, configuration and input errors, 3 for numerical failures.
int exit_code_for(const std::exception& e);

int run_cli(int argc, char** argv);

}  // namespace grae
