// config.hpp
//
// Experiment and toy-game configuration files (JSON). Every module
// invariant is checked on load; failures carry the JSON path of the
// offending field, and syntax errors carry line and column.
#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "perfscen/environment.hpp"
#include "perfscen/fixed_point.hpp"
#include "perfscen/game.hpp"

namespace perfscen {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::uint64_t seed{0};
    RunSettings run;
    BaselineDistribution baseline{GaussianMixtureBaseline{}};
    ResponseParams response;

    EnvironmentMap environment() const { return EnvironmentMap(baseline, response); }
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

game::GameSpec parse_game_config(const nlohmann::json& j);
game::GameSpec load_game_config(const std::filesystem::path& path);

/// Reads and parses a JSON file; syntax errors report line and column.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace perfscen
