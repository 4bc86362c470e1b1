#pragma once

#include "dix/method.hpp"
#include "dix/models.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dix {

enum class Command { explain, evaluate, segment, sanity, ablate };

Command command_from_name(const std::string& name);
std::string command_name(Command c);

struct ModelConfig {
    // reference model ...
    std::optional<std::string> kind;
    std::uint64_t seed = 0;
    // ... or plugin + checkpoint
    std::optional<std::string> plugin;
    std::string checkpoint;
    PluginConfig plugin_config;
};

struct DatasetConfig {
    std::string kind = "synthetic_rgb"; // synthetic_rgb | synthetic_segmentation |
                                        // synthetic_10class | directory
    int count = 8;
    std::uint64_t seed = 0;
    std::size_t height = 8, width = 8;
    int train_per_class = 30, test_per_class = 30;
    std::string path; // directory kind
};

struct SanityConfig {
    std::vector<std::string> protocols = {"cascading", "independent"};
    int fixtures = 8;
    int train_per_class = 30, test_per_class = 30;
    int max_epochs = 600;
};

struct RunConfig {
    Command command = Command::evaluate;
    ModelConfig model;
    std::string method = "dix3";
    DatasetConfig dataset;
    std::vector<std::string> metrics; // empty = all
    std::string output_dir = "out";
    bool deterministic = true;
    std::uint64_t seed = 0;
    SanityConfig sanity;
};

// Parses and validates the JSON config; unknown keys are hard errors with
// field-level messages.
RunConfig load_run_config(const std::string& path, Command command);
RunConfig parse_run_config(const std::string& json_text, Command command);

ModelHandle build_model(const ModelConfig& config);

// Executes the command, writing artifacts under output_dir. Per-item failures
// are recorded in failures.csv without aborting. Returns the exit status.
int run(const RunConfig& config);

// Fixed column set of every metrics CSV row.
std::string metrics_csv_header();

} // namespace dix
