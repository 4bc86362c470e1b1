#include "dix/errors.hpp"
#include "dix/harness.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "path to the JSON run config")->required();
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_flag("--deterministic", args.deterministic,
                  "force deterministic mode regardless of the config");
}

int execute(dix::Command command, const CommonArgs& args) {
    dix::RunConfig config = dix::load_run_config(args.config_path, command);
    if (args.seed) config.seed = *args.seed;
    if (args.deterministic) config.deterministic = true;
    return dix::run(config);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dixray: explanation maps for vision models, their evaluation metrics, and "
                 "sanity protocols"};
    app.require_subcommand(1);

    CommonArgs explain_args, evaluate_args, segment_args, sanity_args, ablate_args;
    add_common(app.add_subcommand("explain", "write a map file and heat overlay per image"),
               explain_args);
    add_common(app.add_subcommand("evaluate", "run the metric suite and emit CSV/JSON reports"),
               evaluate_args);
    add_common(app.add_subcommand("segment",
                                  "score maps against ground-truth masks (PA/mAP/mIoU/mF1)"),
               segment_args);
    add_common(app.add_subcommand("sanity",
                                  "parameter/data randomization protocols with Spearman reports"),
               sanity_args);
    add_common(app.add_subcommand("ablate", "run the preset matrix and emit a comparison table"),
               ablate_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("explain")) return execute(dix::Command::explain, explain_args);
        if (app.got_subcommand("evaluate")) return execute(dix::Command::evaluate, evaluate_args);
        if (app.got_subcommand("segment")) return execute(dix::Command::segment, segment_args);
        if (app.got_subcommand("sanity")) return execute(dix::Command::sanity, sanity_args);
        if (app.got_subcommand("ablate")) return execute(dix::Command::ablate, ablate_args);
    } catch (const dix::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
