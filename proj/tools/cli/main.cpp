#include <CLI11.hpp>
#include <cstdio>
#include <functional>

#include "commands.hpp"

namespace {

using siren::cli::ExperimentConfig;
using Handler = void (*)(const ExperimentConfig&, const std::filesystem::path&);

struct Options {
    std::string config;
    std::vector<std::string> overrides;
    std::string run_dir = "run";
};

CLI::App* add_command(CLI::App& parent, const std::string& name, const std::string& help, Options& opts,
                      std::function<void()>& action, Handler handler) {
    auto* cmd = parent.add_subcommand(name, help);
    cmd->add_option("-c,--config", opts.config, "JSON experiment config");
    cmd->add_option("-s,--set", opts.overrides, "Override a config value, e.g. training.epochs=2")
        ->allow_extra_args(false);
    cmd->add_option("-r,--run-dir", opts.run_dir, "Run directory for artifacts")->capture_default_str();
    cmd->callback([&opts, &action, handler] {
        action = [&opts, handler] {
            std::optional<std::filesystem::path> file;
            if (!opts.config.empty()) file = opts.config;
            const auto config = siren::cli::load_config(file, opts.overrides);
            handler(config, opts.run_dir);
        };
    });
    return cmd;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SIREN lifelong user-interest pipeline"};
    app.set_version_flag("--version", siren::cli::kVersion);
    app.require_subcommand(1);
    Options opts;
    std::function<void()> action;

    using namespace siren::cli;
    add_command(app, "synth", "Generate the synthetic corpus (or import corpus.path)", opts, action, cmd_synth);
    add_command(app, "quantize", "Train codebooks and assign Semantic IDs", opts, action, cmd_quantize);
    auto* index = app.add_subcommand("index", "Inverted-index tools");
    index->require_subcommand(1);
    add_command(*index, "build", "Build per-user inverted indexes", opts, action, cmd_index);
    add_command(app, "retrieve", "Calibrate the similarity range and run the GSU", opts, action, cmd_retrieve);
    add_command(app, "train", "Train the ranking model", opts, action, cmd_train);
    add_command(app, "eval", "Evaluate the trained model on the eval split", opts, action, cmd_eval);
    add_command(app, "bench", "Compare soft and hard retrieval cost", opts, action, cmd_bench);
    auto* analyze = app.add_subcommand("analyze", "Representation and label analyses");
    analyze->require_subcommand(1);
    add_command(*analyze, "mi", "Cluster/label mutual information of interest vectors", opts, action,
                cmd_analyze_mi);
    add_command(*analyze, "gain", "Information gain of SemIDs vs similarity buckets", opts, action,
                cmd_analyze_gain);
    add_command(*analyze, "dispersion", "Within-bucket CTR dispersion", opts, action, cmd_analyze_dispersion);
    add_command(*analyze, "sweep", "Eval GAUC across bucket counts", opts, action, cmd_analyze_sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        if (action) action();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return 0;
}
