// cavity-chaos <experiment> --config <file> [--threads N] [--out <path>]

#include <iostream>

#include <CLI11.hpp>

#include "cavity/experiments.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Atom-photon dynamics in a high-Q cavity: Rabi oscillations, Lyapunov maps, "
                 "Poincare sections, predictability and exit-time fractals."};
    app.set_version_flag("--version", cavity::io::artifact_version());

    std::string experiment;
    std::string config_path;
    unsigned threads = 0;
    std::string out;
    bool print_schema = false;

    app.add_option("experiment", experiment, "rabi, lyapmap, poincare, zoutzin, fractal or exitstats")
        ->check(CLI::IsMember({"rabi", "lyapmap", "poincare", "zoutzin", "fractal", "exitstats"}));
    app.add_option("--config", config_path, "experiment config (YAML)")->check(CLI::ExistingFile);
    app.add_option("--threads", threads, "worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);
    app.add_option("--out", out, "output file; overrides output.path in the config");
    app.add_flag("--print-schema", print_schema, "print the config schema and exit");

    CLI11_PARSE(app, argc, argv);

    if (print_schema) {
        std::cout << cavity::schema_text();
        return 0;
    }
    if (experiment.empty() || config_path.empty()) {
        std::cerr << "error: an experiment and --config are required\n" << app.help();
        return 2;
    }

    try {
        const cavity::ExperimentConfig config = cavity::load_config(config_path);
        if (cavity::to_string(config.kind) != experiment) {
            std::cerr << "error: " << config_path << " describes experiment '" << cavity::to_string(config.kind)
                      << "', not '" << experiment << "'\n";
            return 2;
        }
        cavity::RunOptions options;
        options.threads = threads;
        if (!out.empty()) options.out = out;
        const cavity::RunResult result = cavity::run(config, options);
        std::cout << experiment << ": " << result.summary << '\n';
        for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
        return 0;
    }
    catch (const cavity::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
