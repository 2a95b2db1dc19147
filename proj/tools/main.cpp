#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cfmimo/errors.hpp"
#include "cfmimo/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Cell-free massive MIMO uplink max-min SINR simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::int64_t drops = 0;
    std::string output;
    bool quiet = false;

    CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("--config", config_path, "Config file path")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed, "Override the master seed");
    CLI::Option* drops_opt = run->add_option("--drops", drops, "Override the number of drops");
    CLI::Option* out_opt = run->add_option("--output", output, "Override the output directory");
    run->add_flag("--quiet", quiet, "Suppress progress output on standard error");

    std::string vconfig;
    CLI::App* validate = app.add_subcommand("validate", "Check a config file and exit");
    validate->add_option("--config", vconfig, "Config file path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            cfmimo::ExperimentSpec spec = cfmimo::load_config(config_path);
            if (*seed_opt) spec.cfg.seed = seed;
            if (*drops_opt) {
                if (drops < 1) throw cfmimo::InvalidConfig("--drops must be >= 1");
                spec.n_drops = static_cast<std::size_t>(drops);
            }
            if (*out_opt) spec.output_dir = output;
            spec.quiet = quiet;
            spec.validate();
            const std::vector<cfmimo::DropResult> results = cfmimo::run_experiment(spec);
            cfmimo::write_outputs(spec, results);
            if (!quiet) std::cerr << "wrote " << spec.output_dir << "/cdf.csv\n";
        } else {
            cfmimo::ExperimentSpec spec = cfmimo::load_config(vconfig);
            spec.validate();
            std::cout << "ok\n";
        }
    } catch (const cfmimo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const cfmimo::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
