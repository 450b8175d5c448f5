#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "framp/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"FRAMP desk-scale federated learning simulator"};

    std::string config_path;
    std::string method, out;
    int64_t seed = -1;
    int64_t rounds = -1;
    int64_t eval_every = -1;

    app.add_option("--config", config_path, "experiment config file (key=value lines)")
        ->required();
    app.add_option("--method", method, "override method variant");
    app.add_option("--seed", seed, "override seed");
    app.add_option("--rounds", rounds, "override round count");
    app.add_option("--out", out, "override output directory");
    app.add_option("--eval-every", eval_every, "override evaluation cadence");

    CLI11_PARSE(app, argc, argv);

    framp::experiment::Config cfg;
    try {
        cfg = framp::experiment::parse_config_file(config_path);
        if (!method.empty()) framp::experiment::apply_key(cfg, "method", method, 0);
        if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
        if (rounds >= 0) cfg.rounds = static_cast<size_t>(rounds);
        if (!out.empty()) cfg.out = out;
        if (eval_every >= 0) cfg.eval_every = static_cast<size_t>(eval_every);
    } catch (const framp::experiment::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        int rc = framp::experiment::run_experiment(cfg);
        if (rc == 0)
            std::cout << "done: method=" << cfg.method << " seed=" << cfg.seed
                      << " rounds=" << cfg.rounds << " out=" << cfg.out << "\n";
        return rc;
    } catch (const framp::experiment::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
