#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "spinqsd/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"spin-bath stochastic state simulator"};
    std::string command;
    spinqsd::cli::Options opts;
    std::string out_dir;
    std::uint64_t seed = 0;
    app.add_option("command", command, "simulate | oracle-exact | oracle-dephasing | convergence | sample-stats | validate-config")
        ->required();
    app.add_option("--config", opts.config_path, "run configuration (JSON)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--threads", opts.threads, "worker threads, 0 = auto");
    auto* seed_opt = app.add_option("--seed", seed, "master seed override");
    app.add_option("--log-level", opts.log_level, "trace | debug | info | warn | error | off");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e);
            std::cout << spinqsd::cli::usage();
            return 0;
        }
        std::cerr << e.what() << "\n" << spinqsd::cli::usage();
        return spinqsd::cli::kUsage;
    }
    if (*out_opt) opts.out_dir = out_dir;
    if (*seed_opt) opts.seed = seed;
    spdlog::set_level(spdlog::level::from_str(opts.log_level));
    spdlog::set_pattern("[%l] %v");
    return spinqsd::cli::dispatch(command, opts, std::cout, std::cerr);
}
