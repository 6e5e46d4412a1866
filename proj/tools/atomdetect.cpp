// atomdetect: command-line front end.
//
//   atomdetect <scan|detect|optimize|propagate|validate> [--config FILE]
//              [--out DIR] [--seed N] [--threads N]
//
// Precedence: built-in defaults < config file < ATOMDETECT_<SECTION>__<KEY>
// environment overrides < command-line flags. The flags themselves may also
// come from ATOMDETECT_CONFIG, ATOMDETECT_OUT, ATOMDETECT_SEED and
// ATOMDETECT_THREADS.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atomdetect/commands.hpp"
#include "atomdetect/config.hpp"
#include "atomdetect/errors.hpp"

extern char** environ;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

std::vector<std::string> environment()
{
    std::vector<std::string> env;
    for (char** e = environ; e && *e; ++e)
        env.emplace_back(*e);
    return env;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Laser-profile design for fluorescence detection of slow atoms"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;

    const char* names[] = {"scan", "detect", "optimize", "propagate", "validate"};
    const char* help[] = {
        "one-channel absorption over the velocity grid",
        "two-channel detection probability over the velocity grid",
        "optimize the segment detunings and Rabi frequencies",
        "propagate a wavepacket through the laser",
        "compare one- and two-channel absorption",
    };
    for (int i = 0; i < 5; ++i) {
        auto* sub = app.add_subcommand(names[i], help[i]);
        sub->add_option("--config", config_path, "YAML config file")->envname("ATOMDETECT_CONFIG");
        sub->add_option("--out", out_dir, "output directory (overrides output.directory)")->envname("ATOMDETECT_OUT");
        sub->add_option("--seed", seed, "optimizer seed (overrides optimize.seed)")->envname("ATOMDETECT_SEED");
        sub->add_option("--threads", threads, "worker threads")
            ->envname("ATOMDETECT_THREADS")
            ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    atomdetect::config::RunConfig cfg;
    try {
        if (!config_path.empty())
            cfg = atomdetect::config::load(config_path);
        cfg = atomdetect::config::apply_environment(cfg, environment());
        if (seed)
            cfg.optimize.seed = *seed;
        if (threads)
            cfg.threads = *threads;
        if (!out_dir.empty())
            cfg.output.directory = out_dir;
    } catch (const atomdetect::config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        const auto result = atomdetect::cli::run_command(command, cfg, cfg.output.directory);
        std::cout << result.summary << '\n';
        for (const auto& f : result.files)
            std::cout << "wrote " << f.string() << '\n';
    } catch (const atomdetect::config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const atomdetect::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::domain_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
