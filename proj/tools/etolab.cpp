// etolab: theorem-verification harness for analogy-based evolutionary
// transfer optimization. Subcommands: verify, enumerate, figdata, race.
// Exit codes: 0 success/pass, 1 experiment failure, 2 usage or config error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "eto/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"analogy-based evolutionary transfer optimization lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    unsigned jobs = 0;
    std::optional<std::string> out_override;
    bool no_timestamp = false;

    app.add_option("--config", config_path, "configuration file (sectioned key = value)");
    app.add_option("--seed", seed_override, "override the master seed");
    app.add_option("--jobs", jobs, "worker threads (default: available parallelism)");
    app.add_option("--out", out_override, "override the output directory");
    app.add_flag("--no-timestamp", no_timestamp, "omit timestamps for byte-identical reruns");

    auto* verify = app.add_subcommand("verify", "run the selected theorem experiments");
    auto* enumerate = app.add_subcommand("enumerate", "list the 15 method compositions");
    auto* figdata = app.add_subcommand("figdata", "emit CSV data behind one figure");
    auto* race = app.add_subcommand("race", "run the paired end-to-end transfer races");
    for (auto* sub : {verify, enumerate, figdata, race}) sub->fallthrough();

    std::string figure;
    figdata->add_option("figure", figure, "figure id (fig2..fig6)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        eto::harness::RunConfig config;
        if (!config_path.empty()) config = eto::harness::load_config(config_path);
        if (seed_override) config.seed = *seed_override;

        eto::harness::OutputOptions options;
        options.out_dir = out_override ? *out_override : config.out_dir;
        options.timestamp = !no_timestamp;

        if (verify->parsed())
            return eto::harness::run_verify(config, options, jobs, std::cout);
        if (enumerate->parsed()) return eto::harness::run_enumerate(std::cout);
        if (figdata->parsed())
            return eto::harness::run_figdata(figure, config, options, std::cout);
        if (race->parsed()) return eto::harness::run_race(config, options, jobs, std::cout);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const eto::ConfigParse& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const eto::UnknownFigure& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const eto::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}
