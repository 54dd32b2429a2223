#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "eto/config.hpp"
#include "eto/figdata.hpp"
#include "eto/lab.hpp"

namespace eto::harness {

struct OutputOptions {
    std::string out_dir = "reports";
    bool timestamp = true;  // suppress for byte-identical reruns
};

namespace detail {

inline std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

}  // namespace detail

inline nlohmann::json report_json(const lab::ExperimentReport& report, bool timestamp) {
    nlohmann::json j;
    j["experiment"] = report.experiment;
    j["trials"] = report.trials;
    j["verdict"] = report.pass ? "pass" : "fail";
    j["tolerance"] = report.tolerance;
    j["master_seed"] = report.master_seed;
    j["statistics"] = report.statistics;
    j["notes"] = report.notes;
    if (timestamp) j["generated_at"] = detail::now_iso8601();
    return j;
}

inline std::string report_text(const lab::ExperimentReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << (report.pass ? "[PASS] " : "[FAIL] ") << report.experiment
        << "  (trials=" << report.trials << ", seed=" << report.master_seed << ")\n";
    for (const auto& [key, value] : report.statistics)
        out << "    " << std::left << std::setw(36) << key << " = " << value << "\n";
    for (const auto& note : report.notes) out << "    note: " << note << "\n";
    return out.str();
}

inline std::filesystem::path write_report(const lab::ExperimentReport& report,
                                          const OutputOptions& options) {
    std::filesystem::create_directories(options.out_dir);
    const std::filesystem::path path =
        std::filesystem::path(options.out_dir) / (report.experiment + ".json");
    std::ofstream file(path, std::ios::binary);
    file << report_json(report, options.timestamp).dump(2) << "\n";
    return path;
}

inline unsigned effective_jobs(const RunConfig& config, unsigned cli_jobs) {
    if (cli_jobs > 0) return cli_jobs;
    if (config.jobs > 0) return config.jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs one named experiment from the config.
inline lab::ExperimentReport run_experiment(const std::string& name, const RunConfig& config,
                                            unsigned jobs) {
    const auto spec = config.family_spec();
    const auto metric = config.metric();
    if (name == "theorem1")
        return lab::verify_theorem1(spec, config.sources_theorem1, config.trials_theorem1,
                                    config.seed, jobs, metric);
    if (name == "theorem2")
        return lab::verify_theorem2(spec, config.mapping().family, config.trials_theorem2,
                                    config.required_rate_theorem2, config.seed, jobs, metric);
    if (name == "theorem3")
        return lab::verify_theorem3(spec, config.pool_theorem3, config.trials_theorem3,
                                    config.seed, jobs, metric);
    if (name == "theorem4")
        return lab::verify_theorem4(spec, config.trials_theorem4, config.seed, jobs, metric);
    if (name == "theorem5_bigsource")
        return lab::verify_theorem5_bigsource(spec, config.k_list_theorem5,
                                              config.trials_theorem5, config.seed, jobs, metric);
    if (name == "theorem5_mapping")
        return lab::verify_theorem5_mapping(spec, config.trials_theorem5, config.seed, jobs,
                                            metric);
    if (name == "nfl") return lab::verify_nfl(config.seed, jobs);
    if (name == "race")
        return lab::verify_race(config.races, config.seed, jobs, config.evolver_a,
                                config.evolver_b, config.race_precision,
                                transfer::TransferMethod::parse(config.race_method));
    throw OutOfRange("unknown experiment: " + name);
}

/// `verify`: run the selected experiments, write one JSON report each, print
/// the aligned summary. Exit 0 iff every verdict is a pass.
inline int run_verify(const RunConfig& config, const OutputOptions& options, unsigned cli_jobs,
                      std::ostream& out) {
    const unsigned jobs = effective_jobs(config, cli_jobs);
    bool all_pass = true;
    for (const auto& name : config.experiments) {
        const auto report = run_experiment(name, config, jobs);
        const auto path = write_report(report, options);
        out << report_text(report);
        out << "    report: " << path.string() << "\n";
        all_pass = all_pass && report.pass;
    }
    out << (all_pass ? "all experiments passed\n" : "some experiments FAILED\n");
    return all_pass ? 0 : 1;
}

/// `enumerate`: the 15 compositions with their worst-case gain classes.
inline int run_enumerate(std::ostream& out) {
    for (const auto& method : transfer::enumerate_methods())
        out << std::left << std::setw(8) << method.str() << " "
            << transfer::infimum_class_label(transfer::infimum_class(method)) << "\n";
    return 0;
}

/// `figdata`: CSV series behind one schematic figure.
inline int run_figdata(const std::string& figure, const RunConfig& config,
                       const OutputOptions& options, std::ostream& out) {
    const std::string csv = figure_csv(figure, config);
    std::filesystem::create_directories(options.out_dir);
    const std::filesystem::path path = std::filesystem::path(options.out_dir) / (figure + ".csv");
    std::ofstream file(path, std::ios::binary);
    if (options.timestamp) file << "# generated: " << detail::now_iso8601() << "\n";
    file << csv;
    out << "wrote " << path.string() << "\n";
    return 0;
}

/// `race`: the end-to-end paired races on their own. Also writes one sample
/// pair of run traces (eval_count, best_objective per generation) as CSV.
inline int run_race(const RunConfig& config, const OutputOptions& options, unsigned cli_jobs,
                    std::ostream& out) {
    const unsigned jobs = effective_jobs(config, cli_jobs);
    const auto report = lab::verify_race(config.races, config.seed, jobs);
    write_report(report, options);

    lab::RaceScenario sample;
    sample.solver = config.evolver_b;
    sample.source_distance_lo = 1e-5;
    sample.source_distance_hi = 1e-4;
    sample.method = transfer::TransferMethod::parse(config.race_method);
    sample.precision = config.race_precision;
    sample.run_full_budget = true;
    const auto traces = lab::sample_race_traces(sample, trial_seed(config.seed, 0));
    std::filesystem::create_directories(options.out_dir);
    for (const auto& [name, csv] :
         {std::pair{std::string("race_baseline.csv"), traces.first},
          std::pair{std::string("race_transfer.csv"), traces.second}}) {
        std::ofstream file(std::filesystem::path(options.out_dir) / name, std::ios::binary);
        if (options.timestamp) file << "# generated: " << detail::now_iso8601() << "\n";
        file << csv;
    }

    out << report_text(report);
    return report.pass ? 0 : 1;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ConfigParse(0, "cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return parse_config(buffer.str());
}

}  // namespace eto::harness
