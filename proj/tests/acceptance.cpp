// Acceptance suite: one line per criterion, full-scale trial counts, fixed
// tolerances. Exits nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "eto/harness.hpp"

using namespace eto;

namespace {

int failures = 0;
std::chrono::steady_clock::time_point criterion_start;

void begin() { criterion_start = std::chrono::steady_clock::now(); }

void report(int number, bool pass, const std::string& what) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - criterion_start)
            .count();
    std::printf("criterion %2d [%s] %s (%.1fs)\n", number, pass ? "PASS" : "FAIL", what.c_str(),
                seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

double stat(const lab::ExperimentReport& r, const std::string& key) {
    return r.statistics.at(key);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

int main() {
    const std::uint64_t seed = 20240601;
    const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    const lab::FamilySpec spec{lab::FamilyKind::ShiftedSphere, 2, 1.0, seed};

    // 1. composition enumeration: exactly 15 methods, 3 + 6 + 6
    begin();
    {
        std::ostringstream out;
        harness::run_enumerate(out);
        int lines = 0;
        for (char c : out.str())
            if (c == '\n') ++lines;
        const auto methods = transfer::enumerate_methods();
        int singles = 0, pairs = 0, triples = 0;
        for (const auto& m : methods) {
            if (m.stages.size() == 1) ++singles;
            if (m.stages.size() == 2) ++pairs;
            if (m.stages.size() == 3) ++triples;
        }
        report(1, lines == 15 && methods.size() == 15 && singles == 3 && pairs == 6 &&
                      triples == 6,
               "composition enumeration lists 15 methods: 3 singletons, 6 pairs, 6 triples");
    }

    // 2 + 3. safety biconditional and infimum dominance over 10^4 trials/method
    begin();
    const auto theorem4 = lab::verify_theorem4(spec, 10000, seed, jobs);
    {
        bool safe_ok = true;
        bool witness_ok = true;
        for (const auto& m : transfer::enumerate_methods()) {
            if (m.contains(transfer::Stage::E)) {
                if (stat(theorem4, "min_gain[" + m.str() + "]") < -1e-12) safe_ok = false;
            } else {
                if (stat(theorem4, "negative_trials[" + m.str() + "]") < 1.0) witness_ok = false;
            }
        }
        report(2, safe_ok && witness_ok,
               "theorem 4 biconditional: 11 gated methods never lose (>= -1e-12), all 4 ungated "
               "methods exhibit losses");
        begin();
        report(3, stat(theorem4, "worst_infimum_margin") >= -1e-9,
               "infimum dominance: every trial gain >= four-case worst bound - 1e-9");
    }

    // 4. big-source retrieval frequencies against 1-(1-P+)^k
    begin();
    {
        const std::vector<int> k_list{1, 2, 4, 8, 16, 32};
        const auto r = lab::verify_theorem5_bigsource(spec, k_list, 10000, seed, jobs);
        bool within = true;
        for (int k : k_list) {
            const std::string s = "[k=" + std::to_string(k) + "]";
            if (std::fabs(stat(r, "frequency" + s) - stat(r, "predicted" + s)) >
                stat(r, "ci_half_width" + s))
                within = false;
        }
        report(4, within && stat(r, "frequency[k=32]") >= 0.99,
               "theorem 5 big-source: frequencies inside 99% bands for k in {1..32}, >= 0.99 at "
               "k=32");
    }

    // 5. rank inference: perfect on the premise family, imperfect on the broken one
    begin();
    {
        const auto r = lab::verify_theorem1(spec, 100, 50, seed, jobs);
        report(5, stat(r, "sphere_min_correlation") == 1.0 &&
                      stat(r, "deceptive_imperfect_trials") >= 1.0,
               "theorem 1: Spearman exactly 1.0 on 50x100 premise pools, < 1.0 somewhere on "
               "deceptive pools");
    }

    // 6. calibrated threshold classification with zero confusion
    begin();
    {
        const auto r = lab::verify_theorem3(spec, 200, 50, seed, jobs);
        report(6, stat(r, "sphere_off_diagonal") == 0.0,
               "theorem 3: zero confusion-matrix off-diagonals on 50x200 calibrated pools");
    }

    // 7. mapping strictly improves usefulness on translation-realizable trials
    begin();
    {
        const auto r = lab::verify_theorem2(spec, lab::MappingFamily::Translation, 10000, 1.0,
                                            seed, jobs);
        report(7, stat(r, "improvement_rate") == 1.0 && stat(r, "included_trials") > 0.0,
               "theorem 2: post-mapping usefulness strictly improves in 100% of realizable "
               "translation trials");
    }

    // 8 + 9. NFL identity and conditional superiority by exhaustive enumeration
    begin();
    const auto nfl_report = lab::verify_nfl(seed, jobs);
    report(8, stat(nfl_report, "worst_identity_gap") <= 1e-9 &&
                  stat(nfl_report, "optimizers_identical") == 1.0,
           "NFL identity: dot = direct expectation within 1e-9; optimizers tie exactly on "
           "uniform closures");
    begin();
    report(9, stat(nfl_report, "transfer_on_favorable") > stat(nfl_report, "general_on_favorable") &&
                  stat(nfl_report, "transfer_on_hostile") < stat(nfl_report, "general_on_hostile"),
           "conditional superiority: transfer bias wins on aligned distributions and loses on "
           "hostile ones");

    // 10. paired end-to-end races
    begin();
    {
        const auto r = lab::verify_race(100, seed, jobs);
        report(10, stat(r, "weak_wins") >= 95.0 && stat(r, "gate_off_identical_traces") == 100.0,
               "e2e race: gated transfer wins >= 95/100 weak-solver races; a shut gate "
               "reproduces baseline traces byte for byte");
    }

    // 11. reports reproduce byte for byte under a fixed master seed
    begin();
    {
        harness::RunConfig config;
        config.seed = seed;
        config.trials_theorem1 = 10;
        config.sources_theorem1 = 30;
        const harness::OutputOptions a{"acceptance_out_a", false};
        const harness::OutputOptions b{"acceptance_out_b", false};
        bool identical = true;
        for (const std::string name : {"theorem1", "nfl"}) {
            const auto pa = harness::write_report(
                harness::run_experiment(name, config, jobs), a);
            const auto pb = harness::write_report(
                harness::run_experiment(name, config, 1), b);  // thread count must not matter
            if (read_file(pa) != read_file(pb)) identical = false;
        }
        const std::string fig_a = harness::figure_csv("fig5", config);
        const std::string fig_b = harness::figure_csv("fig5", config);
        identical = identical && fig_a == fig_b;
        std::filesystem::remove_all("acceptance_out_a");
        std::filesystem::remove_all("acceptance_out_b");
        report(11, identical,
               "determinism: identical master seed reproduces report files byte for byte "
               "(timestamps suppressed)");
    }

    std::printf(failures == 0 ? "acceptance: all criteria passed\n"
                              : "acceptance: %d criteria FAILED\n",
                failures);
    return failures == 0 ? 0 : 1;
}
