#include "doctest.h"

#include <cmath>

#include "eto/evolver.hpp"
#include "eto/rng.hpp"
#include "eto/tasks.hpp"

using namespace eto;
using namespace eto::evolver;

namespace {

Task sphere_task(Vec center) {
    Task t;
    t.id = "sphere";
    t.bounds.assign(center.size(), {-5.0, 5.0});
    t.observable = ObservableProperty::from_params(center);
    t.objective = [center](const Vec& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < center.size(); ++i)
            s += (x[i] - center[i]) * (x[i] - center[i]);
        return s;
    };
    return t;
}

}  // namespace

TEST_CASE("the strategy solves a 2-D sphere within budget") {
    const Task task = sphere_task({1.0, -0.5});
    const RunTrace trace = run(task, EvolverConfig{10, 20, 0.3, 2000, 3, true});
    CHECK(trace.best_per_generation.back().second < 1e-3);
}

TEST_CASE("budget equal to mu returns only the initial population") {
    const Task task = sphere_task({0.0, 0.0});
    const RunTrace trace = run(task, EvolverConfig{10, 20, 0.3, 10, 1, true});
    CHECK(trace.best_per_generation.size() == 1);
    CHECK(trace.best_per_generation.front().first == 10);
    CHECK(trace.final_population.size() == 10);
}

TEST_CASE("identical seeds give bit-identical traces") {
    const Task task = sphere_task({0.7, 0.7});
    const EvolverConfig config{8, 16, 0.5, 800, 99, true};
    const RunTrace a = run(task, config);
    const RunTrace b = run(task, config);
    CHECK(a.best_per_generation == b.best_per_generation);
    CHECK(a.final_population == b.final_population);
    CHECK(a.incumbent.solution == b.incumbent.solution);
}

TEST_CASE("evaluation accounting is exact") {
    int calls = 0;
    Task task = sphere_task({0.0, 0.0});
    auto inner = task.objective;
    task.objective = [&calls, inner](const Vec& x) {
        ++calls;
        return inner(x);
    };
    const EvolverConfig config{6, 12, 0.4, 250, 5, true};
    EvolutionStrategy es(task, config);
    while (es.step()) {
    }
    CHECK(calls == es.evaluations());
    CHECK(calls <= config.budget);
    // 6 initial + full batches of 12
    CHECK((calls - 6) % 12 == 0);
}

TEST_CASE("elitism keeps the best objective non-increasing") {
    const Task task = sphere_task({-1.0, 2.0});
    const RunTrace trace = run(task, EvolverConfig{5, 15, 1.0, 600, 7, false});
    for (std::size_t i = 1; i < trace.best_per_generation.size(); ++i)
        CHECK(trace.best_per_generation[i].second <= trace.best_per_generation[i - 1].second);
}

TEST_CASE("injection replaces the worst individual only") {
    const Task task = sphere_task({0.0, 0.0});
    EvolutionStrategy es(task, EvolverConfig{6, 12, 0.4, 500, 11, true});
    es.step();

    const double before_best = es.best_objective();
    // a solution worse than everything cannot change the best
    es.inject(Knowledge{{4.9, 4.9}, "far", false, false});
    CHECK(es.best_objective() == before_best);
    CHECK(es.trace().final_population.size() == 6);

    // the exact optimum becomes the new best
    es.inject(Knowledge{{0.0, 0.0}, "opt", false, false});
    CHECK(es.best_objective() == 0.0);
}

TEST_CASE("mid-run injection of near-optimal knowledge saves evaluations") {
    const Task task = sphere_task({1.2, -0.8});
    const EvolverConfig config{10, 20, 2.0, 6000, 17, false};
    const double precision = 1e-6;

    const auto evals_to_precision = [&](bool with_injection) {
        EvolutionStrategy es(task, config);
        int generation = 0;
        while (!es.exhausted()) {
            if (es.best_objective() <= precision) break;
            es.step();
            ++generation;
            if (with_injection && generation == 2)
                es.inject(Knowledge{{1.2 + 1e-5, -0.8}, "source", false, false});
        }
        return es.best_objective() <= precision ? es.evaluations() : config.budget + 1;
    };

    const int baseline = evals_to_precision(false);
    const int injected = evals_to_precision(true);
    CHECK(injected < baseline);
}

TEST_CASE("population statistics match hand computation") {
    const std::vector<Vec> points{{0.0, 0.0}, {2.0, 0.0}};
    const auto obs = population_statistics(points);
    CHECK(obs.stats().mean == Vec{1.0, 0.0});
    CHECK(obs.stats().covariance(0, 0) == doctest::Approx(2.0));
    CHECK(obs.stats().covariance(0, 1) == doctest::Approx(0.0));
    CHECK(obs.stats().covariance(1, 1) == doctest::Approx(0.0));
    CHECK(obs.stats().sample_count == 2);
}

TEST_CASE("population statistics concentrate around the sampling Gaussian") {
    Rng rng(1);
    const int n = 500;
    std::vector<Vec> points;
    points.reserve(n);
    for (int i = 0; i < n; ++i) points.push_back({0.5 + 2.0 * rng.normal(), -1.0 + rng.normal()});
    const auto obs = population_statistics(points);
    // three standard errors of the mean: 3 * sigma / sqrt(n)
    CHECK(std::fabs(obs.stats().mean[0] - 0.5) < 3.0 * 2.0 / std::sqrt(double(n)));
    CHECK(std::fabs(obs.stats().mean[1] + 1.0) < 3.0 * 1.0 / std::sqrt(double(n)));
    // variance of the sample variance ~ 2 sigma^4 / (n-1)
    CHECK(std::fabs(obs.stats().covariance(0, 0) - 4.0) <
          3.0 * std::sqrt(2.0 * 16.0 / double(n - 1)));
    CHECK(std::fabs(obs.stats().covariance(1, 1) - 1.0) <
          3.0 * std::sqrt(2.0 / double(n - 1)));
}

TEST_CASE("snapshot_observable reports the unbiased population statistics") {
    const Task task = sphere_task({0.0, 0.0});
    EvolutionStrategy es(task, EvolverConfig{5, 10, 0.3, 200, 2, true});
    const auto obs = es.snapshot_observable();
    CHECK(obs.kind() == ObservableKind::PopulationStats);
    CHECK(obs.stats().sample_count == 5);
    const auto trace = es.trace();
    const auto direct = population_statistics(trace.final_population);
    CHECK(obs.stats().mean == direct.stats().mean);
}

TEST_CASE("configs validate") {
    CHECK_THROWS_AS((EvolverConfig{0, 5, 0.1, 100, 0, true}.validate()), OutOfRange);
    CHECK_THROWS_AS((EvolverConfig{5, 3, 0.1, 100, 0, true}.validate()), OutOfRange);
    CHECK_THROWS_AS((EvolverConfig{5, 10, 0.1, 4, 0, true}.validate()), BudgetTooSmall);
}
