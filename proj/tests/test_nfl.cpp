#include "doctest.h"

#include <cmath>
#include <vector>

#include "eto/nfl.hpp"
#include "eto/tasks.hpp"

using namespace eto;
using namespace eto::nfl;
using tasks::FiniteTaskFamily;
using tasks::make_finite_family;

TEST_CASE("a full-horizon sweep always finds the minimum") {
    const auto family = make_finite_family({0, 1, 2, 3});
    const auto perf = performance_vector(general_search(), family, family.size_x, found_minimum());
    for (double entry : perf) CHECK(entry == 1.0);
}

TEST_CASE("horizon one on a uniform distinct-valued closure succeeds 1/|X| of the time") {
    const auto family = make_finite_family({0, 1, 2, 3});
    const auto perf = performance_vector(general_search(), family, 1, found_minimum());
    double hits = 0.0;
    for (double entry : perf) hits += entry;
    // oracle: the first probe lands on the minimum for exactly (|X|-1)! of the |X|! tables
    CHECK(hits == doctest::Approx(double(family.functions.size()) / family.size_x));
    // the same holds for a differently-biased non-revisiting optimizer
    const auto perf2 = performance_vector(transfer_biased(2), family, 1, found_minimum());
    double hits2 = 0.0;
    for (double entry : perf2) hits2 += entry;
    CHECK(hits2 == hits);
}

TEST_CASE("constant families are solved at the first probe") {
    const auto family = make_finite_family({1, 1, 1});
    const auto perf = performance_vector(general_search(), family, 1, found_minimum());
    for (double entry : perf) CHECK(entry == 1.0);
}

TEST_CASE("horizon bounds are enforced") {
    const auto family = make_finite_family({0, 1, 2});
    CHECK_THROWS_AS(performance_vector(general_search(), family, 4, found_minimum()),
                    HorizonTooLarge);
    CHECK_THROWS_AS(performance_vector(general_search(), family, 0, found_minimum()),
                    HorizonTooLarge);
}

TEST_CASE("revisiting policies are rejected") {
    DeterministicOptimizer broken;
    broken.id = "broken";
    broken.policy = [](const History&, int) { return 0; };
    const auto family = make_finite_family({0, 1, 2});
    CHECK_THROWS_AS(performance_vector(broken, family, 2, found_minimum()), DuplicateValues);
}

TEST_CASE("alignment: dot product equals the directly accumulated expectation") {
    const auto family = make_finite_family({0, 0, 1, 2});
    for (int horizon = 1; horizon <= family.size_x; ++horizon) {
        for (const auto& opt : {general_search(), transfer_biased(1)}) {
            const auto rec = alignment(opt, family, horizon, found_minimum());
            CHECK(std::fabs(rec.dot - rec.direct_expectation) <= 1e-9);
        }
    }
}

TEST_CASE("alignment against a point mass is that entry") {
    const auto base = make_finite_family({0, 1, 2});
    std::vector<double> point_mass(base.functions.size(), 0.0);
    point_mass[2] = 1.0;
    const auto family = make_finite_family({0, 1, 2}, point_mass);
    const auto rec = alignment(general_search(), family, 1, found_minimum());
    CHECK(rec.dot == rec.performance_vector[2]);
}

TEST_CASE("NFL equality: all non-revisiting optimizers tie on uniform closures") {
    // |X| = 4 and 5, with value ties to make the closure non-trivial
    for (const auto& seed_table :
         {std::vector<int>{0, 1, 2, 3}, std::vector<int>{0, 0, 1, 2},
          std::vector<int>{0, 1, 2, 3, 3}, std::vector<int>{2, 0, 1, 1, 0}}) {
        const auto family = make_finite_family(seed_table);
        REQUIRE(family.closed_under_permutation);
        const std::vector<DeterministicOptimizer> optimizers{
            general_search(),
            general_search({3, 1, 0, 2, 4}),
            transfer_biased(2),
        };
        for (int horizon = 1; horizon <= family.size_x; ++horizon) {
            const auto a = alignment(optimizers[0], family, horizon, found_minimum());
            for (std::size_t i = 1; i < optimizers.size(); ++i) {
                const auto b = alignment(optimizers[i], family, horizon, found_minimum());
                CHECK(a.dot == b.dot);  // exact equality, both are counts / |G|
            }
        }
    }
}

TEST_CASE("conditional superiority: concentration decides who wins") {
    const auto base = make_finite_family({0, 1, 2, 3});
    const int source_optimum = 2;

    // distribution concentrated on tables whose minimum sits at the source optimum
    std::vector<double> favors(base.functions.size(), 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < base.functions.size(); ++i) {
        const auto& g = base.functions[i];
        if (std::min_element(g.begin(), g.end()) - g.begin() == source_optimum) {
            favors[i] = 1.0;
            mass += 1.0;
        }
    }
    for (double& p : favors) p /= mass;
    const auto aligned_family = make_finite_family({0, 1, 2, 3}, favors);
    const auto transfer = alignment(transfer_biased(source_optimum), aligned_family, 1,
                                    found_minimum());
    const auto general = alignment(general_search(), aligned_family, 1, found_minimum());
    CHECK(transfer.dot > general.dot);
    CHECK(transfer.dot == doctest::Approx(1.0).epsilon(1e-12));

    // and the reverse concentration punishes the transfer bias
    std::vector<double> against(base.functions.size(), 0.0);
    mass = 0.0;
    for (std::size_t i = 0; i < base.functions.size(); ++i) {
        const auto& g = base.functions[i];
        if (std::min_element(g.begin(), g.end()) - g.begin() == 0) {
            against[i] = 1.0;
            mass += 1.0;
        }
    }
    for (double& p : against) p /= mass;
    const auto hostile_family = make_finite_family({0, 1, 2, 3}, against);
    const auto transfer2 = alignment(transfer_biased(source_optimum), hostile_family, 1,
                                     found_minimum());
    const auto general2 = alignment(general_search(), hostile_family, 1, found_minimum());
    CHECK(transfer2.dot < general2.dot);
}

TEST_CASE("quantile predicate is permutation-fair too") {
    const auto family = make_finite_family({0, 1, 2, 3, 3});
    const auto a = alignment(general_search(), family, 2, quantile_reached(0.4));
    const auto b = alignment(transfer_biased(4), family, 2, quantile_reached(0.4));
    CHECK(a.dot == b.dot);
}
