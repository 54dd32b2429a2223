#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "eto/kernel.hpp"
#include "eto/rng.hpp"

using namespace eto;

namespace {

// brute-force oracle: rank by exhaustive comparison
std::size_t rank_by_counting(double x, const std::vector<double>& pool) {
    std::size_t r = 0;
    for (double y : pool)
        if (y < x) ++r;
    return r;
}

}  // namespace

TEST_CASE("rank_of counts the strictly smaller pool elements") {
    const std::vector<double> pool{0.1, 0.4, 0.7};
    CHECK(kernel::rank_of(0.4, pool) == 1);
    CHECK(kernel::rank_of(0.1, pool) == 0);  // the minimum has an empty lower set
    CHECK(kernel::rank_of(0.7, pool) == 2);
}

TEST_CASE("rank_of matches the exhaustive comparison oracle") {
    Rng rng(7);
    std::vector<double> pool(100);
    for (double& v : pool) v = rng.uniform();
    pool[17] = 0.7;
    for (double x : {pool[0], pool[17], pool[99]})
        CHECK(kernel::rank_of(x, pool) == rank_by_counting(x, pool));
}

TEST_CASE("rank_of rejects ties and non-members") {
    CHECK_THROWS_AS(kernel::rank_of(0.4, std::vector<double>{0.4, 0.4, 0.9}), DuplicateValues);
    CHECK_THROWS_AS(kernel::rank_of(0.5, std::vector<double>{0.1, 0.2}), NotMember);
}

TEST_CASE("rank preservation under strictly increasing maps") {
    Rng rng(11);
    std::vector<double> pool(40);
    for (double& v : pool) v = rng.uniform(-3.0, 3.0);
    const auto g = [](double x) { return x * x * x + 2.0 * x; };  // strictly increasing
    std::vector<double> mapped(pool.size());
    std::transform(pool.begin(), pool.end(), mapped.begin(), g);
    for (std::size_t i = 0; i < pool.size(); ++i)
        CHECK(kernel::rank_of(pool[i], pool) == kernel::rank_of(mapped[i], mapped));
}

TEST_CASE("infer_usefulness_rank is rank_of over the similarity pool") {
    const std::vector<SimilarityScore> pool{SimilarityScore(0.2), SimilarityScore(0.9),
                                            SimilarityScore(0.5)};
    CHECK(kernel::infer_usefulness_rank(pool[0], pool) == 0);
    CHECK(kernel::infer_usefulness_rank(pool[1], pool) == 2);
    CHECK(kernel::infer_usefulness_rank(pool[2], pool) == 1);

    const std::vector<SimilarityScore> single{SimilarityScore(0.3)};
    CHECK(kernel::infer_usefulness_rank(single[0], single) == 0);
}

TEST_CASE("negation reverses ranks, so decreasing links normalize cleanly") {
    Rng rng(13);
    std::vector<double> pool(25);
    for (double& v : pool) v = rng.uniform(-5.0, 5.0);
    std::vector<double> negated(pool.size());
    std::transform(pool.begin(), pool.end(), negated.begin(), [](double x) { return -x; });
    for (std::size_t i = 0; i < pool.size(); ++i)
        CHECK(kernel::rank_of(pool[i], pool) + kernel::rank_of(negated[i], negated) ==
              pool.size() - 1);
}

TEST_CASE("check_monotone_premises accepts strictly monotone samples") {
    const std::vector<std::pair<SimilarityScore, Usefulness>> inc{
        {SimilarityScore(0.1), Usefulness(1.0)},
        {SimilarityScore(0.2), Usefulness(2.0)},
        {SimilarityScore(0.3), Usefulness(3.0)}};
    CHECK(kernel::check_monotone_premises(inc).holds);

    // decreasing samples satisfy the sign test too; direction is normalized away
    const std::vector<std::pair<SimilarityScore, Usefulness>> dec{
        {SimilarityScore(0.1), Usefulness(3.0)},
        {SimilarityScore(0.2), Usefulness(2.0)},
        {SimilarityScore(0.3), Usefulness(1.0)}};
    CHECK(kernel::check_monotone_premises(dec).holds);
}

TEST_CASE("check_monotone_premises reports the violating triple") {
    const std::vector<std::pair<SimilarityScore, Usefulness>> bad{
        {SimilarityScore(0.1), Usefulness(1.0)},
        {SimilarityScore(0.2), Usefulness(5.0)},
        {SimilarityScore(0.3), Usefulness(2.0)}};
    const auto check = kernel::check_monotone_premises(bad);
    CHECK_FALSE(check.holds);
    REQUIRE(check.violation.has_value());
    CHECK(std::get<0>(*check.violation) == doctest::Approx(0.1));
    CHECK(std::get<1>(*check.violation) == doctest::Approx(0.2));
    CHECK(std::get<2>(*check.violation) == doctest::Approx(0.3));
}

TEST_CASE("check_monotone_premises edge cases") {
    CHECK_THROWS_AS(kernel::check_monotone_premises(
                        {{SimilarityScore(0.1), Usefulness(1.0)},
                         {SimilarityScore(0.2), Usefulness(2.0)}}),
                    InsufficientSamples);
    // equal usefulness breaks the one-to-one premise
    const auto flat = kernel::check_monotone_premises({{SimilarityScore(0.1), Usefulness(1.0)},
                                                       {SimilarityScore(0.2), Usefulness(1.0)},
                                                       {SimilarityScore(0.3), Usefulness(2.0)}});
    CHECK_FALSE(flat.holds);
    CHECK_THROWS_AS(kernel::check_monotone_premises({{SimilarityScore(0.1), Usefulness(1.0)},
                                                     {SimilarityScore(0.1), Usefulness(2.0)},
                                                     {SimilarityScore(0.3), Usefulness(3.0)}}),
                    DuplicateValues);
}

TEST_CASE("scores refuse non-finite values") {
    CHECK_THROWS_AS(SimilarityScore(std::nan("")), NonFiniteValue);
    CHECK_THROWS_AS(Usefulness(std::numeric_limits<double>::infinity()), NonFiniteValue);
}

TEST_CASE("observable properties enforce their declared kind") {
    const auto params = ObservableProperty::from_params({1.0, 2.0});
    CHECK(params.kind() == ObservableKind::ParamVector);
    CHECK_THROWS_AS(params.stats(), KindMismatch);

    Matrix cov(2, 2);
    cov(0, 0) = 1.0;
    cov(1, 1) = 1.0;
    const auto stats = ObservableProperty::from_stats({0.0, 0.0}, cov, 5);
    CHECK(stats.kind() == ObservableKind::PopulationStats);
    CHECK_THROWS_AS(stats.params(), KindMismatch);

    CHECK_THROWS_AS(ObservableProperty::from_stats({0.0, 0.0}, cov, 1), OutOfRange);
    Matrix skew(2, 2);
    skew(0, 1) = 1.0;  // not symmetric
    CHECK_THROWS_AS(ObservableProperty::from_stats({0.0, 0.0}, skew, 5), NonPSDCovariance);
}
