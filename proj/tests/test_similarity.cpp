#include "doctest.h"

#include <cmath>
#include <vector>

#include "eto/linalg.hpp"
#include "eto/rng.hpp"
#include "eto/similarity.hpp"

using namespace eto;
using similarity::MetricKind;
using similarity::SimilarityMetric;

namespace {

Matrix random_spd(Rng& rng, std::size_t d) {
    Matrix a(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) = rng.normal();
    Matrix m = a * a.transpose();
    for (std::size_t i = 0; i < d; ++i) m(i, i) += 0.5;
    return m;
}

// Gauss-Jordan inverse, test-local
Matrix invert(Matrix m) {
    const std::size_t n = m.rows();
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(m(r, col)) > std::fabs(m(pivot, col))) pivot = r;
        for (std::size_t c = 0; c < n; ++c) {
            std::swap(m(pivot, c), m(col, c));
            std::swap(inv(pivot, c), inv(col, c));
        }
        const double p = m(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            m(col, c) /= p;
            inv(col, c) /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m(r, col);
            for (std::size_t c = 0; c < n; ++c) {
                m(r, c) -= f * m(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

Matrix halve(Matrix m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) *= 0.5;
    return m;
}

// independent matrix square root oracle: Denman-Beavers iteration
Matrix denman_beavers_sqrt(const Matrix& m, int iters = 60) {
    Matrix y = m;
    Matrix z = Matrix::identity(m.rows());
    for (int i = 0; i < iters; ++i) {
        const Matrix y_next = halve(y + invert(z));
        const Matrix z_next = halve(z + invert(y));
        y = y_next;
        z = z_next;
    }
    return y;
}

double w2_oracle(const PopulationStats& a, const PopulationStats& b) {
    const Matrix root_b = denman_beavers_sqrt(b.covariance);
    const Matrix cross = denman_beavers_sqrt(root_b * a.covariance * root_b);
    const Vec dmu = sub(a.mean, b.mean);
    return std::sqrt(dot(dmu, dmu) + a.covariance.trace() + b.covariance.trace() -
                     2.0 * cross.trace());
}

}  // namespace

TEST_CASE("jacobi eigendecomposition reconstructs symmetric matrices") {
    Matrix m(2, 2);
    m(0, 0) = 2.0;
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    m(1, 1) = 2.0;
    const auto eig = sym_eigen(m);
    CHECK(eig.values[0] == doctest::Approx(1.0));
    CHECK(eig.values[1] == doctest::Approx(3.0));

    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix s = random_spd(rng, 4);
        const Matrix rebuilt = sym_apply(s, [](double l) { return l; });
        CHECK((rebuilt - s).max_abs() < 1e-9);
    }
}

TEST_CASE("psd_sqrt squares back to the input") {
    Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix s = random_spd(rng, 3);
        const Matrix r = psd_sqrt(s);
        CHECK((r * r - s).max_abs() < 1e-8);
    }
    Matrix indefinite = Matrix::identity(2);
    indefinite(1, 1) = -1.0;
    CHECK_THROWS_AS(psd_sqrt(indefinite), NonPSDCovariance);
}

TEST_CASE("identical observables score the metric maximum") {
    const auto a = ObservableProperty::from_params({0.4, -1.2});
    CHECK(similarity::measure({MetricKind::NegParamDistance, 1.0}, a, a).value == 0.0);
    CHECK(similarity::measure({MetricKind::RbfParam, 1.0}, a, a).value == 1.0);

    Rng rng(9);
    const Matrix cov = random_spd(rng, 2);
    const auto g = ObservableProperty::from_stats({1.0, 2.0}, cov, 10);
    CHECK(similarity::measure({MetricKind::GaussianW2, 1.0}, g, g).value ==
          doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("NegParamDistance is the negative euclidean distance") {
    const auto a = ObservableProperty::from_params({0.0, 0.0});
    const auto b = ObservableProperty::from_params({3.0, 4.0});
    CHECK(similarity::measure({MetricKind::NegParamDistance, 1.0}, a, b).value ==
          doctest::Approx(-5.0));
    CHECK(similarity::measure({MetricKind::RbfParam, 2.0}, a, b).value ==
          doctest::Approx(std::exp(-25.0 / 8.0)));
}

TEST_CASE("GaussianW2 matches the closed form and the iteration oracle") {
    // spherical case: N(0, I) vs N((1,0), 4I) gives W2 = sqrt(1 + 2 (1-2)^2) = sqrt(3)
    const Matrix eye = Matrix::identity(2);
    Matrix four = Matrix::identity(2);
    four(0, 0) = 4.0;
    four(1, 1) = 4.0;
    const auto a = ObservableProperty::from_stats({0.0, 0.0}, eye, 10);
    const auto b = ObservableProperty::from_stats({1.0, 0.0}, four, 10);
    const double got = similarity::measure({MetricKind::GaussianW2, 1.0}, a, b).value;
    CHECK(got == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-9));
    CHECK(got == doctest::Approx(-w2_oracle(a.stats(), b.stats())).epsilon(1e-7));

    // general covariances against the independent oracle
    Rng rng(21);
    for (int rep = 0; rep < 5; ++rep) {
        const auto x = ObservableProperty::from_stats({rng.normal(), rng.normal()},
                                                      random_spd(rng, 2), 8);
        const auto y = ObservableProperty::from_stats({rng.normal(), rng.normal()},
                                                      random_spd(rng, 2), 8);
        const double w2 = similarity::measure({MetricKind::GaussianW2, 1.0}, x, y).value;
        CHECK(w2 == doctest::Approx(-w2_oracle(x.stats(), y.stats())).epsilon(1e-6));
    }
}

TEST_CASE("metrics are symmetric and self-maximal on random inputs") {
    Rng rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = ObservableProperty::from_params({rng.normal(), rng.normal(), rng.normal()});
        const auto b = ObservableProperty::from_params({rng.normal(), rng.normal(), rng.normal()});
        for (MetricKind kind : {MetricKind::NegParamDistance, MetricKind::RbfParam}) {
            const SimilarityMetric metric{kind, 1.3};
            const double ab = similarity::measure(metric, a, b).value;
            const double ba = similarity::measure(metric, b, a).value;
            CHECK(ab == ba);
            CHECK(similarity::measure(metric, a, a).value > ab);  // distinct observables
        }
    }
    for (int rep = 0; rep < 10; ++rep) {
        const auto a = ObservableProperty::from_stats({rng.normal(), rng.normal()},
                                                      random_spd(rng, 2), 6);
        const auto b = ObservableProperty::from_stats({rng.normal(), rng.normal()},
                                                      random_spd(rng, 2), 6);
        const SimilarityMetric metric{MetricKind::GaussianW2, 1.0};
        CHECK(similarity::measure(metric, a, b).value ==
              doctest::Approx(similarity::measure(metric, b, a).value).epsilon(1e-9));
        CHECK(similarity::measure(metric, a, a).value >
              similarity::measure(metric, a, b).value);
    }
}

TEST_CASE("equal-covariance W2 orders sources exactly like mean distance") {
    Rng rng(23);
    const Matrix cov = random_spd(rng, 2);
    const auto target_stats = ObservableProperty::from_stats({0.0, 0.0}, cov, 12);
    const auto target_params = ObservableProperty::from_params({0.0, 0.0});
    std::vector<double> w2_scores;
    std::vector<double> dist_scores;
    for (int i = 0; i < 12; ++i) {
        const Vec mu{rng.normal(), rng.normal()};
        w2_scores.push_back(similarity::measure({MetricKind::GaussianW2, 1.0},
                                                ObservableProperty::from_stats(mu, cov, 12),
                                                target_stats)
                                .value);
        dist_scores.push_back(similarity::measure({MetricKind::NegParamDistance, 1.0},
                                                  ObservableProperty::from_params(mu),
                                                  target_params)
                                  .value);
    }
    for (std::size_t i = 0; i < w2_scores.size(); ++i)
        for (std::size_t j = 0; j < w2_scores.size(); ++j)
            CHECK((w2_scores[i] < w2_scores[j]) == (dist_scores[i] < dist_scores[j]));
}

TEST_CASE("measure is invariant under simultaneous coordinate permutation") {
    const auto a = ObservableProperty::from_params({1.0, -2.0, 0.5});
    const auto b = ObservableProperty::from_params({0.0, 3.0, -1.0});
    const auto ap = ObservableProperty::from_params({-2.0, 0.5, 1.0});
    const auto bp = ObservableProperty::from_params({3.0, -1.0, 0.0});
    for (MetricKind kind : {MetricKind::NegParamDistance, MetricKind::RbfParam}) {
        const SimilarityMetric metric{kind, 1.0};
        CHECK(similarity::measure(metric, a, b).value ==
              similarity::measure(metric, ap, bp).value);
    }
}

TEST_CASE("measure validates kinds, dimensions and covariance definiteness") {
    const auto params = ObservableProperty::from_params({1.0, 2.0});
    const auto params3 = ObservableProperty::from_params({1.0, 2.0, 3.0});
    const auto stats = ObservableProperty::from_stats({0.0, 0.0}, Matrix::identity(2), 4);
    CHECK_THROWS_AS(similarity::measure({MetricKind::NegParamDistance, 1.0}, params, stats),
                    KindMismatch);
    CHECK_THROWS_AS(similarity::measure({MetricKind::NegParamDistance, 1.0}, params, params3),
                    DimensionMismatch);
    CHECK_THROWS_AS(similarity::measure({MetricKind::GaussianW2, 1.0}, params, params),
                    KindMismatch);

    Matrix indefinite = Matrix::identity(2);
    indefinite(1, 1) = -1.0;
    const auto bad = ObservableProperty::from_stats({0.0, 0.0}, indefinite, 4);
    CHECK_THROWS_AS(similarity::measure({MetricKind::GaussianW2, 1.0}, bad, stats),
                    NonPSDCovariance);
    CHECK_THROWS_AS((SimilarityMetric{MetricKind::RbfParam, 0.0}.validate()), OutOfRange);
}
