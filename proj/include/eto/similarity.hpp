#pragma once

#include <cmath>

#include "eto/errors.hpp"
#include "eto/kernel.hpp"
#include "eto/linalg.hpp"

namespace eto::similarity {

enum class MetricKind { NegParamDistance, GaussianW2, RbfParam };

/// Interchangeable similarity metrics over observables. NegParamDistance and
/// RbfParam compare parameter vectors; GaussianW2 compares moment-matched
/// Gaussians of population statistics. All are symmetric and take their
/// unique maximum at identical observables.
struct SimilarityMetric {
    MetricKind kind = MetricKind::NegParamDistance;
    double scale = 1.0;  // RbfParam bandwidth

    void validate() const {
        if (!(scale > 0.0)) throw OutOfRange("metric scale must be > 0");
    }

    /// Score of a perfect match under this metric.
    double maximum() const { return kind == MetricKind::RbfParam ? 1.0 : 0.0; }
};

namespace detail {

inline double param_distance(const ObservableProperty& a, const ObservableProperty& b) {
    if (a.kind() != ObservableKind::ParamVector || b.kind() != ObservableKind::ParamVector)
        throw KindMismatch("metric needs ParamVector observables");
    if (a.params().size() != b.params().size())
        throw DimensionMismatch("observable dimensions differ");
    return distance(a.params(), b.params());
}

/// 2-Wasserstein distance between the Gaussians N(mu_a, S_a) and N(mu_b, S_b):
/// sqrt(|mu_a-mu_b|^2 + tr(S_a + S_b - 2 (S_b^{1/2} S_a S_b^{1/2})^{1/2})).
inline double gaussian_w2(const PopulationStats& a, const PopulationStats& b) {
    if (a.mean.size() != b.mean.size()) throw DimensionMismatch("stats dimensions differ");
    if (a.mean == b.mean && a.covariance == b.covariance) return 0.0;
    const Matrix root_b = psd_sqrt(b.covariance);
    const Matrix cross = psd_sqrt(root_b * a.covariance * root_b);
    // the Bures term is nonnegative; tiny negatives are eigensolver rounding
    const double trace_term = std::max(
        0.0, a.covariance.trace() + b.covariance.trace() - 2.0 * cross.trace());
    const Vec dmu = sub(a.mean, b.mean);
    return std::sqrt(dot(dmu, dmu) + trace_term);
}

}  // namespace detail

inline SimilarityScore measure(const SimilarityMetric& metric, const ObservableProperty& a,
                               const ObservableProperty& b) {
    metric.validate();
    if (a.kind() != b.kind()) throw KindMismatch("observables have different kinds");
    switch (metric.kind) {
        case MetricKind::NegParamDistance:
            return SimilarityScore(-detail::param_distance(a, b));
        case MetricKind::RbfParam: {
            const double d = detail::param_distance(a, b);
            return SimilarityScore(std::exp(-d * d / (2.0 * metric.scale * metric.scale)));
        }
        case MetricKind::GaussianW2: {
            if (a.kind() != ObservableKind::PopulationStats)
                throw KindMismatch("GaussianW2 needs PopulationStats observables");
            return SimilarityScore(-detail::gaussian_w2(a.stats(), b.stats()));
        }
    }
    throw KindMismatch("unknown metric kind");
}

}  // namespace eto::similarity
