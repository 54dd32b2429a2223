#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "eto/errors.hpp"
#include "eto/linalg.hpp"

namespace eto {

/// Scalar similarity between two observables; higher means more alike.
/// Never stores NaN or infinity.
struct SimilarityScore {
    SimilarityScore() = default;
    explicit SimilarityScore(double v) : value(v) {
        if (!std::isfinite(v)) throw NonFiniteValue("SimilarityScore");
    }
    double value = 0.0;
    auto operator<=>(const SimilarityScore&) const = default;
};

/// Scalar usefulness of a piece of knowledge for the target; higher is better.
/// Minimization objectives enter as u = -objective(v), so the orientation is
/// uniform everywhere.
struct Usefulness {
    Usefulness() = default;
    explicit Usefulness(double v) : value(v) {
        if (!std::isfinite(v)) throw NonFiniteValue("Usefulness");
    }
    double value = 0.0;
    auto operator<=>(const Usefulness&) const = default;
};

enum class ObservableKind { ParamVector, PopulationStats };

struct PopulationStats {
    Vec mean;
    Matrix covariance;
    int sample_count = 0;
};

/// Task information visible without solving the task: either the family
/// parameter vector or summary statistics of a population.
class ObservableProperty {
public:
    static ObservableProperty from_params(Vec params) {
        for (double v : params)
            if (!std::isfinite(v)) throw NonFiniteValue("observable params");
        ObservableProperty o;
        o.kind_ = ObservableKind::ParamVector;
        o.params_ = std::move(params);
        return o;
    }

    static ObservableProperty from_stats(Vec mean, Matrix covariance, int sample_count) {
        if (sample_count < 2) throw OutOfRange("sample_count must be >= 2");
        if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
            throw DimensionMismatch("covariance shape does not match mean");
        if (!covariance.is_symmetric(1e-10))
            throw NonPSDCovariance("covariance not symmetric within 1e-10");
        ObservableProperty o;
        o.kind_ = ObservableKind::PopulationStats;
        o.stats_ = PopulationStats{std::move(mean), std::move(covariance), sample_count};
        return o;
    }

    ObservableKind kind() const { return kind_; }

    const Vec& params() const {
        if (kind_ != ObservableKind::ParamVector) throw KindMismatch("observable holds stats");
        return *params_;
    }

    const PopulationStats& stats() const {
        if (kind_ != ObservableKind::PopulationStats) throw KindMismatch("observable holds params");
        return *stats_;
    }

    /// The location part: params for ParamVector, mean for PopulationStats.
    const Vec& location() const {
        return kind_ == ObservableKind::ParamVector ? *params_ : stats_->mean;
    }

    std::size_t dimension() const { return location().size(); }

private:
    ObservableKind kind_ = ObservableKind::ParamVector;
    std::optional<Vec> params_;
    std::optional<PopulationStats> stats_;
};

/// Mean and unbiased covariance of a set of points, as an observable.
inline ObservableProperty population_statistics(const std::vector<Vec>& points) {
    if (points.size() < 2) throw OutOfRange("population statistics need at least two points");
    const std::size_t d = points.front().size();
    const std::size_t n = points.size();
    Vec mean(d, 0.0);
    for (const auto& x : points)
        for (std::size_t j = 0; j < d; ++j) mean[j] += x[j] / double(n);
    Matrix cov(d, d);
    for (const auto& x : points)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                cov(a, b) += (x[a] - mean[a]) * (x[b] - mean[b]) / double(n - 1);
    return ObservableProperty::from_stats(std::move(mean), std::move(cov), static_cast<int>(n));
}

using Bounds = std::vector<std::pair<double, double>>;

/// An optimization task: deterministic objective over a box, to be minimized,
/// plus an observable property describing the task from the outside.
struct Task {
    std::string id;
    std::function<double(const Vec&)> objective;
    Bounds bounds;
    ObservableProperty observable;

    std::size_t dimension() const { return bounds.size(); }

    void validate() const {
        for (const auto& [lo, hi] : bounds)
            if (!(lo < hi)) throw OutOfRange("task bounds need lo < hi");
    }
};

/// A transferable candidate solution.
struct Knowledge {
    Vec solution;
    std::string origin;       // id of the task the solution came from
    bool adapted = false;     // set by mapping
    bool clamped = false;     // set when a mapping result hit the target bounds
};

/// Target-side bookkeeping at time tau: the incumbent solution and its
/// usefulness.
struct TargetState {
    int time = 0;
    Knowledge incumbent;
    Usefulness incumbent_usefulness;
};

enum class LinkDirection { Increasing, Decreasing };

/// Ground-truth similarity-to-usefulness function of a synthetic family.
/// Only synthetic generators can supply one; real transfer runs never see it.
struct MonotoneLink {
    LinkDirection direction = LinkDirection::Increasing;
    std::function<double(double)> eval;  // similarity value -> usefulness value
    double domain_lo = 0.0;
    double domain_hi = 0.0;
};

namespace kernel {

/// Number of pool elements strictly below x. Pool values must be pairwise
/// distinct and contain x.
inline std::size_t rank_of(double x, std::span<const double> pool) {
    Vec sorted(pool.begin(), pool.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DuplicateValues("rank_of: pool has ties");
    if (!std::binary_search(sorted.begin(), sorted.end(), x))
        throw NotMember("rank_of: x not in pool");
    std::size_t rank = 0;
    for (double y : pool)
        if (y < x) ++rank;
    return rank;
}

/// Rank of the (unknown) usefulness associated with `query`, inferred from
/// similarity ranks alone. Callers with a decreasing link negate similarities
/// once at ingestion; this function assumes an increasing link.
inline std::size_t infer_usefulness_rank(SimilarityScore query,
                                         std::span<const SimilarityScore> similarity_pool) {
    Vec values;
    values.reserve(similarity_pool.size());
    for (const auto& s : similarity_pool) values.push_back(s.value);
    return rank_of(query.value, values);
}

struct PremiseCheck {
    bool holds = false;
    // similarity triple (sorted) at the first strict-monotonicity violation
    std::optional<std::tuple<double, double, double>> violation;
};

/// Checks the strict monotonicity premise on sampled (similarity, usefulness)
/// pairs: after sorting by similarity, every consecutive triple must satisfy
/// (u2-u1)(u3-u2) > 0. Equal usefulness values count as violations too, since
/// they break the one-to-one correspondence between the two scales.
inline PremiseCheck check_monotone_premises(
    std::vector<std::pair<SimilarityScore, Usefulness>> samples) {
    if (samples.size() < 3)
        throw InsufficientSamples("check_monotone_premises needs >= 3 samples");
    std::sort(samples.begin(), samples.end(),
              [](const auto& a, const auto& b) { return a.first.value < b.first.value; });
    for (std::size_t i = 0; i + 1 < samples.size(); ++i)
        if (samples[i].first.value == samples[i + 1].first.value)
            throw DuplicateValues("check_monotone_premises: tied similarity values");

    for (std::size_t i = 0; i + 2 < samples.size(); ++i) {
        const double u1 = samples[i].second.value;
        const double u2 = samples[i + 1].second.value;
        const double u3 = samples[i + 2].second.value;
        if (!((u2 - u1) * (u3 - u2) > 0.0)) {
            return PremiseCheck{
                false,
                std::make_tuple(samples[i].first.value, samples[i + 1].first.value,
                                samples[i + 2].first.value)};
        }
    }
    return PremiseCheck{true, std::nullopt};
}

}  // namespace kernel
}  // namespace eto
