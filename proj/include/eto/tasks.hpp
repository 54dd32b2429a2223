#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "eto/errors.hpp"
#include "eto/kernel.hpp"
#include "eto/rng.hpp"
#include "eto/similarity.hpp"
#include "eto/transfer.hpp"

namespace eto::tasks {

using similarity::MetricKind;
using similarity::SimilarityMetric;

enum class FamilyKind { ShiftedSphere, ShiftedRotatedEllipsoid, DeceptiveShift };

/// Generator parameters for a synthetic task family.
struct FamilySpec {
    FamilyKind kind = FamilyKind::ShiftedSphere;
    int dimension = 2;
    double spread = 1.0;  // sampling radius for source parameters
    std::uint64_t seed = 0;

    void validate() const {
        if (dimension < 1) throw OutOfRange("dimension must be >= 1");
        if (!(spread > 0.0)) throw OutOfRange("spread must be > 0");
    }
};

/// One objective evaluation per call, oriented so higher is better.
struct UsefulnessOracle {
    Task target;

    Usefulness operator()(const Knowledge& v) const {
        if (v.solution.size() != target.dimension())
            throw DimensionMismatch("knowledge dimension does not match target");
        return Usefulness(-target.objective(v.solution));
    }
};

inline Usefulness usefulness(const UsefulnessOracle& oracle, const Knowledge& v) {
    return oracle(v);
}

/// A generated family: sources with their exact optima as knowledge, the
/// target task, and (when the construction admits one) the ground-truth
/// similarity-to-usefulness link. premises_hold says whether that link
/// truthfully orders usefulness; the deceptive family ships its nominal
/// primary-basin link with premises_hold=false so calibration against it can
/// be shown to misclassify.
struct Family {
    transfer::SourcePool pool;
    Task target;
    bool premises_hold = false;
    FamilySpec spec;

    /// Ground-truth link for a parameter-space metric, when one exists.
    std::optional<MonotoneLink> link_for(const SimilarityMetric& metric) const {
        if (spec.kind == FamilyKind::ShiftedRotatedEllipsoid) return std::nullopt;
        const double reach = 128.0 * std::max(1.0, spec.spread);
        MonotoneLink link;
        link.direction = LinkDirection::Increasing;
        switch (metric.kind) {
            case MetricKind::NegParamDistance:
            case MetricKind::GaussianW2:
                // s = -distance, u = -distance^2
                link.eval = [](double s) { return -s * s; };
                link.domain_lo = -reach;
                link.domain_hi = 0.0;
                break;
            case MetricKind::RbfParam: {
                // s = exp(-d^2 / (2 scale^2)), u = -d^2
                const double scale = metric.scale;
                link.eval = [scale](double s) { return 2.0 * scale * scale * std::log(s); };
                link.domain_lo = std::exp(-40.0);
                link.domain_hi = 1.0;
                break;
            }
        }
        return link;
    }
};

namespace detail {

inline Vec sample_in_ball(Rng& rng, const Vec& center, double radius) {
    const std::size_t d = center.size();
    Vec dir(d);
    double n = 0.0;
    do {
        for (double& x : dir) x = rng.normal();
        n = norm2(dir);
    } while (n == 0.0);
    const double r = radius * std::pow(rng.uniform(), 1.0 / double(d));
    Vec out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = center[i] + r * dir[i] / n;
    return out;
}

inline Bounds box_around(const Vec& center, double half_width) {
    Bounds b;
    b.reserve(center.size());
    for (double c : center) b.emplace_back(c - half_width, c + half_width);
    return b;
}

/// Random rotation via QR-like Gram-Schmidt on a Gaussian matrix.
inline Matrix random_rotation(Rng& rng, std::size_t d) {
    Matrix q(d, d);
    for (std::size_t col = 0; col < d; ++col) {
        Vec v(d);
        for (double& x : v) x = rng.normal();
        for (std::size_t prev = 0; prev < col; ++prev) {
            double proj = 0.0;
            for (std::size_t i = 0; i < d; ++i) proj += q(i, prev) * v[i];
            for (std::size_t i = 0; i < d; ++i) v[i] -= proj * q(i, prev);
        }
        const double n = norm2(v);
        for (std::size_t i = 0; i < d; ++i) q(i, col) = v[i] / n;
    }
    return q;
}

inline Task build_task(const FamilySpec& spec, const std::string& id, Vec theta,
                       const Matrix& rotation, const Vec& ellipse_scales) {
    Task t;
    t.id = id;
    t.bounds = box_around(theta, 10.0 * std::max(1.0, spec.spread));
    t.observable = ObservableProperty::from_params(theta);
    switch (spec.kind) {
        case FamilyKind::ShiftedSphere:
            t.objective = [theta](const Vec& x) {
                double s = 0.0;
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    const double d = x[i] - theta[i];
                    s += d * d;
                }
                return s;
            };
            break;
        case FamilyKind::ShiftedRotatedEllipsoid:
            t.objective = [theta, rotation, ellipse_scales](const Vec& x) {
                const Vec z = rotation * sub(x, theta);
                double s = 0.0;
                for (std::size_t i = 0; i < z.size(); ++i) s += ellipse_scales[i] * z[i] * z[i];
                return s;
            };
            break;
        case FamilyKind::DeceptiveShift: {
            // primary basin at theta plus a deeper, narrow well offset along
            // e1 by one spread, so parameter similarity stops predicting
            // usefulness
            Vec well = theta;
            well[0] += spec.spread;
            const double gain = 0.5 * spec.spread * spec.spread;
            t.objective = [theta, well, gain](const Vec& x) {
                double primary = 0.0;
                double to_well = 0.0;
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    const double dp = x[i] - theta[i];
                    const double dw = x[i] - well[i];
                    primary += dp * dp;
                    to_well += dw * dw;
                }
                return std::min(primary, 4.0 * to_well - gain);
            };
            break;
        }
    }
    return t;
}

inline Vec task_optimum(const FamilySpec& spec, const Vec& theta) {
    if (spec.kind != FamilyKind::DeceptiveShift) return theta;
    Vec opt = theta;
    opt[0] += spec.spread;
    return opt;
}

}  // namespace detail

/// Builds k sources around `target_param` plus the target task. Source
/// parameters are sampled continuously, so exact similarity ties have
/// probability zero. Each source's knowledge is its exact optimum.
inline Family make_family(const FamilySpec& spec, int k, const Vec& target_param) {
    spec.validate();
    if (k < 1) throw OutOfRange("need at least one source");
    if (target_param.size() != static_cast<std::size_t>(spec.dimension))
        throw DimensionMismatch("target_param does not match dimension");

    Rng rng(spec.seed);
    const std::size_t d = target_param.size();
    Matrix rotation;
    Vec scales;
    if (spec.kind == FamilyKind::ShiftedRotatedEllipsoid) {
        rotation = detail::random_rotation(rng, d);
        scales.resize(d);
        for (std::size_t i = 0; i < d; ++i)
            scales[i] = d == 1 ? 1.0 : std::pow(10.0, double(i) / double(d - 1));
    }

    Family fam;
    fam.spec = spec;
    fam.premises_hold = spec.kind == FamilyKind::ShiftedSphere;
    fam.target = detail::build_task(spec, "target", target_param, rotation, scales);

    for (int i = 0; i < k; ++i) {
        const Vec theta = detail::sample_in_ball(rng, target_param, spec.spread);
        Task t = detail::build_task(spec, "source-" + std::to_string(i), theta, rotation, scales);
        Knowledge know{detail::task_optimum(spec, theta), t.id, false, false};
        fam.pool.entries.push_back(transfer::SourceEntry{std::move(t), std::move(know)});
    }
    fam.pool.validate();
    return fam;
}

/// Adversarial variant: every source parameter sits in a half-space shell at
/// 2 to 3 spreads from the target, so all source knowledge (and the whole
/// convex hull of it) is strictly worse than any incumbent closer than two
/// spreads.
inline Family make_adversarial_family(const FamilySpec& spec, int k, const Vec& target_param) {
    spec.validate();
    if (k < 1) throw OutOfRange("need at least one source");
    Rng rng(trial_seed(spec.seed, 0xadfULL));
    const std::size_t d = target_param.size();
    Matrix rotation;
    Vec scales;
    if (spec.kind == FamilyKind::ShiftedRotatedEllipsoid) {
        rotation = detail::random_rotation(rng, d);
        scales.resize(d);
        for (std::size_t i = 0; i < d; ++i)
            scales[i] = d == 1 ? 1.0 : std::pow(10.0, double(i) / double(d - 1));
    }
    Family fam;
    fam.spec = spec;
    fam.premises_hold = spec.kind == FamilyKind::ShiftedSphere;
    fam.target = detail::build_task(spec, "target", target_param, rotation, scales);
    for (int i = 0; i < k; ++i) {
        Vec theta = target_param;
        theta[0] += rng.uniform(2.0 * spec.spread, 3.0 * spec.spread);
        for (std::size_t j = 1; j < d; ++j)
            theta[j] += rng.uniform(-0.5 * spec.spread, 0.5 * spec.spread);
        Task t = detail::build_task(spec, "source-" + std::to_string(i), theta, rotation, scales);
        Knowledge know{detail::task_optimum(spec, theta), t.id, false, false};
        fam.pool.entries.push_back(transfer::SourceEntry{std::move(t), std::move(know)});
    }
    fam.pool.validate();
    return fam;
}

/// Variant with population-statistics observables: every task is described by
/// a sampled point cloud around its parameter with a task-specific spread, so
/// covariances genuinely differ between tasks and affine mapping has
/// something to match beyond the mean. No exact scalar link exists here;
/// gates fall back to the usefulness oracle.
inline Family make_population_family(const FamilySpec& spec, int k, const Vec& target_param,
                                     int cloud_size = 100) {
    Family fam = make_family(spec, k, target_param);
    fam.premises_hold = false;
    Rng rng(trial_seed(spec.seed, 0xc10dULL));
    const std::size_t d = target_param.size();

    const auto cloud_observable = [&](const Vec& center) {
        // task-specific anisotropic spread, small enough that the cloud mean
        // pins the task parameter to a few percent of the spread
        Vec axis_scales(d);
        for (double& s : axis_scales) s = spec.spread * rng.uniform(0.02, 0.1);
        const Matrix rot = detail::random_rotation(rng, d);
        std::vector<Vec> points;
        points.reserve(cloud_size);
        for (int i = 0; i < cloud_size; ++i) {
            Vec z(d);
            for (std::size_t j = 0; j < d; ++j) z[j] = axis_scales[j] * rng.normal();
            points.push_back(add(center, rot * z));
        }
        return population_statistics(points);
    };

    fam.target.observable = cloud_observable(target_param);
    for (auto& entry : fam.pool.entries)
        entry.task.observable = cloud_observable(entry.task.observable.params());
    return fam;
}

// ---------------------------------------------------------------------------
// Finite enumerable families
// ---------------------------------------------------------------------------

/// A finite function family over |X| points, explicitly enumerated.
struct FiniteTaskFamily {
    int size_x = 0;
    int value_set_size = 0;
    std::vector<std::vector<int>> functions;  // sorted canonically
    std::vector<double> distribution;         // aligned with `functions`
    bool closed_under_permutation = false;    // verified at construction

    void validate_distribution() const {
        if (distribution.size() != functions.size())
            throw LengthMismatch("distribution size must match function count");
        double sum = 0.0;
        for (double p : distribution) {
            if (p < 0.0) throw WeightSumViolation("negative probability");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-12) throw WeightSumViolation("distribution must sum to 1");
    }
};

/// Closure of the seed table under all domain permutations, deduplicated and
/// sorted. The closure property is verified explicitly afterwards rather
/// than assumed from the construction.
inline FiniteTaskFamily make_finite_family(const std::vector<int>& seed_table,
                                           std::optional<std::vector<double>> custom = {}) {
    const std::size_t n = seed_table.size();
    if (n == 0 || n > 6) throw SpaceTooLarge("solution space limited to 1..6 points");
    std::set<int> values(seed_table.begin(), seed_table.end());
    if (values.size() > 4) throw SpaceTooLarge("value set limited to 4 distinct values");

    std::set<std::vector<int>> closure;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    do {
        std::vector<int> g(n);
        for (std::size_t x = 0; x < n; ++x) g[x] = seed_table[perm[x]];
        closure.insert(std::move(g));
    } while (std::next_permutation(perm.begin(), perm.end()));

    FiniteTaskFamily fam;
    fam.size_x = static_cast<int>(n);
    fam.value_set_size = static_cast<int>(values.size());
    fam.functions.assign(closure.begin(), closure.end());

    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    fam.closed_under_permutation = true;
    do {
        for (const auto& g : fam.functions) {
            std::vector<int> h(n);
            for (std::size_t x = 0; x < n; ++x) h[x] = g[perm[x]];
            if (!closure.count(h)) {
                fam.closed_under_permutation = false;
                break;
            }
        }
    } while (fam.closed_under_permutation && std::next_permutation(perm.begin(), perm.end()));

    if (custom) {
        fam.distribution = std::move(*custom);
    } else {
        fam.distribution.assign(fam.functions.size(), 1.0 / double(fam.functions.size()));
    }
    fam.validate_distribution();
    return fam;
}

}  // namespace eto::tasks
