#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eto/errors.hpp"
#include "eto/kernel.hpp"
#include "eto/linalg.hpp"
#include "eto/similarity.hpp"

namespace eto::transfer {

using similarity::SimilarityMetric;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct SourceEntry {
    Task task;
    Knowledge knowledge;
};

/// k >= 1 source tasks paired with their transferable knowledge.
struct SourcePool {
    std::vector<SourceEntry> entries;

    void validate() const {
        if (entries.empty()) throw EmptyPool("source pool is empty");
        for (const auto& e : entries)
            if (e.knowledge.origin != e.task.id)
                throw KindMismatch("knowledge origin does not match its task");
    }

    std::size_t size() const { return entries.size(); }
};

enum class MappingFamily { Translation, Affine, MixtureWeights };

struct MappingHypothesis {
    MappingFamily family = MappingFamily::Translation;
    int max_iters = 200;
    double step_tolerance = 1e-12;
};

enum class GateMode { Explicit, MixtureWashout };

struct EvaluationGate {
    SimilarityScore threshold;
    GateMode mode = GateMode::Explicit;
};

enum class Stage : char { R = 'r', M = 'm', E = 'e' };

/// An ordered composition of subprocess stages.
///
/// IMPORTANT ORDER CONVENTION: stages execute left to right, and method
/// strings read the same way ("e>m" evaluates first, then maps the survivor).
/// This is what makes the infimum classes below consistent: "m>e" gates last
/// and has worst-case gain 0, while "e>m" maps after the gate and has
/// worst-case gain delta_u (the measured mapping improvement). Every consumer
/// of TransferMethod relies on this reading.
struct TransferMethod {
    std::vector<Stage> stages;

    void validate() const {
        if (stages.empty() || stages.size() > 3)
            throw LengthMismatch("method needs 1 to 3 stages");
        for (std::size_t i = 0; i < stages.size(); ++i)
            for (std::size_t j = i + 1; j < stages.size(); ++j)
                if (stages[i] == stages[j]) throw DuplicateValues("repeated stage in method");
    }

    bool contains(Stage s) const {
        return std::find(stages.begin(), stages.end(), s) != stages.end();
    }

    std::string str() const {
        std::string out;
        for (Stage s : stages) {
            if (!out.empty()) out += '>';
            out += static_cast<char>(s);
        }
        return out;
    }

    static TransferMethod parse(const std::string& text) {
        TransferMethod m;
        for (std::size_t i = 0; i < text.size(); ++i) {
            const char c = text[i];
            if (c == '>') continue;
            switch (c) {
                case 'r': m.stages.push_back(Stage::R); break;
                case 'm': m.stages.push_back(Stage::M); break;
                case 'e': m.stages.push_back(Stage::E); break;
                default:
                    throw LengthMismatch("bad method string: " + text);
            }
        }
        m.validate();
        return m;
    }

    auto operator<=>(const TransferMethod&) const = default;
};

/// One knowledge-transfer episode: the measured gain and its provenance.
struct GainRecord {
    TransferMethod method;
    double delta = 0.0;       // usefulness gain over the incumbent
    bool transferred = false; // false when the episode kept the incumbent
    std::uint64_t seed = 0;
};

/// Worst-case gain per method for given u_min, u_tau and delta_u.
struct InfimumAnalysis {
    double u_min = 0.0;
    double u_tau = 0.0;
    double delta_u = 0.0;
    std::map<TransferMethod, double> per_method;
};

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

struct RetrievalResult {
    Knowledge knowledge;
    SimilarityScore score;
    std::size_t index = 0;
};

/// Picks the pool entry with the highest observable similarity to the target.
/// Exact ties between the top two scores surface as errors instead of being
/// broken silently.
inline RetrievalResult retrieve_hard(const SourcePool& pool, const ObservableProperty& target,
                                     const SimilarityMetric& metric) {
    pool.validate();
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    bool tied = false;
    for (std::size_t i = 0; i < pool.entries.size(); ++i) {
        const double s = similarity::measure(metric, pool.entries[i].task.observable, target).value;
        if (s > best_score) {
            best_score = s;
            best = i;
            tied = false;
        } else if (s == best_score) {
            tied = true;
        }
    }
    if (tied && pool.size() > 1) throw TiedArgmax("two sources share the top similarity");
    return RetrievalResult{pool.entries[best].knowledge, SimilarityScore(best_score), best};
}

/// Softmax contribution weights over the pool; temperature -> 0 approaches
/// hard selection.
inline std::vector<double> retrieve_soft(const SourcePool& pool, const ObservableProperty& target,
                                         const SimilarityMetric& metric, double temperature) {
    pool.validate();
    if (!(temperature > 0.0)) throw OutOfRange("temperature must be > 0");
    std::vector<double> logits(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        logits[i] =
            similarity::measure(metric, pool.entries[i].task.observable, target).value / temperature;
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& l : logits) {
        l = std::exp(l - top);
        sum += l;
    }
    for (double& l : logits) l /= sum;
    return logits;
}

// ---------------------------------------------------------------------------
// Mapping
// ---------------------------------------------------------------------------

/// A learned solution-space transform y = A x + b (A empty for pure
/// translations). Bounds, when present, clamp mapped solutions.
struct MappingDescriptor {
    MappingFamily family = MappingFamily::Translation;
    std::optional<Matrix> linear;
    Vec offset;
    std::optional<Bounds> target_bounds;
    bool not_realizable = false;
    bool converged = true;

    std::size_t dimension() const { return offset.size(); }

    static MappingDescriptor identity(std::size_t dim) {
        MappingDescriptor d;
        d.offset.assign(dim, 0.0);
        d.not_realizable = true;
        return d;
    }
};

struct LearnResult {
    MappingDescriptor descriptor;
    SimilarityScore achieved;
    SimilarityScore before;
};

namespace detail {

inline Vec transform(const MappingDescriptor& d, const Vec& x) {
    if (x.size() != d.dimension()) throw DimensionMismatch("mapping dimension mismatch");
    Vec y = d.linear ? (*d.linear) * x : x;
    return add(y, d.offset);
}

}  // namespace detail

/// Maps an observable through the descriptor (covariances transform as
/// A S A^T; pure translations leave them untouched).
inline ObservableProperty map_observable(const MappingDescriptor& d,
                                         const ObservableProperty& obs) {
    if (obs.kind() == ObservableKind::ParamVector)
        return ObservableProperty::from_params(detail::transform(d, obs.params()));
    const auto& st = obs.stats();
    Vec mean = detail::transform(d, st.mean);
    Matrix cov = st.covariance;
    if (d.linear) cov = (*d.linear) * cov * d.linear->transpose();
    // symmetrize away rounding before revalidation
    for (std::size_t i = 0; i < cov.rows(); ++i)
        for (std::size_t j = i + 1; j < cov.cols(); ++j) {
            const double v = 0.5 * (cov(i, j) + cov(j, i));
            cov(i, j) = v;
            cov(j, i) = v;
        }
    return ObservableProperty::from_stats(std::move(mean), std::move(cov), st.sample_count);
}

/// Learns the similarity-maximizing transform within the hypothesis family,
/// working purely in observable space. Translation matches locations;
/// Affine additionally matches covariances through the optimal-transport map
/// between the moment-matched Gaussians. Returns identity (flagged
/// not_realizable) when no strict improvement exists.
inline LearnResult learn_mapping_observables(const ObservableProperty& source_obs,
                                             const ObservableProperty& target_obs,
                                             const MappingHypothesis& hypothesis,
                                             const SimilarityMetric& metric) {
    if (hypothesis.family == MappingFamily::MixtureWeights)
        throw UnsupportedObservable("mixture mapping works on pools; use map_mixture");
    const std::size_t dim = source_obs.dimension();
    if (hypothesis.family == MappingFamily::Affine && dim > 50)
        throw OutOfRange("affine mapping limited to d <= 50");

    const SimilarityScore before = similarity::measure(metric, source_obs, target_obs);

    MappingDescriptor d;
    d.family = hypothesis.family;
    if (source_obs.kind() == ObservableKind::ParamVector ||
        hypothesis.family == MappingFamily::Translation) {
        d.offset = sub(target_obs.location(), source_obs.location());
    } else {
        // Gaussian optimal transport: A = S_s^{-1/2} (S_s^{1/2} S_t S_s^{1/2})^{1/2} S_s^{-1/2}
        const Matrix& ss = source_obs.stats().covariance;
        const Matrix& st = target_obs.stats().covariance;
        const Matrix root = psd_sqrt(ss);
        const Matrix inv_root = psd_inv_sqrt(ss);
        const Matrix a = inv_root * psd_sqrt(root * st * root) * inv_root;
        d.linear = a;
        d.offset = sub(target_obs.stats().mean, a * source_obs.stats().mean);
    }

    const SimilarityScore achieved =
        similarity::measure(metric, map_observable(d, source_obs), target_obs);
    if (!(achieved.value > before.value))
        return LearnResult{MappingDescriptor::identity(dim), before, before};
    return LearnResult{d, achieved, before};
}

/// Spec-level entry point: learn a mapping for one source task's knowledge.
inline LearnResult learn_mapping(const Task& source, const Knowledge& source_knowledge,
                                 const ObservableProperty& target_observable,
                                 const MappingHypothesis& hypothesis,
                                 const SimilarityMetric& metric) {
    if (source_knowledge.solution.size() != source.dimension())
        throw DimensionMismatch("knowledge does not fit its source task");
    return learn_mapping_observables(source.observable, target_observable, hypothesis, metric);
}

/// Applies the learned transform to a solution, clamping into the target
/// bounds when the descriptor carries them.
inline Knowledge apply_mapping(const MappingDescriptor& d, const Knowledge& v) {
    Vec y = detail::transform(d, v.solution);
    Knowledge out = v;
    out.adapted = true;
    if (d.target_bounds) {
        if (d.target_bounds->size() != y.size())
            throw DimensionMismatch("bounds dimension mismatch");
        for (std::size_t i = 0; i < y.size(); ++i) {
            const auto [lo, hi] = (*d.target_bounds)[i];
            const double c = std::clamp(y[i], lo, hi);
            if (c != y[i]) out.clamped = true;
            y[i] = c;
        }
    }
    out.solution = std::move(y);
    return out;
}

/// Convex combination of the pool's solutions under the given weights.
inline Knowledge map_mixture(const SourcePool& pool, const std::vector<double>& weights,
                             const ObservableProperty& target, const SimilarityMetric& metric) {
    pool.validate();
    metric.validate();
    if (weights.size() != pool.size()) throw LengthMismatch("one weight per pool entry");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw WeightSumViolation("negative weight");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw WeightSumViolation("weights must sum to 1");
    const std::size_t dim = pool.entries.front().knowledge.solution.size();
    for (const auto& e : pool.entries)
        if (e.knowledge.solution.size() != dim) throw DimensionMismatch("pool solution dims differ");
    if (target.dimension() != pool.entries.front().task.observable.dimension())
        throw DimensionMismatch("target observable dimension differs from pool");

    Vec combined(dim, 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j)
            combined[j] += weights[i] * pool.entries[i].knowledge.solution[j];
    return Knowledge{std::move(combined), "mixture", true, false};
}

/// Pairwise Frank-Wolfe simplex search minimizing the distance between the
/// weighted location combination and the target location. Both parameter
/// metrics are monotone in this distance, so the argmax of similarity
/// coincides with the argmin here. Starts at the best single vertex, which
/// keeps the optimized mixture at least as similar as any vertex; pairwise
/// steps shift weight from the worst active vertex to the best one and
/// converge linearly on this quadratic.
inline std::vector<double> optimize_mixture_weights(const std::vector<Vec>& locations,
                                                    const Vec& target, int max_iters,
                                                    double step_tolerance) {
    if (locations.empty()) throw EmptyPool("no mixture candidates");
    const std::size_t k = locations.size();
    const std::size_t dim = target.size();
    for (const auto& l : locations)
        if (l.size() != dim) throw DimensionMismatch("mixture candidate dimension");

    std::size_t start = 0;
    double best = distance(locations[0], target);
    for (std::size_t i = 1; i < k; ++i) {
        const double d = distance(locations[i], target);
        if (d < best) {
            best = d;
            start = i;
        }
    }
    std::vector<double> w(k, 0.0);
    w[start] = 1.0;
    if (k == 1) return w;

    Vec point = locations[start];
    for (int iter = 0; iter < max_iters; ++iter) {
        const Vec residual = sub(point, target);
        std::size_t toward = 0;  // steepest-descent vertex
        std::size_t away = 0;    // worst vertex currently carrying weight
        double g_toward = std::numeric_limits<double>::infinity();
        double g_away = -std::numeric_limits<double>::infinity();
        double g_current = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double g = dot(locations[i], residual);
            g_current += w[i] * g;
            if (g < g_toward) {
                g_toward = g;
                toward = i;
            }
            if (w[i] > 0.0 && g > g_away) {
                g_away = g;
                away = i;
            }
        }
        if (2.0 * (g_current - g_toward) <= step_tolerance) break;  // FW duality gap

        const Vec dir = sub(locations[toward], locations[away]);
        const double denom = dot(dir, dir);
        if (denom <= 0.0) break;
        const double gamma = std::clamp(-dot(residual, dir) / denom, 0.0, w[away]);
        if (gamma <= 0.0) break;
        w[away] -= gamma;
        w[toward] += gamma;
        point = Vec(dim, 0.0);
        for (std::size_t i = 0; i < k; ++i) {
            if (w[i] == 0.0) continue;
            for (std::size_t d2 = 0; d2 < dim; ++d2) point[d2] += w[i] * locations[i][d2];
        }
    }

    double sum = 0.0;
    for (double wi : w) sum += wi;
    for (double& wi : w) wi /= sum;
    return w;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Transfer fires only on a strictly greater similarity; anything at or below
/// the threshold keeps the incumbent.
inline Knowledge evaluate_gate(const EvaluationGate& gate, const Knowledge& candidate,
                               SimilarityScore candidate_similarity, const TargetState& state) {
    return candidate_similarity.value > gate.threshold.value ? candidate : state.incumbent;
}

/// Inverts the family's ground-truth link at the incumbent usefulness by
/// bisection. The 1e-10 tolerance is an upper bound; the search actually runs
/// to the floating-point limit so threshold comparisons stay consistent with
/// the link.
inline SimilarityScore calibrate_threshold(const TargetState& state, const MonotoneLink& link) {
    if (!link.eval) throw LinkNotInvertible("link has no evaluator");
    if (!(link.domain_lo < link.domain_hi)) throw LinkNotInvertible("empty link domain");

    const int probes = 129;
    double prev = link.eval(link.domain_lo);
    int direction = 0;
    for (int i = 1; i < probes; ++i) {
        const double s =
            link.domain_lo + (link.domain_hi - link.domain_lo) * i / double(probes - 1);
        const double u = link.eval(s);
        const int step = u > prev ? 1 : (u < prev ? -1 : 0);
        if (step == 0) throw LinkNotInvertible("link is flat on a subinterval");
        if (direction == 0) direction = step;
        if (step != direction) throw LinkNotInvertible("link is not monotone on its domain");
        prev = u;
    }

    const double u_tau = state.incumbent_usefulness.value;
    double lo = link.domain_lo;
    double hi = link.domain_hi;
    double u_lo = link.eval(lo);
    double u_hi = link.eval(hi);
    if (direction < 0) {
        std::swap(lo, hi);
        std::swap(u_lo, u_hi);
    }
    if (u_tau < std::min(u_lo, u_hi) || u_tau > std::max(u_lo, u_hi))
        throw OutOfRange("incumbent usefulness outside the link image");

    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (link.eval(mid) < u_tau)
            lo = mid;
        else
            hi = mid;
    }
    return SimilarityScore(0.5 * (lo + hi));
}

struct Classification {
    std::vector<std::size_t> v_plus;   // indices with similarity above the threshold
    std::vector<std::size_t> v_minus;  // indices strictly below
};

/// Strict-threshold partition of the pool; exact ties are surfaced as errors.
inline Classification classify_pool(const SourcePool& pool, const ObservableProperty& target,
                                    const SimilarityMetric& metric, const EvaluationGate& gate) {
    pool.validate();
    Classification c;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double s = similarity::measure(metric, pool.entries[i].task.observable, target).value;
        if (s == gate.threshold.value)
            throw ThresholdTie("similarity equals the threshold at pool index " +
                               std::to_string(i));
        (s > gate.threshold.value ? c.v_plus : c.v_minus).push_back(i);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Composition engine
// ---------------------------------------------------------------------------

/// All 15 stage compositions: 3 singletons, 6 ordered pairs, 6 ordered
/// triples of distinct stages.
inline std::vector<TransferMethod> enumerate_methods() {
    const std::vector<Stage> all{Stage::R, Stage::M, Stage::E};
    std::vector<TransferMethod> out;
    for (Stage a : all) out.push_back(TransferMethod{{a}});
    for (Stage a : all)
        for (Stage b : all)
            if (a != b) out.push_back(TransferMethod{{a, b}});
    for (Stage a : all)
        for (Stage b : all)
            for (Stage c : all)
                if (a != b && a != c && b != c) out.push_back(TransferMethod{{a, b, c}});
    return out;
}

enum class InfimumClass {
    RetrievalFloor,  // u_min - u_tau, can be negative
    MappingFloor,    // u_min + delta_u - u_tau, can be negative
    Zero,            // evaluation present, nothing harmful after the last gate
    DeltaU           // mapping runs after the last gate and adds delta_u
};

inline InfimumClass infimum_class(const TransferMethod& method) {
    method.validate();
    if (!method.contains(Stage::E))
        return method.contains(Stage::M) ? InfimumClass::MappingFloor
                                         : InfimumClass::RetrievalFloor;
    std::size_t last_e = 0;
    for (std::size_t i = 0; i < method.stages.size(); ++i)
        if (method.stages[i] == Stage::E) last_e = i;
    for (std::size_t i = last_e + 1; i < method.stages.size(); ++i)
        if (method.stages[i] == Stage::M) return InfimumClass::DeltaU;
    return InfimumClass::Zero;
}

inline const char* infimum_class_label(InfimumClass c) {
    switch (c) {
        case InfimumClass::RetrievalFloor: return "retrieval-floor";
        case InfimumClass::MappingFloor: return "mapping-floor";
        case InfimumClass::Zero: return "zero-infimum";
        case InfimumClass::DeltaU: return "delta-u";
    }
    return "?";
}

/// Worst-case gain of every composition for the given scalars.
inline InfimumAnalysis infimum_table(double u_min, double u_tau, double delta_u) {
    if (delta_u < 0.0) throw NegativeDeltaU("delta_u must be nonnegative");
    InfimumAnalysis a;
    a.u_min = u_min;
    a.u_tau = u_tau;
    a.delta_u = delta_u;
    for (const auto& m : enumerate_methods()) {
        double inf = 0.0;
        switch (infimum_class(m)) {
            case InfimumClass::RetrievalFloor: inf = u_min - u_tau; break;
            case InfimumClass::MappingFloor: inf = u_min + delta_u - u_tau; break;
            case InfimumClass::Zero: inf = 0.0; break;
            case InfimumClass::DeltaU: inf = delta_u; break;
        }
        a.per_method.emplace(m, inf);
    }
    return a;
}

/// Everything a composed method needs at execution time. The usefulness
/// oracle is injected so this layer stays independent of any task family.
struct ExecutionContext {
    SimilarityMetric metric;
    EvaluationGate gate;
    MappingHypothesis hypothesis;
    ObservableProperty target_observable;
    Bounds target_bounds;
    std::function<double(const Knowledge&)> usefulness;
    std::uint64_t seed = 0;
    // fallback when no ground-truth link exists to calibrate a threshold:
    // the gate compares u(candidate) > u_tau directly, costing one oracle
    // evaluation per gate decision
    bool oracle_gate = false;
};

struct ExecutionResult {
    Knowledge output;
    GainRecord record;
    double measured_delta_u = 0.0;  // usefulness improvement of the mapping stage, 0 if none
};

/// Componentwise clamp of a solution into bounds, recording whether anything
/// moved.
inline void clamp_into(Knowledge& k, const Bounds& bounds) {
    if (bounds.size() != k.solution.size())
        throw DimensionMismatch("bounds dimension mismatch");
    for (std::size_t j = 0; j < k.solution.size(); ++j) {
        const auto [lo, hi] = bounds[j];
        const double c = std::clamp(k.solution[j], lo, hi);
        if (c != k.solution[j]) k.clamped = true;
        k.solution[j] = c;
    }
}

namespace detail {

struct WorkingCandidate {
    Knowledge knowledge;
    ObservableProperty observable;
    double similarity = 0.0;
    bool is_incumbent = false;
    bool from_pool = false;
};

/// Weighted combination of observables: locations always combine; population
/// covariances combine with the same weights.
inline ObservableProperty blend_observables(const std::vector<const ObservableProperty*>& obs,
                                            const std::vector<double>& weights) {
    if (obs.empty() || obs.size() != weights.size())
        throw LengthMismatch("one weight per observable");
    const std::size_t dim = obs.front()->dimension();
    Vec location(dim, 0.0);
    for (std::size_t i = 0; i < obs.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j)
            location[j] += weights[i] * obs[i]->location()[j];
    if (obs.front()->kind() == ObservableKind::ParamVector)
        return ObservableProperty::from_params(std::move(location));
    Matrix cov(dim, dim);
    int count = obs.front()->stats().sample_count;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& st = obs[i]->stats();
        count = std::min(count, st.sample_count);
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t c = 0; c < dim; ++c) cov(r, c) += weights[i] * st.covariance(r, c);
    }
    return ObservableProperty::from_stats(std::move(location), std::move(cov), count);
}

/// The incumbent participates in retrieval and mixtures through a virtual
/// observable placed at its own solution, so its similarity is exactly the
/// value the family link assigns to its usefulness.
inline ObservableProperty incumbent_observable(const Knowledge& incumbent,
                                               const ObservableProperty& target_obs) {
    if (target_obs.kind() == ObservableKind::ParamVector)
        return ObservableProperty::from_params(incumbent.solution);
    const auto& st = target_obs.stats();
    return ObservableProperty::from_stats(incumbent.solution, st.covariance, st.sample_count);
}

inline WorkingCandidate pick_from_pool(const SourcePool& pool, const ExecutionContext& ctx) {
    const RetrievalResult r = retrieve_hard(pool, ctx.target_observable, ctx.metric);
    return WorkingCandidate{r.knowledge, pool.entries[r.index].task.observable, r.score.value,
                            false, true};
}

}  // namespace detail

/// Runs the stages of `method` in list order against the pool and the current
/// target state. Stages that need a single candidate while none is selected
/// perform an implicit hard retrieval (not counted as an R stage). Retrieval
/// and mixture stages consider the current candidate alongside the pool,
/// which is what keeps every evaluation-bearing composition from undoing the
/// gate's guarantee. Uses no randomness: identical inputs give identical
/// records.
inline ExecutionResult execute_method(const TransferMethod& method, const SourcePool& pool,
                                      const TargetState& state, const ExecutionContext& ctx) {
    method.validate();
    pool.validate();
    if (!ctx.usefulness) throw OutOfRange("execution context needs a usefulness oracle");

    const ObservableProperty incumbent_obs =
        detail::incumbent_observable(state.incumbent, ctx.target_observable);
    const double incumbent_similarity =
        similarity::measure(ctx.metric, incumbent_obs, ctx.target_observable).value;

    std::optional<detail::WorkingCandidate> current;
    const auto ensure_candidate = [&] {
        if (!current) current = detail::pick_from_pool(pool, ctx);
    };

    double measured_delta_u = 0.0;

    for (Stage stage : method.stages) {
        switch (stage) {
            case Stage::R: {
                detail::WorkingCandidate best = detail::pick_from_pool(pool, ctx);
                if (current && !current->from_pool) {
                    if (current->similarity == best.similarity)
                        throw TiedArgmax("current candidate ties the best source");
                    if (current->similarity > best.similarity) best = *current;
                }
                current = std::move(best);
                break;
            }
            case Stage::M: {
                ensure_candidate();
                if (ctx.hypothesis.family == MappingFamily::MixtureWeights) {
                    std::vector<Vec> locations;
                    std::vector<const Knowledge*> solutions;
                    std::vector<const ObservableProperty*> observables;
                    for (const auto& e : pool.entries) {
                        locations.push_back(e.task.observable.location());
                        solutions.push_back(&e.knowledge);
                        observables.push_back(&e.task.observable);
                    }
                    if (!current->from_pool) {
                        locations.push_back(current->observable.location());
                        solutions.push_back(&current->knowledge);
                        observables.push_back(&current->observable);
                    }
                    const std::vector<double> w = optimize_mixture_weights(
                        locations, ctx.target_observable.location(), ctx.hypothesis.max_iters,
                        ctx.hypothesis.step_tolerance);

                    Vec combined_solution(current->knowledge.solution.size(), 0.0);
                    for (std::size_t i = 0; i < w.size(); ++i)
                        for (std::size_t j = 0; j < combined_solution.size(); ++j)
                            combined_solution[j] += w[i] * solutions[i]->solution[j];
                    if (combined_solution == current->knowledge.solution) break;  // mixture no-op

                    const double u_pre = ctx.usefulness(current->knowledge);
                    Knowledge mixed{std::move(combined_solution), "mixture", true, false};
                    clamp_into(mixed, ctx.target_bounds);
                    ObservableProperty mixed_obs = detail::blend_observables(observables, w);
                    const double sim =
                        similarity::measure(ctx.metric, mixed_obs, ctx.target_observable).value;
                    measured_delta_u = ctx.usefulness(mixed) - u_pre;
                    current = detail::WorkingCandidate{std::move(mixed), std::move(mixed_obs), sim,
                                                       false, false};
                } else {
                    const LearnResult learned = learn_mapping_observables(
                        current->observable, ctx.target_observable, ctx.hypothesis, ctx.metric);
                    if (learned.descriptor.not_realizable) break;  // identity, nothing to apply

                    MappingDescriptor d = learned.descriptor;
                    d.target_bounds = ctx.target_bounds;
                    const double u_pre = ctx.usefulness(current->knowledge);
                    Knowledge mapped = apply_mapping(d, current->knowledge);
                    ObservableProperty mapped_obs = map_observable(d, current->observable);
                    measured_delta_u = ctx.usefulness(mapped) - u_pre;
                    current = detail::WorkingCandidate{std::move(mapped), std::move(mapped_obs),
                                                       learned.achieved.value, false, false};
                }
                break;
            }
            case Stage::E: {
                ensure_candidate();
                if (current->is_incumbent) break;
                if (ctx.gate.mode == GateMode::MixtureWashout) {
                    // two-component mixture against the incumbent; a vanishing
                    // candidate weight cancels the transfer
                    const std::vector<Vec> locations{current->observable.location(),
                                                     incumbent_obs.location()};
                    const std::vector<double> w = optimize_mixture_weights(
                        locations, ctx.target_observable.location(), ctx.hypothesis.max_iters,
                        ctx.hypothesis.step_tolerance);
                    if (w[0] < 1e-6) {
                        current = detail::WorkingCandidate{state.incumbent, incumbent_obs,
                                                           incumbent_similarity, true, false};
                        break;
                    }
                    Vec blended(current->knowledge.solution.size());
                    for (std::size_t j = 0; j < blended.size(); ++j)
                        blended[j] = w[0] * current->knowledge.solution[j] +
                                     w[1] * state.incumbent.solution[j];
                    Knowledge kept{std::move(blended), "mixture", true, false};
                    clamp_into(kept, ctx.target_bounds);
                    const std::vector<const ObservableProperty*> obs{&current->observable,
                                                                     &incumbent_obs};
                    ObservableProperty kept_obs = detail::blend_observables(obs, w);
                    const double sim =
                        similarity::measure(ctx.metric, kept_obs, ctx.target_observable).value;
                    current = detail::WorkingCandidate{std::move(kept), std::move(kept_obs), sim,
                                                       false, false};
                } else {
                    const bool accept =
                        ctx.oracle_gate
                            ? ctx.usefulness(current->knowledge) >
                                  state.incumbent_usefulness.value
                            : current->similarity > ctx.gate.threshold.value;
                    if (!accept)
                        current = detail::WorkingCandidate{state.incumbent, incumbent_obs,
                                                           incumbent_similarity, true, false};
                }
                break;
            }
        }
    }

    ensure_candidate();
    Knowledge output = current->knowledge;
    const bool transferred = !(output.solution == state.incumbent.solution);
    GainRecord record;
    record.method = method;
    record.seed = ctx.seed;
    record.transferred = transferred;
    record.delta =
        transferred ? ctx.usefulness(output) - state.incumbent_usefulness.value : 0.0;
    return ExecutionResult{std::move(output), std::move(record), measured_delta_u};
}

}  // namespace eto::transfer
