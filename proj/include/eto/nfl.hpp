#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "eto/errors.hpp"
#include "eto/linalg.hpp"
#include "eto/tasks.hpp"

namespace eto::nfl {

using tasks::FiniteTaskFamily;

enum class BiasLabel { GeneralSearch, AnalogyTransfer };

/// History of one run: (point index, observed value) per step.
using History = std::vector<std::pair<int, int>>;

/// A deterministic, non-revisiting optimizer over a finite solution space.
/// The policy maps the history so far to the next point to probe.
struct DeterministicOptimizer {
    std::string id;
    BiasLabel bias = BiasLabel::GeneralSearch;
    std::function<int(const History&, int)> policy;
};

/// Probes points in a fixed order (the identity sweep by default).
inline DeterministicOptimizer general_search(std::vector<int> order = {}) {
    DeterministicOptimizer opt;
    opt.id = order.empty() ? "sweep" : "sweep-custom";
    opt.bias = BiasLabel::GeneralSearch;
    opt.policy = [order = std::move(order)](const History& h, int size_x) {
        const auto visited = [&](int p) {
            return std::any_of(h.begin(), h.end(), [&](const auto& s) { return s.first == p; });
        };
        if (!order.empty()) {
            for (int p : order)
                if (p >= 0 && p < size_x && !visited(p)) return p;
        }
        for (int p = 0; p < size_x; ++p)
            if (!visited(p)) return p;
        throw HorizonTooLarge("no unvisited point left");
    };
    return opt;
}

/// Probes the source task's known optimum first, then falls back to the
/// general sweep. The minimal embodiment of an analogy-based search bias.
inline DeterministicOptimizer transfer_biased(int source_optimum, std::vector<int> order = {}) {
    DeterministicOptimizer opt;
    opt.id = "transfer@" + std::to_string(source_optimum);
    opt.bias = BiasLabel::AnalogyTransfer;
    DeterministicOptimizer fallback = general_search(std::move(order));
    opt.policy = [source_optimum, fallback](const History& h, int size_x) {
        if (source_optimum >= 0 && source_optimum < size_x) {
            const bool probed = std::any_of(h.begin(), h.end(), [&](const auto& s) {
                return s.first == source_optimum;
            });
            if (!probed) return source_optimum;
        }
        return fallback.policy(h, size_x);
    };
    return opt;
}

/// Runs the optimizer on one function table for `horizon` steps, enforcing
/// the no-revisit contract.
inline History simulate(const DeterministicOptimizer& opt, const std::vector<int>& g,
                        int horizon) {
    History h;
    h.reserve(horizon);
    for (int step = 0; step < horizon; ++step) {
        const int p = opt.policy(h, static_cast<int>(g.size()));
        if (p < 0 || p >= static_cast<int>(g.size()))
            throw OutOfRange("policy returned a point outside the space");
        for (const auto& s : h)
            if (s.first == p) throw DuplicateValues("policy revisited point " + std::to_string(p));
        h.emplace_back(p, g[p]);
    }
    return h;
}

using SuccessPredicate = std::function<bool(const History&, const std::vector<int>&)>;

/// Success when the minimum value of g was observed within the horizon.
inline SuccessPredicate found_minimum() {
    return [](const History& h, const std::vector<int>& g) {
        const int target = *std::min_element(g.begin(), g.end());
        return std::any_of(h.begin(), h.end(), [&](const auto& s) { return s.second == target; });
    };
}

/// Success when the best value seen is at or below the q-quantile of g.
inline SuccessPredicate quantile_reached(double q) {
    if (q < 0.0 || q > 1.0) throw OutOfRange("quantile must be in [0,1]");
    return [q](const History& h, const std::vector<int>& g) {
        std::vector<int> sorted(g);
        std::sort(sorted.begin(), sorted.end());
        const std::size_t idx = std::min(sorted.size() - 1,
                                         static_cast<std::size_t>(q * double(sorted.size())));
        int best = h.front().second;
        for (const auto& s : h) best = std::min(best, s.second);
        return best <= sorted[idx];
    };
}

/// One 0/1 entry per family member: did the optimizer satisfy the predicate
/// on that function within the horizon? Exhaustive, no sampling.
inline Vec performance_vector(const DeterministicOptimizer& opt, const FiniteTaskFamily& family,
                              int horizon, const SuccessPredicate& predicate) {
    if (horizon < 1 || horizon > family.size_x)
        throw HorizonTooLarge("horizon must be in [1, |X|]");
    Vec out;
    out.reserve(family.functions.size());
    for (const auto& g : family.functions) {
        const History h = simulate(opt, g, horizon);
        out.push_back(predicate(h, g) ? 1.0 : 0.0);
    }
    return out;
}

/// Performance as a dot product of the 0/1 performance vector with the task
/// distribution, checked against an independently accumulated expectation.
struct AlignmentRecord {
    Vec performance_vector;
    Vec distribution_vector;
    double dot = 0.0;
    double direct_expectation = 0.0;
};

inline AlignmentRecord alignment(const DeterministicOptimizer& opt,
                                 const FiniteTaskFamily& family, int horizon,
                                 const SuccessPredicate& predicate) {
    family.validate_distribution();
    AlignmentRecord rec;
    rec.performance_vector = performance_vector(opt, family, horizon, predicate);
    rec.distribution_vector = family.distribution;
    rec.dot = dot(rec.performance_vector, rec.distribution_vector);

    // second route: re-simulate and accumulate the weighted expectation
    // directly, without materializing the performance vector
    double expectation = 0.0;
    for (std::size_t i = 0; i < family.functions.size(); ++i) {
        const History h = simulate(opt, family.functions[i], horizon);
        if (predicate(h, family.functions[i])) expectation += family.distribution[i];
    }
    rec.direct_expectation = expectation;
    return rec;
}

}  // namespace eto::nfl
