#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eto/errors.hpp"
#include "eto/kernel.hpp"
#include "eto/rng.hpp"

namespace eto::evolver {

struct EvolverConfig {
    int mu = 10;
    int lambda = 20;
    double sigma0 = 0.3;
    int budget = 2000;
    std::uint64_t seed = 0;
    bool self_adaptive = true;  // log-normal step-size adaptation

    void validate() const {
        if (mu < 1 || lambda < mu) throw OutOfRange("need lambda >= mu >= 1");
        if (!(sigma0 > 0.0)) throw OutOfRange("sigma0 must be > 0");
        if (budget < mu) throw BudgetTooSmall("budget below initial population size");
    }

    bool operator==(const EvolverConfig&) const = default;
};

/// The strong and weak baseline configurations used by the transfer races.
inline EvolverConfig solver_a(int budget, std::uint64_t seed) {
    return EvolverConfig{10, 20, 0.3, budget, seed, true};
}
inline EvolverConfig solver_b(int budget, std::uint64_t seed) {
    return EvolverConfig{10, 20, 3.0, budget, seed, false};
}

struct RunTrace {
    std::vector<std::pair<int, double>> best_per_generation;  // (eval_count, best objective)
    std::vector<Vec> final_population;
    Knowledge incumbent;
};

using eto::population_statistics;

/// Elitist (mu+lambda) evolution strategy with log-normal step-size
/// self-adaptation and reflection at the bounds. Deliberately plain: it is a
/// controlled instrument for the transfer experiments, not a competitive
/// solver.
class EvolutionStrategy {
public:
    EvolutionStrategy(Task task, EvolverConfig config)
        : task_(std::move(task)), config_(config), rng_(config.seed),
          learning_rate_(1.0 / std::sqrt(2.0 * double(task_.dimension()))) {
        config_.validate();
        task_.validate();
        population_.reserve(config_.mu);
        for (int i = 0; i < config_.mu; ++i) {
            Individual ind;
            ind.x.resize(task_.dimension());
            for (std::size_t j = 0; j < ind.x.size(); ++j)
                ind.x[j] = rng_.uniform(task_.bounds[j].first, task_.bounds[j].second);
            ind.sigma = config_.sigma0;
            ind.value = evaluate(ind.x);
            population_.push_back(std::move(ind));
        }
        sort_population();
        record_generation();
    }

    int evaluations() const { return evaluations_; }
    bool exhausted() const { return evaluations_ + config_.lambda > config_.budget; }
    double best_objective() const { return population_.front().value; }

    /// One (mu+lambda) generation; returns false when the budget cannot fit
    /// another full offspring batch.
    bool step() {
        if (exhausted()) return false;
        std::vector<Individual> offspring;
        offspring.reserve(config_.lambda);
        for (int i = 0; i < config_.lambda; ++i) {
            const Individual& parent = population_[rng_.uniform_int(population_.size())];
            Individual child;
            child.sigma = config_.self_adaptive
                              ? parent.sigma * std::exp(learning_rate_ * rng_.normal())
                              : parent.sigma;
            child.x.resize(parent.x.size());
            for (std::size_t j = 0; j < child.x.size(); ++j)
                child.x[j] = reflect(parent.x[j] + child.sigma * rng_.normal(),
                                     task_.bounds[j].first, task_.bounds[j].second);
            child.value = evaluate(child.x);
            offspring.push_back(std::move(child));
        }
        for (auto& c : offspring) population_.push_back(std::move(c));
        sort_population();
        population_.resize(config_.mu);
        record_generation();
        return true;
    }

    /// Replaces the current worst individual with the given knowledge.
    /// Consumes one objective evaluation; a no-op if the budget is spent.
    void inject(const Knowledge& k) {
        if (k.solution.size() != task_.dimension())
            throw DimensionMismatch("injected knowledge dimension");
        if (evaluations_ >= config_.budget) return;
        Individual ind;
        ind.x = k.solution;
        for (std::size_t j = 0; j < ind.x.size(); ++j)
            ind.x[j] = std::clamp(ind.x[j], task_.bounds[j].first, task_.bounds[j].second);
        ind.sigma = config_.sigma0;
        ind.value = evaluate(ind.x);
        population_.back() = std::move(ind);
        sort_population();
    }

    /// Current population summarized as an observable.
    ObservableProperty snapshot_observable() const {
        std::vector<Vec> points;
        points.reserve(population_.size());
        for (const auto& ind : population_) points.push_back(ind.x);
        return population_statistics(points);
    }

    /// The best solution seen, packaged as transferable knowledge.
    Knowledge incumbent() const {
        return Knowledge{population_.front().x, task_.id, false, false};
    }

    RunTrace trace() const {
        RunTrace t;
        t.best_per_generation = history_;
        for (const auto& ind : population_) t.final_population.push_back(ind.x);
        t.incumbent = incumbent();
        return t;
    }

private:
    struct Individual {
        Vec x;
        double sigma = 0.0;
        double value = 0.0;
    };

    double evaluate(const Vec& x) {
        ++evaluations_;
        return task_.objective(x);
    }

    static double reflect(double x, double lo, double hi) {
        const double width = hi - lo;
        if (width <= 0.0) return lo;
        double t = std::fmod(x - lo, 2.0 * width);
        if (t < 0.0) t += 2.0 * width;
        return t <= width ? lo + t : hi - (t - width);
    }

    void sort_population() {
        std::stable_sort(population_.begin(), population_.end(),
                         [](const Individual& a, const Individual& b) { return a.value < b.value; });
    }

    void record_generation() { history_.emplace_back(evaluations_, population_.front().value); }

    Task task_;
    EvolverConfig config_;
    Rng rng_;
    double learning_rate_;
    std::vector<Individual> population_;
    std::vector<std::pair<int, double>> history_;
    int evaluations_ = 0;
};

/// Runs a full budgeted optimization.
inline RunTrace run(const Task& task, const EvolverConfig& config) {
    EvolutionStrategy es(task, config);
    while (es.step()) {
    }
    return es.trace();
}

}  // namespace eto::evolver
