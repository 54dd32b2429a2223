#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "eto/config.hpp"
#include "eto/lab.hpp"
#include "eto/nfl.hpp"

namespace eto::harness {

namespace detail {

inline std::string fmt(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

}  // namespace detail

/// CSV series behind the schematic figures, measured from synthetic-family
/// data rather than drawn freehand:
///   fig2  monotone link curves (similarity, usefulness) under three metrics
///   fig3  mixture hull samples against the vertices
///   fig4  explicit mapping before/after pairs
///   fig5  gate partition scatter with the accept flag
///   fig6  alignment dot products per optimizer and task distribution
inline std::string figure_csv(const std::string& figure, const RunConfig& config) {
    using lab::FamilyKind;
    using lab::FamilySpec;
    using similarity::MetricKind;
    using similarity::SimilarityMetric;
    std::ostringstream out;
    const FamilySpec spec{FamilyKind::ShiftedSphere, 2, config.spread, config.seed};
    const Vec target_param{0.0, 0.0};

    if (figure == "fig2") {
        out << "metric,similarity,usefulness\n";
        const auto family = tasks::make_family(spec, 200, target_param);
        const tasks::UsefulnessOracle oracle{family.target};
        const std::vector<std::pair<std::string, SimilarityMetric>> metrics{
            {"neg_param_distance", {MetricKind::NegParamDistance, 1.0}},
            {"rbf_scale_1", {MetricKind::RbfParam, 1.0}},
            {"rbf_scale_half", {MetricKind::RbfParam, 0.5}}};
        for (const auto& [name, metric] : metrics)
            for (const auto& entry : family.pool.entries)
                out << name << ','
                    << detail::fmt(similarity::measure(metric, entry.task.observable,
                                                       family.target.observable)
                                       .value)
                    << ',' << detail::fmt(oracle(entry.knowledge).value) << '\n';
        return out.str();
    }

    if (figure == "fig3") {
        out << "kind,similarity,usefulness\n";
        const auto family = tasks::make_family(spec, 5, target_param);
        const tasks::UsefulnessOracle oracle{family.target};
        const SimilarityMetric metric{MetricKind::NegParamDistance, 1.0};
        std::vector<Vec> locations;
        for (const auto& entry : family.pool.entries) {
            locations.push_back(entry.task.observable.params());
            out << "vertex,"
                << detail::fmt(similarity::measure(metric, entry.task.observable,
                                                   family.target.observable)
                                   .value)
                << ',' << detail::fmt(oracle(entry.knowledge).value) << '\n';
        }
        Rng rng(trial_seed(config.seed, 0xf16ULL));
        for (int i = 0; i < 300; ++i) {
            // random point of the simplex by normalized exponentials
            std::vector<double> w(locations.size());
            double sum = 0.0;
            for (double& x : w) {
                x = -std::log(1.0 - rng.uniform());
                sum += x;
            }
            for (double& x : w) x /= sum;
            const Knowledge mix =
                transfer::map_mixture(family.pool, w, family.target.observable, metric);
            Vec loc(2, 0.0);
            for (std::size_t c = 0; c < locations.size(); ++c)
                for (int d = 0; d < 2; ++d) loc[d] += w[c] * locations[c][d];
            out << "mixture,"
                << detail::fmt(similarity::measure(metric,
                                                   ObservableProperty::from_params(loc),
                                                   family.target.observable)
                                   .value)
                << ',' << detail::fmt(oracle(mix).value) << '\n';
        }
        const auto best = transfer::optimize_mixture_weights(locations, target_param, 400, 1e-13);
        const Knowledge opt =
            transfer::map_mixture(family.pool, best, family.target.observable, metric);
        Vec loc(2, 0.0);
        for (std::size_t c = 0; c < locations.size(); ++c)
            for (int d = 0; d < 2; ++d) loc[d] += best[c] * locations[c][d];
        out << "optimal,"
            << detail::fmt(similarity::measure(metric, ObservableProperty::from_params(loc),
                                               family.target.observable)
                               .value)
            << ',' << detail::fmt(oracle(opt).value) << '\n';
        return out.str();
    }

    if (figure == "fig4") {
        out << "trial,similarity_before,usefulness_before,similarity_after,usefulness_after\n";
        const SimilarityMetric metric{MetricKind::NegParamDistance, 1.0};
        for (int t = 0; t < 100; ++t) {
            FamilySpec s = spec;
            s.seed = trial_seed(config.seed, 0xf04ULL + t);
            const auto family = tasks::make_family(s, 1, target_param);
            const tasks::UsefulnessOracle oracle{family.target};
            const auto& entry = family.pool.entries.front();
            const auto learned = transfer::learn_mapping(
                entry.task, entry.knowledge, family.target.observable,
                transfer::MappingHypothesis{transfer::MappingFamily::Translation}, metric);
            transfer::MappingDescriptor d = learned.descriptor;
            d.target_bounds = family.target.bounds;
            const Knowledge mapped = transfer::apply_mapping(d, entry.knowledge);
            out << t << ',' << detail::fmt(learned.before.value) << ','
                << detail::fmt(oracle(entry.knowledge).value) << ','
                << detail::fmt(learned.achieved.value) << ','
                << detail::fmt(oracle(mapped).value) << '\n';
        }
        return out.str();
    }

    if (figure == "fig5") {
        out << "similarity,usefulness,accepted\n";
        const auto family = tasks::make_family(spec, 200, target_param);
        const tasks::UsefulnessOracle oracle{family.target};
        const SimilarityMetric metric{MetricKind::NegParamDistance, 1.0};
        Rng rng(trial_seed(config.seed, 0xf05ULL));
        const TargetState state = lab::detail::random_incumbent(family, rng, 0.9);
        const auto link = family.link_for(metric);
        const transfer::EvaluationGate gate{transfer::calibrate_threshold(state, *link),
                                            transfer::GateMode::Explicit};
        const auto classes =
            transfer::classify_pool(family.pool, family.target.observable, metric, gate);
        std::vector<bool> accepted(family.pool.size(), false);
        for (std::size_t i : classes.v_plus) accepted[i] = true;
        for (std::size_t i = 0; i < family.pool.size(); ++i)
            out << detail::fmt(similarity::measure(metric,
                                                   family.pool.entries[i].task.observable,
                                                   family.target.observable)
                                   .value)
                << ',' << detail::fmt(oracle(family.pool.entries[i].knowledge).value) << ','
                << (accepted[i] ? 1 : 0) << '\n';
        return out.str();
    }

    if (figure == "fig6") {
        out << "optimizer,distribution,dot\n";
        const auto report = lab::verify_nfl(config.seed, 1);
        out << "transfer,favorable,"
            << detail::fmt(report.statistics.at("transfer_on_favorable")) << '\n';
        out << "general,favorable,"
            << detail::fmt(report.statistics.at("general_on_favorable")) << '\n';
        out << "transfer,hostile," << detail::fmt(report.statistics.at("transfer_on_hostile"))
            << '\n';
        out << "general,hostile," << detail::fmt(report.statistics.at("general_on_hostile"))
            << '\n';
        return out.str();
    }

    throw UnknownFigure("no figure named '" + figure + "'");
}

}  // namespace eto::harness
