#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eto/errors.hpp"
#include "eto/evolver.hpp"
#include "eto/similarity.hpp"
#include "eto/tasks.hpp"
#include "eto/transfer.hpp"

namespace eto::harness {

using evolver::EvolverConfig;
using similarity::MetricKind;
using similarity::SimilarityMetric;
using tasks::FamilyKind;
using tasks::FamilySpec;
using transfer::MappingFamily;
using transfer::MappingHypothesis;
using transfer::TransferMethod;

/// Everything one experiment run needs. Parsed from the sectioned key-value
/// config format; every key has a default, unknown keys are hard errors.
struct RunConfig {
    // [run]
    std::vector<std::string> experiments{"theorem1", "theorem2", "theorem3",
                                         "theorem4", "theorem5_bigsource", "theorem5_mapping"};
    std::uint64_t seed = 20240601;
    unsigned jobs = 0;  // 0 = all available cores
    std::string out_dir = "reports";
    int trials_theorem1 = 50;
    int sources_theorem1 = 100;
    int trials_theorem2 = 10000;
    double required_rate_theorem2 = 1.0;
    int trials_theorem3 = 50;
    int pool_theorem3 = 200;
    int trials_theorem4 = 10000;
    int trials_theorem5 = 10000;
    std::vector<int> k_list_theorem5{1, 2, 4, 8, 16, 32};

    // [family]
    FamilyKind family_kind = FamilyKind::ShiftedSphere;
    int dimension = 2;
    double spread = 1.0;

    // [metric]
    MetricKind metric_kind = MetricKind::NegParamDistance;
    double metric_scale = 1.0;

    // [mapping]
    MappingFamily mapping_family = MappingFamily::Translation;
    int mapping_max_iters = 400;
    double mapping_step_tolerance = 1e-13;

    // [race]
    int races = 100;
    std::string race_method = "r>m>e";
    double race_precision = 1e-6;

    // [evolver_a] / [evolver_b]
    EvolverConfig evolver_a{10, 20, 0.3, 1500, 0, true};
    EvolverConfig evolver_b{10, 20, 3.0, 4000, 0, false};

    bool operator==(const RunConfig&) const = default;

    FamilySpec family_spec() const { return FamilySpec{family_kind, dimension, spread, seed}; }
    SimilarityMetric metric() const { return SimilarityMetric{metric_kind, metric_scale}; }
    MappingHypothesis mapping() const {
        return MappingHypothesis{mapping_family, mapping_max_iters, mapping_step_tolerance};
    }

    void validate() const {
        if (experiments.empty()) throw OutOfRange("no experiments selected");
        static const std::vector<std::string> known{
            "theorem1", "theorem2",          "theorem3",         "theorem4",
            "theorem5_bigsource", "theorem5_mapping", "nfl",      "race"};
        for (const auto& e : experiments)
            if (std::find(known.begin(), known.end(), e) == known.end())
                throw OutOfRange("unknown experiment: " + e);
        for (int t : {trials_theorem1, trials_theorem2, trials_theorem3, trials_theorem4,
                      trials_theorem5, races})
            if (t < 1) throw OutOfRange("trial counts must be >= 1");
        if (k_list_theorem5.empty()) throw OutOfRange("k list must not be empty");
        TransferMethod::parse(race_method);
        family_spec().validate();
        metric().validate();
        evolver_a.validate();
        evolver_b.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream stream(s);
    std::string item;
    while (std::getline(stream, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

struct KeyValue {
    std::string value;
    int line = 0;
};

inline double parse_double(const KeyValue& kv, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(kv.value, &used);
        if (used != kv.value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigParse(kv.line, key + ": expected a number, got '" + kv.value + "'");
    }
}

inline long long parse_int(const KeyValue& kv, const std::string& key) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(kv.value, &used);
        if (used != kv.value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigParse(kv.line, key + ": expected an integer, got '" + kv.value + "'");
    }
}

inline bool parse_bool(const KeyValue& kv, const std::string& key) {
    if (kv.value == "true") return true;
    if (kv.value == "false") return false;
    throw ConfigParse(kv.line, key + ": expected true or false, got '" + kv.value + "'");
}

inline FamilyKind parse_family_kind(const KeyValue& kv) {
    if (kv.value == "shifted_sphere") return FamilyKind::ShiftedSphere;
    if (kv.value == "shifted_rotated_ellipsoid") return FamilyKind::ShiftedRotatedEllipsoid;
    if (kv.value == "deceptive_shift") return FamilyKind::DeceptiveShift;
    throw ConfigParse(kv.line, "family.kind: unknown kind '" + kv.value + "'");
}

inline MetricKind parse_metric_kind(const KeyValue& kv) {
    if (kv.value == "neg_param_distance") return MetricKind::NegParamDistance;
    if (kv.value == "gaussian_w2") return MetricKind::GaussianW2;
    if (kv.value == "rbf_param") return MetricKind::RbfParam;
    throw ConfigParse(kv.line, "metric.kind: unknown kind '" + kv.value + "'");
}

inline MappingFamily parse_mapping_family(const KeyValue& kv) {
    if (kv.value == "translation") return MappingFamily::Translation;
    if (kv.value == "affine") return MappingFamily::Affine;
    if (kv.value == "mixture_weights") return MappingFamily::MixtureWeights;
    throw ConfigParse(kv.line, "mapping.family: unknown family '" + kv.value + "'");
}

inline const char* family_kind_name(FamilyKind k) {
    switch (k) {
        case FamilyKind::ShiftedSphere: return "shifted_sphere";
        case FamilyKind::ShiftedRotatedEllipsoid: return "shifted_rotated_ellipsoid";
        case FamilyKind::DeceptiveShift: return "deceptive_shift";
    }
    return "?";
}

inline const char* metric_kind_name(MetricKind k) {
    switch (k) {
        case MetricKind::NegParamDistance: return "neg_param_distance";
        case MetricKind::GaussianW2: return "gaussian_w2";
        case MetricKind::RbfParam: return "rbf_param";
    }
    return "?";
}

inline const char* mapping_family_name(MappingFamily f) {
    switch (f) {
        case MappingFamily::Translation: return "translation";
        case MappingFamily::Affine: return "affine";
        case MappingFamily::MixtureWeights: return "mixture_weights";
    }
    return "?";
}

}  // namespace detail

/// Parses the sectioned key-value format. Unknown sections and keys are hard
/// errors carrying the offending line number; a silent typo never changes an
/// experiment.
inline RunConfig parse_config(const std::string& text) {
    using detail::KeyValue;
    std::map<std::string, KeyValue> values;  // "section.key" -> value
    std::istringstream stream(text);
    std::string line;
    std::string section;
    int line_number = 0;
    while (std::getline(stream, line)) {
        ++line_number;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigParse(line_number, "unterminated section header");
            section = detail::trim(t.substr(1, t.size() - 2));
            if (section.empty()) throw ConfigParse(line_number, "empty section name");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigParse(line_number, "expected 'key = value', got '" + t + "'");
        if (section.empty()) throw ConfigParse(line_number, "key outside of any section");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigParse(line_number, "empty key");
        const std::string full = section + "." + key;
        if (values.count(full)) throw ConfigParse(line_number, "duplicate key " + full);
        values[full] = KeyValue{value, line_number};
    }

    RunConfig config;
    const auto take = [&](const std::string& full) {
        auto it = values.find(full);
        if (it == values.end()) return std::optional<KeyValue>{};
        std::optional<KeyValue> kv = it->second;
        values.erase(it);
        return kv;
    };

    if (auto kv = take("run.experiments")) config.experiments = detail::split_list(kv->value);
    if (auto kv = take("run.seed"))
        config.seed = static_cast<std::uint64_t>(detail::parse_int(*kv, "run.seed"));
    if (auto kv = take("run.jobs"))
        config.jobs = static_cast<unsigned>(detail::parse_int(*kv, "run.jobs"));
    if (auto kv = take("run.out")) config.out_dir = kv->value;
    if (auto kv = take("run.trials_theorem1"))
        config.trials_theorem1 = static_cast<int>(detail::parse_int(*kv, "run.trials_theorem1"));
    if (auto kv = take("run.sources_theorem1"))
        config.sources_theorem1 =
            static_cast<int>(detail::parse_int(*kv, "run.sources_theorem1"));
    if (auto kv = take("run.trials_theorem2"))
        config.trials_theorem2 = static_cast<int>(detail::parse_int(*kv, "run.trials_theorem2"));
    if (auto kv = take("run.required_rate_theorem2"))
        config.required_rate_theorem2 = detail::parse_double(*kv, "run.required_rate_theorem2");
    if (auto kv = take("run.trials_theorem3"))
        config.trials_theorem3 = static_cast<int>(detail::parse_int(*kv, "run.trials_theorem3"));
    if (auto kv = take("run.pool_theorem3"))
        config.pool_theorem3 = static_cast<int>(detail::parse_int(*kv, "run.pool_theorem3"));
    if (auto kv = take("run.trials_theorem4"))
        config.trials_theorem4 = static_cast<int>(detail::parse_int(*kv, "run.trials_theorem4"));
    if (auto kv = take("run.trials_theorem5"))
        config.trials_theorem5 = static_cast<int>(detail::parse_int(*kv, "run.trials_theorem5"));
    if (auto kv = take("run.k_list_theorem5")) {
        config.k_list_theorem5.clear();
        for (const auto& item : detail::split_list(kv->value))
            config.k_list_theorem5.push_back(
                static_cast<int>(detail::parse_int(KeyValue{item, kv->line},
                                                   "run.k_list_theorem5")));
    }

    if (auto kv = take("family.kind")) config.family_kind = detail::parse_family_kind(*kv);
    if (auto kv = take("family.dimension"))
        config.dimension = static_cast<int>(detail::parse_int(*kv, "family.dimension"));
    if (auto kv = take("family.spread")) config.spread = detail::parse_double(*kv, "family.spread");

    if (auto kv = take("metric.kind")) config.metric_kind = detail::parse_metric_kind(*kv);
    if (auto kv = take("metric.scale")) config.metric_scale = detail::parse_double(*kv, "metric.scale");

    if (auto kv = take("mapping.family"))
        config.mapping_family = detail::parse_mapping_family(*kv);
    if (auto kv = take("mapping.max_iters"))
        config.mapping_max_iters = static_cast<int>(detail::parse_int(*kv, "mapping.max_iters"));
    if (auto kv = take("mapping.step_tolerance"))
        config.mapping_step_tolerance = detail::parse_double(*kv, "mapping.step_tolerance");

    if (auto kv = take("race.races"))
        config.races = static_cast<int>(detail::parse_int(*kv, "race.races"));
    if (auto kv = take("race.method")) config.race_method = kv->value;
    if (auto kv = take("race.precision"))
        config.race_precision = detail::parse_double(*kv, "race.precision");

    const auto fill_evolver = [&](const std::string& section_name, EvolverConfig& cfg) {
        if (auto kv = take(section_name + ".mu"))
            cfg.mu = static_cast<int>(detail::parse_int(*kv, section_name + ".mu"));
        if (auto kv = take(section_name + ".lambda"))
            cfg.lambda = static_cast<int>(detail::parse_int(*kv, section_name + ".lambda"));
        if (auto kv = take(section_name + ".sigma0"))
            cfg.sigma0 = detail::parse_double(*kv, section_name + ".sigma0");
        if (auto kv = take(section_name + ".budget"))
            cfg.budget = static_cast<int>(detail::parse_int(*kv, section_name + ".budget"));
        if (auto kv = take(section_name + ".self_adaptive"))
            cfg.self_adaptive = detail::parse_bool(*kv, section_name + ".self_adaptive");
    };
    fill_evolver("evolver_a", config.evolver_a);
    fill_evolver("evolver_b", config.evolver_b);

    if (!values.empty()) {
        const auto& [key, kv] = *values.begin();
        throw ConfigParse(kv.line, "unknown key '" + key + "'");
    }

    try {
        config.validate();
    } catch (const Error& e) {
        throw ConfigParse(0, std::string("invalid configuration: ") + e.what());
    }
    return config;
}

/// Shortest decimal text that parses back to exactly the same double.
inline std::string roundtrip_double(double v) {
    char buffer[40];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
    return std::string(buffer, result.ptr);
}

/// Canonical serialization; parse(serialize(c)) == c field for field.
inline std::string serialize_config(const RunConfig& config) {
    std::ostringstream out;
    const auto list = [](const auto& items) {
        std::ostringstream s;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i) s << ", ";
            s << items[i];
        }
        return s.str();
    };
    out << "[run]\n";
    out << "experiments = " << list(config.experiments) << "\n";
    out << "seed = " << config.seed << "\n";
    out << "jobs = " << config.jobs << "\n";
    out << "out = " << config.out_dir << "\n";
    out << "trials_theorem1 = " << config.trials_theorem1 << "\n";
    out << "sources_theorem1 = " << config.sources_theorem1 << "\n";
    out << "trials_theorem2 = " << config.trials_theorem2 << "\n";
    out << "required_rate_theorem2 = " << roundtrip_double(config.required_rate_theorem2) << "\n";
    out << "trials_theorem3 = " << config.trials_theorem3 << "\n";
    out << "pool_theorem3 = " << config.pool_theorem3 << "\n";
    out << "trials_theorem4 = " << config.trials_theorem4 << "\n";
    out << "trials_theorem5 = " << config.trials_theorem5 << "\n";
    out << "k_list_theorem5 = " << list(config.k_list_theorem5) << "\n";
    out << "\n[family]\n";
    out << "kind = " << detail::family_kind_name(config.family_kind) << "\n";
    out << "dimension = " << config.dimension << "\n";
    out << "spread = " << roundtrip_double(config.spread) << "\n";
    out << "\n[metric]\n";
    out << "kind = " << detail::metric_kind_name(config.metric_kind) << "\n";
    out << "scale = " << roundtrip_double(config.metric_scale) << "\n";
    out << "\n[mapping]\n";
    out << "family = " << detail::mapping_family_name(config.mapping_family) << "\n";
    out << "max_iters = " << config.mapping_max_iters << "\n";
    out << "step_tolerance = " << roundtrip_double(config.mapping_step_tolerance) << "\n";
    out << "\n[race]\n";
    out << "races = " << config.races << "\n";
    out << "method = " << config.race_method << "\n";
    out << "precision = " << roundtrip_double(config.race_precision) << "\n";
    const auto evolver = [&](const char* name, const EvolverConfig& cfg) {
        out << "\n[" << name << "]\n";
        out << "mu = " << cfg.mu << "\n";
        out << "lambda = " << cfg.lambda << "\n";
        out << "sigma0 = " << roundtrip_double(cfg.sigma0) << "\n";
        out << "budget = " << cfg.budget << "\n";
        out << "self_adaptive = " << (cfg.self_adaptive ? "true" : "false") << "\n";
    };
    evolver("evolver_a", config.evolver_a);
    evolver("evolver_b", config.evolver_b);
    return out.str();
}

/// Expands "all15" or a comma list of method strings.
inline std::vector<TransferMethod> parse_method_selection(const std::string& text) {
    if (detail::trim(text) == "all15") return transfer::enumerate_methods();
    std::vector<TransferMethod> out;
    for (const auto& item : detail::split_list(text)) out.push_back(TransferMethod::parse(item));
    if (out.empty()) throw LengthMismatch("empty method selection");
    return out;
}

}  // namespace eto::harness
