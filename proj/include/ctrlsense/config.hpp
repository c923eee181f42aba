#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrlsense/errors.hpp"
#include "ctrlsense/kalman.hpp"
#include "ctrlsense/markov.hpp"
#include "ctrlsense/policies.hpp"
#include "ctrlsense/sensing.hpp"

namespace ctrlsense {

inline constexpr int kConfigVersion = 1;

class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Invalid value at a named config field; the message starts with the field path.
class ValidationError : public ConfigError {
public:
    ValidationError(std::string field, const std::string& msg)
        : ConfigError(field + ": " + msg), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct ObservationOverride {
    std::size_t state = 0;   // 0-based
    ControlInput control;
    Vector mean;
    Matrix covariance;
};

struct DpSettings {
    std::size_t resolution = 10;
    std::size_t mc_samples = 4096;
    std::size_t horizon = 12;
    std::uint64_t seed = 1;
};

struct ScenarioConfig {
    std::string name;
    StateSpace states;
    Matrix transition;
    Vector initial;
    std::vector<SensorSpec> sensors;
    std::size_t budget = 0;
    std::optional<std::vector<ControlInput>> explicit_controls; // nullopt = all within budget
    std::vector<ObservationOverride> overrides;
    std::size_t horizon = 2000;
    std::vector<std::uint64_t> seeds{1};
    std::vector<std::string> policies{"gfis2", "dp", "random"};
    DpSettings dp;
    PosteriorMode posterior_mode = PosteriorMode::project;
};

/// Fully built model objects for a config.
struct Scenario {
    StateSpace states;
    TransitionMatrix transition;
    Vector initial;
    std::vector<SensorSpec> sensors;
    std::size_t budget = 0;
    ObservationModel model;
};

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(path + key, "required field is missing");
    return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& field) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(field, std::string("wrong type (") + e.what() + ")");
    }
}

inline Vector to_vector(const json& j, const std::string& field) {
    const auto v = get_as<std::vector<double>>(j, field);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix to_matrix(const json& j, const std::string& field) {
    const auto rows = get_as<std::vector<std::vector<double>>>(j, field);
    if (rows.empty()) throw ValidationError(field, "matrix is empty");
    Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size()) throw ValidationError(field, "ragged matrix rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return M;
}

inline ControlInput to_control(const json& j, const std::string& field) {
    return ControlInput{get_as<std::vector<std::size_t>>(j, field)};
}

} // namespace detail

/// Validates cross-field consistency; every error names the offending field.
inline void validate_config(const ScenarioConfig& c) {
    const auto n = c.states.n;
    if (c.transition.rows() != static_cast<Eigen::Index>(n) || c.transition.cols() != static_cast<Eigen::Index>(n))
        throw ValidationError("transition_matrix", "must be " + std::to_string(n) + "x" + std::to_string(n));
    try {
        validate_transition_matrix(c.transition);
    } catch (const NonStochastic& e) {
        const bool rows_ok = (c.transition.rowwise().sum().array() - 1.0).abs().maxCoeff() <= kStochasticTol;
        throw ValidationError("transition_matrix",
                              std::string(e.what()) + (rows_ok ? "; rows sum to 1, so the matrix looks row-stochastic "
                                                                 "(entry [j][i] must be P(next=j | current=i))"
                                                               : ""));
    } catch (const ConfigError& e) {
        throw ValidationError("transition_matrix", e.what());
    }
    try {
        validate_distribution(c.initial, n, "initial distribution");
    } catch (const ConfigError& e) {
        throw ValidationError("initial_distribution", e.what());
    }
    if (c.sensors.empty()) throw ValidationError("sensors", "at least one sensor is required");
    for (std::size_t l = 0; l < c.sensors.size(); ++l) {
        try {
            c.sensors[l].validate(n);
        } catch (const ConfigError& e) {
            throw ValidationError("sensors[" + std::to_string(l) + "]", e.what());
        }
    }
    if (c.budget == 0) throw ValidationError("budget", "must be positive");
    if (c.seeds.empty()) throw ValidationError("seeds", "at least one seed is required");
    if (c.dp.resolution == 0) throw ValidationError("dp.resolution", "must be positive");
    if (c.dp.horizon == 0) throw ValidationError("dp.horizon", "must be positive");
    for (const auto& p : c.policies) {
        try {
            parse_policy(p);
        } catch (const ConfigError& e) {
            throw ValidationError("policies", e.what());
        }
    }
}

inline ScenarioConfig parse_config(const nlohmann::json& j) {
    using namespace detail;
    if (!j.is_object()) throw ParseError("config root must be an object");
    ScenarioConfig c;
    const int version = get_as<int>(require(j, "version", ""), "version");
    if (version != kConfigVersion)
        throw ValidationError("version", "unsupported version " + std::to_string(version) + " (expected " +
                                             std::to_string(kConfigVersion) + ")");
    c.name = j.value("name", std::string("scenario"));

    const auto& st = require(j, "states", "");
    std::vector<std::string> labels;
    if (st.contains("labels")) labels = get_as<std::vector<std::string>>(st.at("labels"), "states.labels");
    std::size_t n = labels.size();
    if (st.contains("n")) {
        n = get_as<std::size_t>(st.at("n"), "states.n");
        if (!labels.empty() && labels.size() != n)
            throw ValidationError("states.labels", "expected " + std::to_string(n) + " labels");
    }
    try {
        c.states = StateSpace(n, labels);
    } catch (const ConfigError& e) {
        throw ValidationError("states", e.what());
    }

    c.transition = to_matrix(require(j, "transition_matrix", ""), "transition_matrix");
    c.initial = to_vector(require(j, "initial_distribution", ""), "initial_distribution");

    const double shared_phi = j.contains("ar_parameter") ? get_as<double>(j.at("ar_parameter"), "ar_parameter") : 0.0;
    const auto& sensors = require(j, "sensors", "");
    if (!sensors.is_array()) throw ValidationError("sensors", "must be an array");
    for (std::size_t l = 0; l < sensors.size(); ++l) {
        const auto& s = sensors[l];
        const std::string path = "sensors[" + std::to_string(l) + "].";
        SensorSpec spec;
        spec.name = s.value("name", "S" + std::to_string(l + 1));
        spec.means = get_as<std::vector<double>>(require(s, "means", path), path + "means");
        spec.ar_variances = get_as<std::vector<double>>(require(s, "ar_variances", path), path + "ar_variances");
        spec.noise_variance = get_as<double>(require(s, "noise_variance", path), path + "noise_variance");
        spec.ar_parameter = s.contains("ar_parameter") ? get_as<double>(s.at("ar_parameter"), path + "ar_parameter")
                                                       : shared_phi;
        c.sensors.push_back(std::move(spec));
    }

    c.budget = get_as<std::size_t>(require(j, "budget", ""), "budget");
    for (std::size_t l = 0; l < sensors.size(); ++l)
        c.sensors[l].max_samples = sensors[l].contains("max_samples")
                                       ? get_as<std::size_t>(sensors[l].at("max_samples"),
                                                             "sensors[" + std::to_string(l) + "].max_samples")
                                       : c.budget;

    if (j.contains("controls")) {
        const auto& cj = j.at("controls");
        if (cj.is_string()) {
            if (cj.get<std::string>() != "all") throw ValidationError("controls", "expected \"all\" or a list");
        } else {
            std::vector<ControlInput> list;
            for (std::size_t a = 0; a < cj.size(); ++a)
                list.push_back(to_control(cj[a], "controls[" + std::to_string(a) + "]"));
            c.explicit_controls = std::move(list);
        }
    }

    if (j.contains("observation_overrides")) {
        const auto& oj = j.at("observation_overrides");
        for (std::size_t k = 0; k < oj.size(); ++k) {
            const std::string path = "observation_overrides[" + std::to_string(k) + "].";
            ObservationOverride o;
            const auto state = get_as<std::size_t>(require(oj[k], "state", path), path + "state");
            if (state == 0 || state > n) throw ValidationError(path + "state", "state index is 1-based and must be <= n");
            o.state = state - 1;
            o.control = to_control(require(oj[k], "control", path), path + "control");
            o.mean = to_vector(require(oj[k], "mean", path), path + "mean");
            o.covariance = to_matrix(require(oj[k], "covariance", path), path + "covariance");
            c.overrides.push_back(std::move(o));
        }
    }

    if (j.contains("horizon")) c.horizon = get_as<std::size_t>(j.at("horizon"), "horizon");
    if (j.contains("seeds")) c.seeds = get_as<std::vector<std::uint64_t>>(j.at("seeds"), "seeds");
    if (j.contains("policies")) c.policies = get_as<std::vector<std::string>>(j.at("policies"), "policies");
    if (j.contains("dp")) {
        const auto& dj = j.at("dp");
        if (dj.contains("resolution")) c.dp.resolution = get_as<std::size_t>(dj.at("resolution"), "dp.resolution");
        if (dj.contains("mc_samples")) c.dp.mc_samples = get_as<std::size_t>(dj.at("mc_samples"), "dp.mc_samples");
        if (dj.contains("horizon")) c.dp.horizon = get_as<std::size_t>(dj.at("horizon"), "dp.horizon");
        if (dj.contains("seed")) c.dp.seed = get_as<std::uint64_t>(dj.at("seed"), "dp.seed");
    }
    if (j.contains("posterior_mode")) {
        try {
            c.posterior_mode = parse_posterior_mode(get_as<std::string>(j.at("posterior_mode"), "posterior_mode"));
        } catch (const ValidationError&) {
            throw;
        } catch (const ConfigError& e) {
            throw ValidationError("posterior_mode", e.what());
        }
    }
    validate_config(c);
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("config '" + path + "' does not parse: " + e.what());
    }
    return parse_config(j);
}

inline ControlSet control_set(const ScenarioConfig& c) {
    try {
        if (c.explicit_controls) return ControlSet(*c.explicit_controls);
        std::vector<std::size_t> max_samples;
        for (const auto& s : c.sensors) max_samples.push_back(s.max_samples);
        return ControlSet::all_within_budget(max_samples, c.budget);
    } catch (const ConfigError& e) {
        throw ValidationError("controls", e.what());
    }
}

inline Scenario build_scenario(const ScenarioConfig& c) {
    Scenario s;
    s.states = c.states;
    s.transition = TransitionMatrix(c.transition);
    s.initial = c.initial;
    s.sensors = c.sensors;
    s.budget = c.budget;
    const ControlSet controls = control_set(c);
    try {
        s.model = assemble_observation_model(c.sensors, controls, c.budget);
    } catch (const NumericError&) {
        throw;
    } catch (const ConfigError& e) {
        throw ValidationError("controls", e.what());
    }
    for (std::size_t k = 0; k < c.overrides.size(); ++k) {
        const auto& o = c.overrides[k];
        const std::string path = "observation_overrides[" + std::to_string(k) + "]";
        const auto u = controls.index_of(o.control);
        if (!u) throw ValidationError(path + ".control", o.control.to_string() + " is not in the control set");
        try {
            s.model.override_component(o.state, *u, GaussianComponent(o.mean, o.covariance, path + ".covariance"));
        } catch (const ConfigError& e) {
            throw ValidationError(path, e.what());
        } catch (const CholeskyFailure& e) {
            throw ValidationError(path + ".covariance", e.what());
        }
    }
    return s;
}

} // namespace ctrlsense
