#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ctrlsense/errors.hpp"
#include "ctrlsense/policies.hpp"
#include "ctrlsense/sensing.hpp"

namespace ctrlsense {

inline double squared_error(std::size_t true_state, const Vector& posterior) {
    double e = posterior.squaredNorm();
    const double p = posterior[static_cast<Eigen::Index>(true_state)];
    return e - p * p + (1.0 - p) * (1.0 - p);
}

/// Per-episode mean of ||e_x - p_raw||^2.
inline double episode_mse(const EpisodeRecord& ep) {
    if (ep.steps() == 0) throw ConfigError("empty episode");
    double s = 0.0;
    for (std::size_t k = 0; k < ep.steps(); ++k) s += squared_error(ep.true_state[k], ep.posterior[k]);
    return s / static_cast<double>(ep.steps());
}

inline double episode_accuracy(const EpisodeRecord& ep) {
    if (ep.steps() == 0) throw ConfigError("empty episode");
    std::size_t hits = 0;
    for (std::size_t k = 0; k < ep.steps(); ++k) hits += ep.declared_state[k] == ep.true_state[k];
    return static_cast<double>(hits) / static_cast<double>(ep.steps());
}

/// Mean over all steps of all episodes of ||e_x - p_raw||^2.
inline double compute_mse(const std::vector<EpisodeRecord>& episodes) {
    if (episodes.empty()) throw ConfigError("compute_mse needs at least one episode");
    double s = 0.0;
    std::size_t count = 0;
    for (const auto& ep : episodes)
        for (std::size_t k = 0; k < ep.steps(); ++k, ++count) s += squared_error(ep.true_state[k], ep.posterior[k]);
    if (count == 0) throw ConfigError("compute_mse needs at least one step");
    return s / static_cast<double>(count);
}

inline double compute_detection_accuracy(const std::vector<EpisodeRecord>& episodes) {
    if (episodes.empty()) throw ConfigError("compute_detection_accuracy needs at least one episode");
    std::size_t hits = 0, count = 0;
    for (const auto& ep : episodes)
        for (std::size_t k = 0; k < ep.steps(); ++k, ++count) hits += ep.declared_state[k] == ep.true_state[k];
    if (count == 0) throw ConfigError("compute_detection_accuracy needs at least one step");
    return static_cast<double>(hits) / static_cast<double>(count);
}

struct AllocationTable {
    Matrix mean_samples;             // states x sensors
    std::vector<std::size_t> visits; // steps spent in each true state
};

/// Mean samples requested from each sensor, grouped by true state. States
/// never visited report 0 with visits = 0.
inline AllocationTable compute_avg_allocation(const std::vector<EpisodeRecord>& episodes, const ControlSet& controls,
                                              std::size_t n_states) {
    if (episodes.empty()) throw ConfigError("compute_avg_allocation needs at least one episode");
    const auto s = controls[0].sensors();
    AllocationTable t;
    t.mean_samples = Matrix::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(s));
    t.visits.assign(n_states, 0);
    for (const auto& ep : episodes)
        for (std::size_t k = 0; k < ep.steps(); ++k) {
            const auto x = ep.true_state[k];
            ++t.visits[x];
            const auto& alloc = controls[ep.control[k]].allocation;
            for (std::size_t l = 0; l < s; ++l)
                t.mean_samples(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(l)) += static_cast<double>(alloc[l]);
        }
    for (std::size_t x = 0; x < n_states; ++x)
        if (t.visits[x] > 0) t.mean_samples.row(static_cast<Eigen::Index>(x)) /= static_cast<double>(t.visits[x]);
    return t;
}

/// Mean samples per step from each sensor over all steps.
inline Vector overall_allocation(const std::vector<EpisodeRecord>& episodes, const ControlSet& controls) {
    const auto s = controls[0].sensors();
    Vector total = Vector::Zero(static_cast<Eigen::Index>(s));
    std::size_t count = 0;
    for (const auto& ep : episodes)
        for (std::size_t k = 0; k < ep.steps(); ++k, ++count)
            for (std::size_t l = 0; l < s; ++l)
                total[static_cast<Eigen::Index>(l)] += static_cast<double>(controls[ep.control[k]].allocation[l]);
    return count ? Vector(total / static_cast<double>(count)) : total;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Sample mean and standard error of the mean (0 for a single value).
inline MeanSe mean_and_se(const std::vector<double>& v) {
    MeanSe r;
    if (v.empty()) return r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (v.size() < 2) return r;
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    return r;
}

struct MetricsReport {
    std::string policy;
    double mse = 0.0;
    double mse_se = 0.0;
    double detection_accuracy = 0.0;
    double accuracy_se = 0.0;
    std::vector<double> episode_mse;
    std::vector<double> episode_accuracy;
    AllocationTable allocation;
    Vector sensor_rate; // mean samples per step from each sensor
    double wall_time = 0.0;
    std::size_t episodes = 0;
    std::size_t steps = 0;
    bool mse_out_of_range = false; // possible only with raw posteriors
};

/// Aggregates episodes of one policy. Standard errors are across episodes
/// (per-step i.i.d. approximation when there is only one episode).
inline MetricsReport summarize(const std::string& policy, const std::vector<EpisodeRecord>& episodes,
                               const ControlSet& controls, std::size_t n_states) {
    MetricsReport r;
    r.policy = policy;
    r.mse = compute_mse(episodes);
    r.detection_accuracy = compute_detection_accuracy(episodes);
    for (const auto& ep : episodes) {
        r.episode_mse.push_back(episode_mse(ep));
        r.episode_accuracy.push_back(episode_accuracy(ep));
        r.steps += ep.steps();
    }
    r.episodes = episodes.size();
    if (episodes.size() >= 2) {
        r.mse_se = mean_and_se(r.episode_mse).se;
        r.accuracy_se = mean_and_se(r.episode_accuracy).se;
    } else {
        std::vector<double> errs, hits;
        for (std::size_t k = 0; k < episodes[0].steps(); ++k) {
            errs.push_back(squared_error(episodes[0].true_state[k], episodes[0].posterior[k]));
            hits.push_back(episodes[0].declared_state[k] == episodes[0].true_state[k] ? 1.0 : 0.0);
        }
        r.mse_se = mean_and_se(errs).se;
        r.accuracy_se = mean_and_se(hits).se;
    }
    r.allocation = compute_avg_allocation(episodes, controls, n_states);
    r.sensor_rate = overall_allocation(episodes, controls);
    r.mse_out_of_range = r.mse > 2.0;
    return r;
}

} // namespace ctrlsense
