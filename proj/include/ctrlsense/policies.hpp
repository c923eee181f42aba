#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctrlsense/dp.hpp"
#include "ctrlsense/errors.hpp"
#include "ctrlsense/fisher.hpp"
#include "ctrlsense/kalman.hpp"
#include "ctrlsense/markov.hpp"
#include "ctrlsense/random.hpp"
#include "ctrlsense/sensing.hpp"

namespace ctrlsense {

struct PolicyDecision {
    std::size_t control = 0;
    double diagnostic = 0.0; // phi for gfis2, cost-to-go for dp, 0 otherwise
};

/// Greedy Fisher selection: the table's best control at the most likely predicted state.
inline PolicyDecision gfis2_select(const FisherTable& table, const Vector& p_pred) {
    const std::size_t x = declare_state(p_pred);
    const std::size_t u = table.best_control.at(x);
    return {u, table.phi(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u))};
}

/// Same decision computed from scratch (no table); used to check the lookup.
inline PolicyDecision gfis2_select_online(const ObservationModel& model, const Vector& p_pred) {
    const std::size_t x = declare_state(p_pred);
    PolicyDecision best{0, -1.0};
    for (std::size_t u = 0; u < model.num_controls(); ++u) {
        const double v = phi(model, x, u).value;
        if (v > best.diagnostic) best = {u, v};
    }
    return best;
}

inline PolicyDecision dp_select(const DpPolicy& policy, const Vector& p_pred, std::size_t stage) {
    const auto& t = policy.stage(stage);
    const std::size_t k = policy.grid.nearest(p_pred);
    return {t.best_control[k], t.value[k]};
}

enum class PolicyKind { gfis2, dp, random, fixed, full_budget };

struct PolicySpec {
    PolicyKind kind = PolicyKind::gfis2;
    std::size_t fixed_control = 0; // used by `fixed`

    std::string id() const {
        switch (kind) {
        case PolicyKind::gfis2: return "gfis2";
        case PolicyKind::dp: return "dp";
        case PolicyKind::random: return "random";
        case PolicyKind::fixed: return "fixed" + std::to_string(fixed_control + 1);
        case PolicyKind::full_budget: return "full-budget";
        }
        return "unknown";
    }
};

/// Parses gfis2 | dp | random | full-budget | fixed:<1-based control index>.
inline PolicySpec parse_policy(const std::string& s) {
    if (s == "gfis2") return {PolicyKind::gfis2, 0};
    if (s == "dp") return {PolicyKind::dp, 0};
    if (s == "random") return {PolicyKind::random, 0};
    if (s == "full-budget") return {PolicyKind::full_budget, 0};
    if (s.rfind("fixed:", 0) == 0) {
        std::size_t idx = 0;
        try {
            idx = std::stoul(s.substr(6));
        } catch (const std::exception&) {
            throw ConfigError("bad fixed policy '" + s + "' (expected fixed:<control index>)");
        }
        if (idx == 0) throw ConfigError("fixed policy control index is 1-based");
        return {PolicyKind::fixed, idx - 1};
    }
    throw ConfigError("unknown policy '" + s + "' (expected gfis2, dp, random, full-budget or fixed:<k>)");
}

/// The control that spends the whole budget as evenly as possible across
/// sensors (remainder to the lowest-numbered sensors).
inline std::size_t full_budget_control(const ControlSet& controls, std::size_t budget) {
    const auto s = controls[0].sensors();
    ControlInput target{std::vector<std::size_t>(s, budget / s)};
    for (std::size_t l = 0; l < budget % s; ++l) ++target.allocation[l];
    if (auto idx = controls.index_of(target)) return *idx;
    throw ConfigError("full-budget policy needs control " + target.to_string() + " in the control set");
}

/// Everything a policy may need at decision time.
struct PolicyArtifacts {
    const FisherTable* fisher = nullptr;
    const DpPolicy* dp = nullptr;
    std::size_t budget = 0;
};

class Controller {
public:
    Controller(PolicySpec spec, const ObservationModel& model, PolicyArtifacts artifacts, std::uint64_t seed)
        : spec_(spec), alpha_(model.num_controls()), art_(artifacts), rng_(make_stream(seed, {stream::policy})) {
        switch (spec_.kind) {
        case PolicyKind::gfis2:
            if (!art_.fisher) throw ConfigError("gfis2 policy needs a Fisher table");
            if (art_.fisher->states() != model.states() || art_.fisher->controls() != alpha_)
                throw ConfigError("Fisher table does not match the model (states/controls)");
            break;
        case PolicyKind::dp:
            if (!art_.dp) throw ConfigError("dp policy needs a DP table");
            if (art_.dp->grid.states() != model.states() || static_cast<std::size_t>(art_.dp->stages.front().bracket.cols()) != alpha_)
                throw ConfigError("DP table does not match the model (states/controls)");
            break;
        case PolicyKind::fixed:
            if (spec_.fixed_control >= alpha_)
                throw ConfigError("fixed policy control " + std::to_string(spec_.fixed_control + 1) + " out of range");
            break;
        case PolicyKind::full_budget:
            spec_.fixed_control = full_budget_control(model.controls(), art_.budget);
            break;
        case PolicyKind::random: break;
        }
    }

    /// Control for the next measurement given the predicted belief and the
    /// number of measurements left in the episode (this one included).
    PolicyDecision choose(const Vector& p_pred, std::size_t remaining) {
        switch (spec_.kind) {
        case PolicyKind::gfis2: return gfis2_select(*art_.fisher, p_pred);
        case PolicyKind::dp: return dp_select(*art_.dp, p_pred, art_.dp->stage_for_remaining(remaining));
        case PolicyKind::random: {
            std::uniform_int_distribution<std::size_t> pick(0, alpha_ - 1);
            return {pick(rng_), 0.0};
        }
        case PolicyKind::fixed:
        case PolicyKind::full_budget: return {spec_.fixed_control, 0.0};
        }
        return {};
    }

    const PolicySpec& spec() const noexcept { return spec_; }

private:
    PolicySpec spec_;
    std::size_t alpha_;
    PolicyArtifacts art_;
    Rng rng_;
};

struct EpisodeRecord {
    std::string policy;
    std::uint64_t seed = 0;
    std::vector<std::size_t> true_state;
    std::vector<Vector> posterior; // raw filter output
    std::vector<std::size_t> declared_state;
    std::vector<std::size_t> control; // control that produced y_k

    std::size_t steps() const noexcept { return true_state.size(); }
};

/// Runs the select -> measure -> estimate loop for k = 0..L. The state
/// trajectory depends only on `seed`; the observation noise at step k comes
/// from a stream keyed by (seed, k), so policies choosing the same control at
/// the same step see the same measurement.
inline EpisodeRecord run_policy(const PolicySpec& spec, const ObservationModel& model, const TransitionMatrix& P,
                                const Vector& initial, std::size_t L, std::uint64_t seed,
                                const PolicyArtifacts& artifacts, PosteriorMode mode = PosteriorMode::project) {
    const Trajectory traj = sample_trajectory(P, initial, L, seed);
    Controller ctl(spec, model, artifacts, seed);

    EpisodeRecord rec;
    rec.policy = spec.id();
    rec.seed = seed;
    rec.true_state = traj.states;
    rec.posterior.reserve(L + 1);
    rec.declared_state.reserve(L + 1);
    rec.control.reserve(L + 1);

    Vector p_pred = initial;
    std::size_t u = ctl.choose(p_pred, L + 1).control;
    for (std::size_t k = 0; k <= L; ++k) {
        Rng noise = make_stream(seed, {stream::observation, k});
        const Vector y = sample_observation(model, traj.states[k], u, noise);
        const FilterState fs = filter_update(model, p_pred, y, u);
        const Vector carried = carry_belief(fs.posterior, mode);
        rec.posterior.push_back(fs.posterior);
        rec.declared_state.push_back(declare_state(carried));
        rec.control.push_back(u);
        if (k < L) {
            p_pred = predict_belief(P, carried);
            u = ctl.choose(p_pred, L - k).control;
        }
    }
    return rec;
}

} // namespace ctrlsense
