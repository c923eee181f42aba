#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctrlsense/config.hpp"
#include "ctrlsense/dp.hpp"
#include "ctrlsense/fisher.hpp"
#include "ctrlsense/io.hpp"
#include "ctrlsense/metrics.hpp"
#include "ctrlsense/parallel.hpp"
#include "ctrlsense/policies.hpp"

namespace ctrlsense {

struct ComparisonOptions {
    std::optional<std::filesystem::path> out_dir; // nothing written when empty
    std::size_t threads = 1;
    bool with_timing = false;
    std::optional<FisherTable> fisher_table; // prebuilt tables; built on demand otherwise
    std::optional<DpPolicy> dp_table;
};

struct ComparisonResult {
    std::vector<MetricsReport> reports;
    std::vector<std::vector<EpisodeRecord>> episodes; // per policy, ordered by seed
    FisherTable fisher;
    std::optional<DpPolicy> dp;
};

inline DpPolicy build_dp_policy(const Scenario& s, const DpSettings& dp, std::size_t threads) {
    return dp_solve(s.model, s.transition, dp.horizon, dp.resolution, dp.mc_samples, dp.seed, threads);
}

/// Builds the offline tables once, runs every (policy, seed) episode with
/// matched state trajectories, aggregates per policy, and optionally writes
/// episode.csv, metrics.csv, allocation.csv and fisher_table.csv.
inline ComparisonResult run_comparison(const ScenarioConfig& config, const std::vector<std::string>& policy_names,
                                       ComparisonOptions opts = {}) {
    using clock = std::chrono::steady_clock;
    const Scenario scenario = build_scenario(config);
    std::vector<PolicySpec> specs;
    for (const auto& name : policy_names) specs.push_back(parse_policy(name));
    if (specs.empty()) throw ConfigError("no policies selected");

    ComparisonResult result;
    std::vector<double> build_time(specs.size(), 0.0);

    auto t0 = clock::now();
    result.fisher = opts.fisher_table ? *opts.fisher_table : build_fisher_table(scenario.model);
    const double fisher_time = std::chrono::duration<double>(clock::now() - t0).count();

    const bool need_dp = std::any_of(specs.begin(), specs.end(), [](const auto& p) { return p.kind == PolicyKind::dp; });
    double dp_time = 0.0;
    if (need_dp) {
        t0 = clock::now();
        result.dp = opts.dp_table ? *opts.dp_table : build_dp_policy(scenario, config.dp, opts.threads);
        dp_time = std::chrono::duration<double>(clock::now() - t0).count();
    }
    for (std::size_t p = 0; p < specs.size(); ++p)
        build_time[p] = specs[p].kind == PolicyKind::gfis2 ? fisher_time : specs[p].kind == PolicyKind::dp ? dp_time : 0.0;

    PolicyArtifacts art{&result.fisher, result.dp ? &*result.dp : nullptr, scenario.budget};

    const auto n_seeds = config.seeds.size();
    result.episodes.assign(specs.size(), std::vector<EpisodeRecord>(n_seeds));
    std::vector<double> run_time(specs.size() * n_seeds, 0.0);
    parallel_for(specs.size() * n_seeds, opts.threads, [&](std::size_t job) {
        const auto p = job / n_seeds, s = job % n_seeds;
        const auto start = clock::now();
        result.episodes[p][s] = run_policy(specs[p], scenario.model, scenario.transition, scenario.initial,
                                           config.horizon, config.seeds[s], art, config.posterior_mode);
        run_time[job] = std::chrono::duration<double>(clock::now() - start).count();
    });

    for (std::size_t p = 0; p < specs.size(); ++p) {
        MetricsReport r = summarize(specs[p].id(), result.episodes[p], scenario.model.controls(), scenario.states.n);
        r.wall_time = build_time[p];
        for (std::size_t s = 0; s < n_seeds; ++s) r.wall_time += run_time[p * n_seeds + s];
        result.reports.push_back(std::move(r));
    }

    if (opts.out_dir) {
        const auto& dir = *opts.out_dir;
        std::filesystem::create_directories(dir);
        {
            std::vector<EpisodeRecord> all;
            for (const auto& eps : result.episodes) all.insert(all.end(), eps.begin(), eps.end());
            auto out = open_output(dir / "episode.csv");
            write_episodes(out, all, scenario.states.n);
        }
        {
            auto out = open_output(dir / "metrics.csv");
            write_metrics(out, result.reports, opts.with_timing);
        }
        {
            auto out = open_output(dir / "allocation.csv");
            write_allocation(out, result.reports);
        }
        write_fisher_table(dir / "fisher_table.csv", result.fisher);
    }
    return result;
}

} // namespace ctrlsense
