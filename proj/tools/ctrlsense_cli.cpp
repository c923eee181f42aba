// ctrlsense: controlled-sensing simulator front end.
//
//   ctrlsense run --config scenario.json --policies gfis2,dp --seed 7 --out results/
//   ctrlsense build-dp --config scenario.json --resolution 10 --horizon 12 --mc-samples 4096 --out dp.csv
//   ctrlsense build-fisher --config scenario.json --out fisher.csv
//   ctrlsense inspect fisher.csv
//   ctrlsense validate --config scenario.json
//
// Exit codes: 0 success, 1 usage error, 2 config error, 3 numeric failure.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctrlsense/ctrlsense.hpp"

namespace {

using namespace ctrlsense;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string default_out_dir() {
    if (const char* env = std::getenv("CTRLSENSE_OUT_DIR"); env && *env) return env;
    return "results";
}

void print_summary(std::ostream& os, const std::vector<MetricsReport>& reports) {
    os << std::left << std::setw(14) << "policy" << std::right << std::setw(12) << "MSE" << std::setw(11) << "+/-SE"
       << std::setw(12) << "accuracy" << std::setw(11) << "+/-SE" << '\n';
    for (const auto& r : reports) {
        os << std::left << std::setw(14) << r.policy << std::right << std::fixed << std::setprecision(4)
           << std::setw(12) << r.mse << std::setw(11) << r.mse_se << std::setw(12) << r.detection_accuracy
           << std::setw(11) << r.accuracy_se << '\n';
        if (r.mse_out_of_range) os << "  warning: MSE above 2 (raw posteriors left the simplex)\n";
    }
    os.unsetf(std::ios::floatfield);
}

void print_fisher_table(std::ostream& os, const FisherTable& t, const ControlSet* controls) {
    os << "phi(x,u): " << t.states() << " states x " << t.controls() << " controls\n";
    os << std::setw(7) << "state";
    for (std::size_t u = 0; u < t.controls(); ++u) {
        const std::string name = controls ? (*controls)[u].to_string() : "u" + std::to_string(u + 1);
        os << ' ' << std::setw(14) << name;
    }
    os << std::setw(8) << "best" << '\n';
    for (std::size_t x = 0; x < t.states(); ++x) {
        os << std::setw(7) << x + 1;
        for (std::size_t u = 0; u < t.controls(); ++u)
            os << ' ' << std::setw(14) << fmt9(t.phi(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u)));
        os << std::setw(8) << t.best_control[x] + 1 << '\n';
    }
}

void print_dp_table(std::ostream& os, const DpPolicy& p) {
    os << "DP table: " << p.grid.states() << " states, resolution " << p.grid.resolution() << " ("
       << p.grid.size() << " grid points), horizon " << p.horizon() << ", " << p.stages.front().bracket.cols()
       << " controls, " << p.mc_samples << " MC samples, seed " << p.seed << '\n';
    os << std::setw(7) << "stage" << std::setw(14) << "min J" << std::setw(14) << "mean J" << std::setw(14)
       << "max J" << "  control usage\n";
    for (std::size_t k = 1; k <= p.horizon(); ++k) {
        const auto& t = p.stage(k);
        double lo = t.value.front(), hi = lo, sum = 0.0;
        std::vector<std::size_t> usage(static_cast<std::size_t>(t.bracket.cols()), 0);
        for (std::size_t g = 0; g < t.points(); ++g) {
            lo = std::min(lo, t.value[g]);
            hi = std::max(hi, t.value[g]);
            sum += t.value[g];
            ++usage[t.best_control[g]];
        }
        os << std::setw(7) << k << std::setw(14) << fmt9(lo) << std::setw(14)
           << fmt9(sum / static_cast<double>(t.points())) << std::setw(14) << fmt9(hi) << "  ";
        for (std::size_t u = 0; u < usage.size(); ++u) os << (u ? " " : "") << usage[u];
        os << '\n';
    }
}

struct Flags {
    std::string config;
    std::string policies;
    std::string out;
    std::string fisher_in;
    std::string dp_in;
    std::string table;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t threads = 1;
    bool quiet = false;
    bool timing = false;
    std::size_t resolution = 0, horizon = 0, mc_samples = 0;
};

int cmd_run(const Flags& f) {
    ScenarioConfig cfg = load_config(f.config);
    if (f.seed_set)
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) cfg.seeds[s] = f.seed + s;
    const auto policies = f.policies.empty() ? cfg.policies : split_list(f.policies);
    ComparisonOptions opts;
    opts.out_dir = f.out.empty() ? default_out_dir() : f.out;
    opts.threads = f.threads;
    opts.with_timing = f.timing;
    if (!f.fisher_in.empty()) opts.fisher_table = read_fisher_table(f.fisher_in);
    if (!f.dp_in.empty()) opts.dp_table = read_dp_table(f.dp_in);
    const auto result = run_comparison(cfg, policies, opts);
    if (!f.quiet) {
        print_summary(std::cout, result.reports);
        std::cout << "results written to " << opts.out_dir->string() << '\n';
    }
    return 0;
}

int cmd_build_dp(const Flags& f) {
    ScenarioConfig cfg = load_config(f.config);
    if (f.resolution) cfg.dp.resolution = f.resolution;
    if (f.horizon) cfg.dp.horizon = f.horizon;
    if (f.mc_samples) cfg.dp.mc_samples = f.mc_samples;
    if (f.seed_set) cfg.dp.seed = f.seed;
    const Scenario s = build_scenario(cfg);
    const DpPolicy p = build_dp_policy(s, cfg.dp, f.threads);
    write_dp_table(f.out, p);
    if (!f.quiet) print_dp_table(std::cout, p);
    return 0;
}

int cmd_build_fisher(const Flags& f) {
    const ScenarioConfig cfg = load_config(f.config);
    const Scenario s = build_scenario(cfg);
    const FisherTable t = build_fisher_table(s.model);
    write_fisher_table(f.out, t);
    if (!f.quiet) print_fisher_table(std::cout, t, &s.model.controls());
    return 0;
}

int cmd_inspect(const Flags& f) {
    std::ifstream in(f.table);
    if (!in) throw ConfigError("cannot open '" + f.table + "'");
    std::string first;
    std::getline(in, first);
    in.clear();
    in.seekg(0);
    if (first.rfind(kDpMagic, 0) == 0) print_dp_table(std::cout, read_dp_table(in, f.table));
    else print_fisher_table(std::cout, read_fisher_table(in, f.table), nullptr);
    return 0;
}

int cmd_validate(const Flags& f) {
    const ScenarioConfig cfg = load_config(f.config);
    const Scenario s = build_scenario(cfg);
    if (!f.quiet) {
        std::cout << "config OK: " << cfg.name << '\n'
                  << "  states: " << s.states.n << " (";
        for (std::size_t i = 0; i < s.states.n; ++i) std::cout << (i ? ", " : "") << s.states.label(i);
        std::cout << ")\n  sensors: " << s.sensors.size() << ", budget " << s.budget << '\n'
                  << "  controls: " << s.model.num_controls() << '\n';
        for (std::size_t u = 0; u < s.model.num_controls(); ++u)
            std::cout << "    " << u + 1 << ": " << s.model.controls()[u].to_string() << '\n';
        std::cout << "  horizon " << cfg.horizon << ", " << cfg.seeds.size() << " seeds, posterior mode "
                  << to_string(cfg.posterior_mode) << ", dp d=" << cfg.dp.resolution << " M=" << cfg.dp.mc_samples
                  << " L=" << cfg.dp.horizon << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctrlsense: controlled sensing over Markov chains with Gaussian observations"};
    app.require_subcommand(1, 1);
    Flags f;
    app.add_flag("-q,--quiet", f.quiet, "Suppress the summary output");
    app.add_option("--threads", f.threads, "Worker thread cap (0 = all cores)");

    auto* run = app.add_subcommand("run", "Run a policy comparison and write CSV results");
    run->add_option("--config", f.config, "Scenario config (JSON)")->required();
    run->add_option("--policies", f.policies, "Comma-separated: gfis2,dp,random,full-budget,fixed:<k>");
    run->add_option("--out", f.out, "Output directory (default $CTRLSENSE_OUT_DIR or ./results)");
    run->add_option("--seed", f.seed, "First seed; replaces the config seeds with seed, seed+1, ...")
        ->each([&](const std::string&) { f.seed_set = true; });
    run->add_option("--fisher-table", f.fisher_in, "Use a prebuilt Fisher table instead of building one");
    run->add_option("--dp-table", f.dp_in, "Use a prebuilt DP table instead of building one");
    run->add_flag("--timing", f.timing, "Record wall times in metrics.csv (breaks byte-identical reruns)");

    auto* build_dp = app.add_subcommand("build-dp", "Solve the quantized DP and write its table");
    build_dp->add_option("--config", f.config, "Scenario config (JSON)")->required();
    build_dp->add_option("-d,--resolution", f.resolution, "Belief grid resolution");
    build_dp->add_option("-L,--horizon", f.horizon, "DP horizon (stages)");
    build_dp->add_option("-M,--mc-samples", f.mc_samples, "Monte-Carlo samples per backup");
    build_dp->add_option("--seed", f.seed, "DP seed")->each([&](const std::string&) { f.seed_set = true; });
    build_dp->add_option("--out", f.out, "Output table path")->required();

    auto* build_fisher = app.add_subcommand("build-fisher", "Build the Fisher lookup table");
    build_fisher->add_option("--config", f.config, "Scenario config (JSON)")->required();
    build_fisher->add_option("--out", f.out, "Output table path")->required();

    auto* inspect = app.add_subcommand("inspect", "Print a Fisher or DP table file");
    inspect->add_option("table", f.table, "Table file")->required();

    auto* validate = app.add_subcommand("validate", "Check a scenario config");
    validate->add_option("--config", f.config, "Scenario config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (*run) return cmd_run(f);
        if (*build_dp) return cmd_build_dp(f);
        if (*build_fisher) return cmd_build_fisher(f);
        if (*inspect) return cmd_inspect(f);
        if (*validate) return cmd_validate(f);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
