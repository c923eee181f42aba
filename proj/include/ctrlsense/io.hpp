#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>
#include <string>
#include <vector>

#include "ctrlsense/dp.hpp"
#include "ctrlsense/errors.hpp"
#include "ctrlsense/fisher.hpp"
#include "ctrlsense/metrics.hpp"
#include "ctrlsense/policies.hpp"

namespace ctrlsense {

/// Floats in every emitted file use 9 significant digits.
inline std::string fmt9(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(9) << v;
    return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse number '" + s + "' in " + what);
    }
}

inline long long parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse integer '" + s + "' in " + what);
    }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return out;
}

// ---------------------------------------------------------------------------
// Fisher table: state,control,phi,best_h (1-based state and control)
// ---------------------------------------------------------------------------

inline constexpr const char* kFisherHeader = "state,control,phi,best_h";

inline void write_fisher_table(std::ostream& out, const FisherTable& t) {
    out << kFisherHeader << '\n';
    for (std::size_t x = 0; x < t.states(); ++x)
        for (std::size_t u = 0; u < t.controls(); ++u)
            out << x + 1 << ',' << u + 1 << ',' << fmt9(t.phi(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u)))
                << ',' << t.best_h[x][u] << '\n';
}

inline void write_fisher_table(const std::filesystem::path& path, const FisherTable& t) {
    auto out = open_output(path);
    write_fisher_table(out, t);
}

inline FisherTable read_fisher_table(std::istream& in, const std::string& what = "fisher table") {
    std::string line;
    if (!std::getline(in, line) || line != kFisherHeader) throw ConfigError(what + ": missing header '" + kFisherHeader + "'");
    struct Row {
        std::size_t x, u;
        double phi;
        int h;
    };
    std::vector<Row> rows;
    std::size_t n = 0, alpha = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw ConfigError(what + ": expected 4 fields in '" + line + "'");
        const auto x = parse_int(f[0], what), u = parse_int(f[1], what);
        if (x < 1 || u < 1) throw ConfigError(what + ": indices are 1-based");
        rows.push_back({static_cast<std::size_t>(x - 1), static_cast<std::size_t>(u - 1), parse_double(f[2], what),
                        static_cast<int>(parse_int(f[3], what))});
        n = std::max(n, rows.back().x + 1);
        alpha = std::max(alpha, rows.back().u + 1);
    }
    if (rows.size() != n * alpha || n == 0) throw ConfigError(what + ": table is not a complete n x alpha grid");
    FisherTable t;
    t.phi = Matrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(alpha), std::nan(""));
    t.best_h.assign(n, std::vector<int>(alpha, 0));
    for (const auto& r : rows) {
        t.phi(static_cast<Eigen::Index>(r.x), static_cast<Eigen::Index>(r.u)) = r.phi;
        t.best_h[r.x][r.u] = r.h;
    }
    if (t.phi.hasNaN()) throw ConfigError(what + ": duplicate or missing entries");
    t.best_control.resize(n);
    for (std::size_t x = 0; x < n; ++x) t.best_control[x] = argmax_control(t.phi, x);
    return t;
}

inline FisherTable read_fisher_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    return read_fisher_table(in, path.string());
}

// ---------------------------------------------------------------------------
// DP table:
//   # ctrlsense-dp v1 states=<n> resolution=<d> horizon=<L> controls=<alpha> mc_samples=<M> seed=<s>
//   stage,point,q1..qn,best_control,value,bracket1..bracketA,se1..seA
// q_i are integer lattice coordinates (p_i = q_i / d); stage, point and
// best_control are 1-based.
// ---------------------------------------------------------------------------

inline constexpr const char* kDpMagic = "# ctrlsense-dp v1";

inline void write_dp_table(std::ostream& out, const DpPolicy& p) {
    const auto n = p.grid.states();
    const auto alpha = static_cast<std::size_t>(p.stages.front().bracket.cols());
    out << kDpMagic << " states=" << n << " resolution=" << p.grid.resolution() << " horizon=" << p.horizon()
        << " controls=" << alpha << " mc_samples=" << p.mc_samples << " seed=" << p.seed << '\n';
    out << "stage,point";
    for (std::size_t i = 0; i < n; ++i) out << ",q" << i + 1;
    out << ",best_control,value";
    for (std::size_t u = 0; u < alpha; ++u) out << ",bracket" << u + 1;
    for (std::size_t u = 0; u < alpha; ++u) out << ",se" << u + 1;
    out << '\n';
    for (std::size_t k = 1; k <= p.horizon(); ++k) {
        const auto& t = p.stage(k);
        for (std::size_t g = 0; g < p.grid.size(); ++g) {
            out << k << ',' << g + 1;
            for (int q : p.grid.coords(g)) out << ',' << q;
            out << ',' << t.best_control[g] + 1 << ',' << fmt9(t.value[g]);
            for (std::size_t u = 0; u < alpha; ++u)
                out << ',' << fmt9(t.bracket(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(u)));
            for (std::size_t u = 0; u < alpha; ++u)
                out << ',' << fmt9(t.bracket_se(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(u)));
            out << '\n';
        }
    }
}

inline void write_dp_table(const std::filesystem::path& path, const DpPolicy& p) {
    auto out = open_output(path);
    write_dp_table(out, p);
}

inline DpPolicy read_dp_table(std::istream& in, const std::string& what = "dp table") {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kDpMagic, 0) != 0) throw ConfigError(what + ": missing '" + kDpMagic + "' header");
    std::size_t n = 0, d = 0, L = 0, alpha = 0, M = 0;
    std::uint64_t seed = 0;
    {
        std::istringstream meta(line.substr(std::string(kDpMagic).size()));
        std::string kv;
        while (meta >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError(what + ": bad header token '" + kv + "'");
            const auto key = kv.substr(0, eq);
            const auto val = static_cast<std::uint64_t>(parse_int(kv.substr(eq + 1), what));
            if (key == "states") n = val;
            else if (key == "resolution") d = val;
            else if (key == "horizon") L = val;
            else if (key == "controls") alpha = val;
            else if (key == "mc_samples") M = val;
            else if (key == "seed") seed = val;
        }
    }
    if (n < 2 || d == 0 || L == 0 || alpha == 0) throw ConfigError(what + ": incomplete header");
    DpPolicy p;
    p.grid = BeliefGrid(n, d);
    p.mc_samples = M;
    p.seed = seed;
    p.stages.resize(L);
    for (auto& t : p.stages) {
        t.bracket = Matrix::Constant(static_cast<Eigen::Index>(p.grid.size()), static_cast<Eigen::Index>(alpha), std::nan(""));
        t.bracket_se = t.bracket;
        t.best_control.assign(p.grid.size(), 0);
        t.value.assign(p.grid.size(), std::nan(""));
    }
    std::getline(in, line); // column header
    const std::size_t fields = 2 + n + 2 + 2 * alpha;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != fields) throw ConfigError(what + ": expected " + std::to_string(fields) + " fields per row");
        const auto k = static_cast<std::size_t>(parse_int(f[0], what));
        if (k < 1 || k > L) throw ConfigError(what + ": stage out of range");
        std::vector<int> q(n);
        for (std::size_t i = 0; i < n; ++i) q[i] = static_cast<int>(parse_int(f[2 + i], what));
        const auto g = p.grid.index_of(q);
        auto& t = p.stages[k - 1];
        const auto bc = parse_int(f[2 + n], what);
        if (bc < 1 || static_cast<std::size_t>(bc) > alpha) throw ConfigError(what + ": best_control out of range");
        t.best_control[g] = static_cast<std::size_t>(bc - 1);
        t.value[g] = parse_double(f[3 + n], what);
        for (std::size_t u = 0; u < alpha; ++u) {
            t.bracket(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(u)) = parse_double(f[4 + n + u], what);
            t.bracket_se(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(u)) = parse_double(f[4 + n + alpha + u], what);
        }
        ++rows;
    }
    if (rows != L * p.grid.size()) throw ConfigError(what + ": expected " + std::to_string(L * p.grid.size()) + " rows");
    return p;
}

inline DpPolicy read_dp_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    return read_dp_table(in, path.string());
}

// ---------------------------------------------------------------------------
// Results files
// ---------------------------------------------------------------------------

inline void write_episodes(std::ostream& out, const std::vector<EpisodeRecord>& episodes, std::size_t n_states) {
    out << "policy,seed,step,true_state,declared_state,control_index";
    for (std::size_t i = 0; i < n_states; ++i) out << ",p" << i + 1;
    out << '\n';
    for (const auto& ep : episodes)
        for (std::size_t k = 0; k < ep.steps(); ++k) {
            out << ep.policy << ',' << ep.seed << ',' << k << ',' << ep.true_state[k] + 1 << ','
                << ep.declared_state[k] + 1 << ',' << ep.control[k] + 1;
            for (Eigen::Index i = 0; i < ep.posterior[k].size(); ++i) out << ',' << fmt9(ep.posterior[k][i]);
            out << '\n';
        }
}

/// wall_time is written as 0 unless `with_timing`, so reruns are byte-identical.
inline void write_metrics(std::ostream& out, const std::vector<MetricsReport>& reports, bool with_timing) {
    out << "policy,mse,detection_accuracy,wall_time,mse_se,accuracy_se,episodes,steps,mse_out_of_range\n";
    for (const auto& r : reports)
        out << r.policy << ',' << fmt9(r.mse) << ',' << fmt9(r.detection_accuracy) << ','
            << (with_timing ? fmt9(r.wall_time) : std::string("0")) << ',' << fmt9(r.mse_se) << ','
            << fmt9(r.accuracy_se) << ',' << r.episodes << ',' << r.steps << ',' << (r.mse_out_of_range ? 1 : 0)
            << '\n';
}

inline void write_allocation(std::ostream& out, const std::vector<MetricsReport>& reports) {
    out << "policy,state,sensor,mean_samples,visits\n";
    for (const auto& r : reports) {
        const auto& a = r.allocation;
        for (Eigen::Index x = 0; x < a.mean_samples.rows(); ++x)
            for (Eigen::Index l = 0; l < a.mean_samples.cols(); ++l)
                out << r.policy << ',' << x + 1 << ',' << l + 1 << ',' << fmt9(a.mean_samples(x, l)) << ','
                    << a.visits[static_cast<std::size_t>(x)] << '\n';
    }
}

} // namespace ctrlsense
