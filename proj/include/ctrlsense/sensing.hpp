#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ctrlsense/errors.hpp"
#include "ctrlsense/linalg.hpp"
#include "ctrlsense/markov.hpp"

namespace ctrlsense {

/// Per-sensor signal description. Each state has a scalar mean and an AR(1)
/// innovation variance; samples from one sensor are correlated through a
/// Toeplitz AR covariance plus white measurement noise.
struct SensorSpec {
    std::string name;
    std::vector<double> means;        // one per state
    std::vector<double> ar_variances; // one per state, >= 0
    double ar_parameter = 0.0;        // |phi| < 1
    double noise_variance = 1.0;      // > 0
    std::size_t max_samples = 1;

    void validate(std::size_t n_states) const {
        if (means.size() != n_states) throw DimensionMismatch("sensor '" + name + "' means", n_states, means.size());
        if (ar_variances.size() != n_states)
            throw DimensionMismatch("sensor '" + name + "' ar_variances", n_states, ar_variances.size());
        if (!(std::abs(ar_parameter) < 1.0))
            throw InvalidARParameter("sensor '" + name + "': AR parameter must satisfy |phi| < 1, got " +
                                     std::to_string(ar_parameter));
        for (double v : ar_variances)
            if (!(v >= 0.0)) throw ConfigError("sensor '" + name + "': AR variances must be >= 0");
        if (!(noise_variance > 0.0)) throw ConfigError("sensor '" + name + "': noise variance must be > 0");
        if (max_samples == 0) throw ConfigError("sensor '" + name + "': max_samples must be positive");
    }
};

/// Covariance of n_samples consecutive samples of one sensor in one state:
/// sigma^2/(1-phi^2) * Toeplitz(1, phi, ..., phi^{n-1}) + sigma_z^2 * I.
inline Matrix build_sensor_covariance(const SensorSpec& spec, std::size_t state, std::size_t n_samples) {
    if (!(std::abs(spec.ar_parameter) < 1.0))
        throw InvalidARParameter("AR parameter must satisfy |phi| < 1, got " + std::to_string(spec.ar_parameter));
    if (n_samples == 0) throw ConfigError("build_sensor_covariance needs at least one sample");
    const auto d = static_cast<Eigen::Index>(n_samples);
    const double phi = spec.ar_parameter;
    const double scale = spec.ar_variances.at(state) / (1.0 - phi * phi);
    Matrix Q(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            Q(r, c) = scale * std::pow(phi, static_cast<double>(std::abs(r - c)));
    Q.diagonal().array() += spec.noise_variance;
    return Q;
}

/// Sample allocation (N_1, ..., N_s), one count per sensor.
struct ControlInput {
    std::vector<std::size_t> allocation;

    std::size_t total() const {
        std::size_t t = 0;
        for (auto a : allocation) t += a;
        return t;
    }
    std::size_t sensors() const noexcept { return allocation.size(); }
    std::size_t active_sensors() const {
        return static_cast<std::size_t>(std::count_if(allocation.begin(), allocation.end(), [](auto a) { return a > 0; }));
    }
    std::string to_string() const {
        std::string s = "(";
        for (std::size_t i = 0; i < allocation.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(allocation[i]);
        }
        return s + ")";
    }
    friend bool operator==(const ControlInput&, const ControlInput&) = default;
    friend auto operator<=>(const ControlInput&, const ControlInput&) = default;
};

/// Ordered, duplicate-free list of admissible controls. The position of a
/// control is its index everywhere (tables, CSVs, tie-breaks).
class ControlSet {
public:
    ControlSet() = default;
    explicit ControlSet(std::vector<ControlInput> controls) : controls_(std::move(controls)) {
        if (controls_.empty()) throw ConfigError("control set is empty");
        const auto s = controls_.front().sensors();
        for (std::size_t a = 0; a < controls_.size(); ++a) {
            if (controls_[a].sensors() != s)
                throw DimensionMismatch("control " + std::to_string(a + 1) + " sensor count", s, controls_[a].sensors());
            if (controls_[a].total() == 0)
                throw EmptyControl("control " + std::to_string(a + 1) + " requests no samples");
            for (std::size_t b = 0; b < a; ++b)
                if (controls_[a] == controls_[b])
                    throw ConfigError("control " + controls_[a].to_string() + " listed twice");
        }
    }

    /// Every nonzero allocation with total <= budget and per-sensor counts
    /// <= max_samples, ordered by total, then number of active sensors, then
    /// descending lexicographic order, e.g. for 3 sensors and budget 2:
    /// (1,0,0),(0,1,0),(0,0,1),(2,0,0),(0,2,0),(0,0,2),(1,1,0),(1,0,1),(0,1,1).
    static ControlSet all_within_budget(const std::vector<std::size_t>& max_samples, std::size_t budget) {
        std::vector<ControlInput> out;
        std::vector<std::size_t> cur(max_samples.size(), 0);
        auto rec = [&](auto&& self, std::size_t pos, std::size_t used) -> void {
            if (pos == cur.size()) {
                if (used > 0) out.push_back(ControlInput{cur});
                return;
            }
            for (std::size_t c = 0; c <= max_samples[pos] && used + c <= budget; ++c) {
                cur[pos] = c;
                self(self, pos + 1, used + c);
            }
            cur[pos] = 0;
        };
        rec(rec, 0, 0);
        std::stable_sort(out.begin(), out.end(), [](const ControlInput& a, const ControlInput& b) {
            if (a.total() != b.total()) return a.total() < b.total();
            if (a.active_sensors() != b.active_sensors()) return a.active_sensors() < b.active_sensors();
            return a > b;
        });
        return ControlSet(std::move(out));
    }

    std::size_t size() const noexcept { return controls_.size(); }
    const ControlInput& operator[](std::size_t i) const { return controls_.at(i); }
    auto begin() const noexcept { return controls_.begin(); }
    auto end() const noexcept { return controls_.end(); }

    std::optional<std::size_t> index_of(const ControlInput& u) const {
        for (std::size_t i = 0; i < controls_.size(); ++i)
            if (controls_[i] == u) return i;
        return std::nullopt;
    }

private:
    std::vector<ControlInput> controls_;
};

/// N(mean, cov) with its Cholesky factor and log-determinant cached.
struct GaussianComponent {
    Vector mean;
    Matrix cov;
    Matrix chol; // lower
    double log_det = 0.0;

    GaussianComponent() = default;
    GaussianComponent(Vector m, Matrix Q, const std::string& what = "observation covariance")
        : mean(std::move(m)), cov(std::move(Q)) {
        if (cov.rows() != cov.cols() || cov.rows() != mean.size())
            throw DimensionMismatch(what, static_cast<std::size_t>(mean.size()), static_cast<std::size_t>(cov.rows()));
        if (!is_symmetric(cov, 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())))
            throw ConfigError(what + " is not symmetric");
        chol = cholesky_lower(cov, what);
        log_det = log_det_from_cholesky(chol);
    }

    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Controlled Gaussian observation model: y | (state i, control u) ~ N(m_i^u, Q_i^u).
class ObservationModel {
public:
    ObservationModel() = default;

    /// components[u][i] holds the Gaussian for control u and state i.
    ObservationModel(ControlSet controls, std::vector<std::vector<GaussianComponent>> components)
        : controls_(std::move(controls)), comps_(std::move(components)) {
        if (comps_.size() != controls_.size())
            throw DimensionMismatch("observation model controls", controls_.size(), comps_.size());
        n_ = comps_.front().size();
        if (n_ < 2) throw ConfigError("observation model needs at least 2 states");
        for (std::size_t u = 0; u < comps_.size(); ++u) {
            if (comps_[u].size() != n_) throw DimensionMismatch("observation model states", n_, comps_[u].size());
            const auto d = comps_[u].front().dim();
            for (const auto& g : comps_[u])
                if (g.dim() != d) throw DimensionMismatch("observation dimension for control " + std::to_string(u + 1), d, g.dim());
        }
    }

    std::size_t states() const noexcept { return n_; }
    std::size_t num_controls() const noexcept { return controls_.size(); }
    const ControlSet& controls() const noexcept { return controls_; }
    std::size_t dim(std::size_t u) const { return comps_.at(u).front().dim(); }

    const GaussianComponent& component(std::size_t state, std::size_t u) const { return comps_.at(u).at(state); }
    const Vector& mean(std::size_t state, std::size_t u) const { return component(state, u).mean; }
    const Matrix& cov(std::size_t state, std::size_t u) const { return component(state, u).cov; }

    /// M(u) = [m_1^u, ..., m_n^u], d(u) x n.
    Matrix mean_matrix(std::size_t u) const {
        Matrix M(static_cast<Eigen::Index>(dim(u)), static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < n_; ++i) M.col(static_cast<Eigen::Index>(i)) = mean(i, u);
        return M;
    }

    /// Replace the Gaussian for one (state, control) pair.
    void override_component(std::size_t state, std::size_t u, GaussianComponent g) {
        if (g.dim() != dim(u)) throw DimensionMismatch("override dimension", dim(u), g.dim());
        comps_.at(u).at(state) = std::move(g);
    }

private:
    std::size_t n_ = 0;
    ControlSet controls_;
    std::vector<std::vector<GaussianComponent>> comps_;
};

/// Stacks per-sensor means and block-diagonal Toeplitz covariances for every
/// (state, control). Sensors with a zero count contribute nothing.
inline ObservationModel assemble_observation_model(const std::vector<SensorSpec>& specs, const ControlSet& controls,
                                                   std::optional<std::size_t> budget = std::nullopt) {
    if (specs.empty()) throw ConfigError("at least one sensor is required");
    const std::size_t n = specs.front().means.size();
    for (const auto& s : specs) s.validate(n);

    std::vector<std::vector<GaussianComponent>> comps(controls.size());
    for (std::size_t u = 0; u < controls.size(); ++u) {
        const auto& alloc = controls[u].allocation;
        if (alloc.size() != specs.size())
            throw DimensionMismatch("control " + controls[u].to_string() + " sensor count", specs.size(), alloc.size());
        if (controls[u].total() == 0) throw EmptyControl("control " + controls[u].to_string() + " requests no samples");
        if (budget && controls[u].total() > *budget)
            throw BudgetExceeded("control " + controls[u].to_string() + " exceeds budget " + std::to_string(*budget));
        for (std::size_t l = 0; l < specs.size(); ++l)
            if (alloc[l] > specs[l].max_samples)
                throw BudgetExceeded("control " + controls[u].to_string() + " requests " + std::to_string(alloc[l]) +
                                     " samples from sensor '" + specs[l].name + "' (max " +
                                     std::to_string(specs[l].max_samples) + ")");

        const auto d = static_cast<Eigen::Index>(controls[u].total());
        for (std::size_t i = 0; i < n; ++i) {
            Vector m(d);
            Matrix Q = Matrix::Zero(d, d);
            Eigen::Index off = 0;
            for (std::size_t l = 0; l < specs.size(); ++l) {
                const auto k = static_cast<Eigen::Index>(alloc[l]);
                if (k == 0) continue;
                m.segment(off, k).setConstant(specs[l].means[i]);
                Q.block(off, off, k, k) = build_sensor_covariance(specs[l], i, alloc[l]);
                off += k;
            }
            comps[u].emplace_back(std::move(m), std::move(Q),
                                  "covariance for state " + std::to_string(i + 1) + ", control " + controls[u].to_string());
        }
    }
    return ObservationModel(controls, std::move(comps));
}

/// y = m + L z, z ~ N(0, I).
template <class Gen>
Vector sample_observation(const ObservationModel& model, std::size_t state, std::size_t u, Gen& gen) {
    const auto& g = model.component(state, u);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(g.mean.size());
    for (Eigen::Index r = 0; r < z.size(); ++r) z[r] = normal(gen);
    return g.mean + g.chol.triangularView<Eigen::Lower>() * z;
}

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Log-density with caller-provided scratch (no allocation once sized).
inline double log_pdf(const GaussianComponent& g, const Vector& y, Vector& scratch) {
    if (y.size() != g.mean.size())
        throw DimensionMismatch("observation", static_cast<std::size_t>(g.mean.size()), static_cast<std::size_t>(y.size()));
    scratch = y - g.mean;
    g.chol.triangularView<Eigen::Lower>().solveInPlace(scratch);
    return -0.5 * (static_cast<double>(y.size()) * kLog2Pi + g.log_det + scratch.squaredNorm());
}

inline double log_pdf(const ObservationModel& model, const Vector& y, std::size_t state, std::size_t u) {
    Vector scratch;
    return log_pdf(model.component(state, u), y, scratch);
}

} // namespace ctrlsense
