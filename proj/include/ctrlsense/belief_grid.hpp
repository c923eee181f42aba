#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "ctrlsense/errors.hpp"
#include "ctrlsense/kalman.hpp"
#include "ctrlsense/markov.hpp"

namespace ctrlsense {

/// Simplex lattice {p : p_i in {0, 1/d, ..., 1}, sum p = 1}. Stores only the
/// C(n+d-1, n-1) points on the simplex, in descending lexicographic order of
/// their integer coordinates, starting at (d, 0, ..., 0).
class BeliefGrid {
public:
    BeliefGrid() = default;
    BeliefGrid(std::size_t n, std::size_t resolution) : n_(n), d_(resolution) {
        if (n < 2) throw ConfigError("belief grid needs n >= 2");
        if (resolution == 0) throw ConfigError("belief grid resolution must be positive");
        const double bits = static_cast<double>(n) * std::log2(static_cast<double>(resolution + 1));
        if (bits >= 63.0) throw ConfigError("belief grid too large to index");
        std::vector<int> cur(n, 0);
        auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
            if (pos + 1 == n) {
                cur[pos] = left;
                coords_.push_back(cur);
                return;
            }
            for (int c = left; c >= 0; --c) {
                cur[pos] = c;
                self(self, pos + 1, left - c);
            }
        };
        rec(rec, 0, static_cast<int>(d_));
        index_.reserve(coords_.size() * 2);
        for (std::size_t k = 0; k < coords_.size(); ++k) index_.emplace(encode(coords_[k]), k);
    }

    std::size_t states() const noexcept { return n_; }
    std::size_t resolution() const noexcept { return d_; }
    std::size_t size() const noexcept { return coords_.size(); }
    const std::vector<int>& coords(std::size_t k) const { return coords_.at(k); }

    Vector point(std::size_t k) const {
        const auto& c = coords_.at(k);
        Vector p(static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < n_; ++i) p[static_cast<Eigen::Index>(i)] = c[i] / static_cast<double>(d_);
        return p;
    }

    std::size_t index_of(const std::vector<int>& c) const {
        auto it = index_.find(encode(c));
        if (it == index_.end()) throw ConfigError("coordinates are not a grid point");
        return it->second;
    }

    /// Euclidean-nearest lattice point. Inputs off the simplex are projected
    /// first. Rounding d*p down and handing the leftover units to the largest
    /// fractional parts is exact for this separable problem.
    std::size_t nearest(const Vector& p) const {
        thread_local std::vector<int> c;
        thread_local std::vector<std::pair<double, std::size_t>> frac;
        const Vector q = project_to_simplex(p);
        c.resize(n_);
        frac.resize(n_);
        int used = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double t = q[static_cast<Eigen::Index>(i)] * static_cast<double>(d_);
            const double fl = std::floor(t);
            c[i] = static_cast<int>(fl);
            used += c[i];
            frac[i] = {t - fl, i};
        }
        int left = static_cast<int>(d_) - used;
        if (left > 0) {
            // larger remainder first, lower index on ties
            std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            for (std::size_t k = 0; left > 0; k = (k + 1) % n_, --left) ++c[frac[k].second];
        } else if (left < 0) {
            // only reachable through rounding in t; remove from the smallest remainders
            std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first < b.first : a.second < b.second;
            });
            for (std::size_t k = 0; left < 0; k = (k + 1) % n_)
                if (c[frac[k].second] > 0) {
                    --c[frac[k].second];
                    ++left;
                }
        }
        return index_.at(encode(c));
    }

private:
    std::uint64_t encode(const std::vector<int>& c) const {
        std::uint64_t key = 0;
        for (int v : c) key = key * (d_ + 1) + static_cast<std::uint64_t>(v);
        return key;
    }

    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<std::vector<int>> coords_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Number of simplex lattice points, C(n+d-1, n-1).
inline std::size_t simplex_lattice_size(std::size_t n, std::size_t d) {
    std::size_t r = 1;
    for (std::size_t k = 1; k < n; ++k) r = r * (d + k) / k;
    return r;
}

} // namespace ctrlsense
