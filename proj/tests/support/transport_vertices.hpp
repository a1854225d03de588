#pragma once

// Exhaustive search over the vertices of a small transportation polytope with
// integer masses. A vertex has a forest as support, so it can be built by
// repeatedly saturating a leaf: a row sent entirely to one column, or a column
// filled entirely from one row. Trying every leaf at every step reaches every
// vertex; memoizing on the remaining masses keeps this cheap.

#include <algorithm>
#include <limits>
#include <cstdint>
#include <unordered_map>
#include <stdexcept>
#include <vector>

namespace oracle {

class VertexSearch {
public:
    VertexSearch(std::vector<long> a, std::vector<long> b, std::vector<std::vector<double>> cost)
        : a_(std::move(a)), b_(std::move(b)), c_(std::move(cost))
    {
        long sa = 0, sb = 0;
        for (long v : a_) sa += v;
        for (long v : b_) sb += v;
        if (sa != sb || sa <= 0)
            throw std::invalid_argument("masses must be positive and balanced");
        if (a_.size() + b_.size() > 16 || sa > 255)
            throw std::invalid_argument("instance too large for the packed state key");
        total_ = sa;
    }

    // Minimum of <C, X> / total over all vertices X (plans in units of 1/total).
    double min_cost()
    {
        std::vector<long> state = a_;
        state.insert(state.end(), b_.begin(), b_.end());
        return solve(state) / static_cast<double>(total_);
    }

    std::size_t states() const { return memo_.size(); }

private:
    double solve(std::vector<long>& s)
    {
        const std::size_t m = a_.size(), n = b_.size();
        bool empty = true;
        for (long v : s)
            if (v != 0) { empty = false; break; }
        if (empty)
            return 0.0;
        const Key key = pack(s);
        if (auto it = memo_.find(key); it != memo_.end())
            return it->second;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            if (s[i] == 0)
                continue;
            for (std::size_t j = 0; j < n; ++j) {
                const long ai = s[i], bj = s[m + j];
                if (bj == 0)
                    continue;
                // Row leaf when ai <= bj, column leaf when bj <= ai; both coincide on ties.
                const long t = std::min(ai, bj);
                s[i] -= t;
                s[m + j] -= t;
                best = std::min(best, c_[i][j] * static_cast<double>(t) + solve(s));
                s[i] += t;
                s[m + j] += t;
            }
        }
        memo_.emplace(key, best);
        return best;
    }

    using Key = unsigned __int128;
    struct KeyHash {
        std::size_t operator()(Key k) const noexcept
        {
            const auto lo = static_cast<std::uint64_t>(k), hi = static_cast<std::uint64_t>(k >> 64);
            return std::hash<std::uint64_t>{}(lo ^ (hi * 0x9e3779b97f4a7c15ULL));
        }
    };

    static Key pack(const std::vector<long>& s)
    {
        Key k = 0;
        for (long v : s)
            k = (k << 8) | static_cast<Key>(v);
        return k;
    }

    std::vector<long> a_, b_;
    std::vector<std::vector<double>> c_;
    long total_ = 0;
    std::unordered_map<Key, double, KeyHash> memo_;
};

}  // namespace oracle
