#include "otshift/ot.hpp"

#include "otshift/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace otshift {

namespace {

// Transportation problem solved as min-cost flow on the bipartite graph
// (supply nodes 0..m-1, demand nodes m..m+n-1, an artificial root m+n) with
// the primal network simplex. The basis is a strongly feasible spanning tree:
// the leaving arc is the last blocking arc met when walking the pivot cycle
// from its apex, which rules out cycling on degenerate instances.
class TransportationSimplex {
public:
    TransportationSimplex(const Vector& supply, const Vector& demand, const Matrix& cost)
        : m_(static_cast<int>(supply.size())),
          n_(static_cast<int>(demand.size())),
          nodes_(m_ + n_ + 1),
          root_(m_ + n_),
          real_arcs_(static_cast<long>(m_) * n_),
          cost_(static_cast<std::size_t>(real_arcs_)),
          flow_(static_cast<std::size_t>(real_arcs_ + nodes_ - 1), 0.0),
          tree_(static_cast<std::size_t>(nodes_)),
          parent_(static_cast<std::size_t>(nodes_), -1),
          pred_(static_cast<std::size_t>(nodes_), -1),
          up_(static_cast<std::size_t>(nodes_), 0),
          depth_(static_cast<std::size_t>(nodes_), 0),
          pi_(static_cast<std::size_t>(nodes_), 0.0)
    {
        double scale = 0.0;
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < n_; ++j) {
                cost_[static_cast<std::size_t>(i) * n_ + j] = cost(i, j);
                scale = std::max(scale, std::abs(cost(i, j)));
            }
        tol_ = 1e-11 * (1.0 + scale);
        artificial_cost_ = (scale + 1.0) * nodes_;
        block_ = std::max(16L, static_cast<long>(std::sqrt(static_cast<double>(real_arcs_))));

        // Initial tree: supply nodes point up to the root, the root points
        // down to demand nodes, every artificial arc carrying its node's mass.
        for (int u = 0; u < root_; ++u) {
            const long arc = real_arcs_ + u;
            flow_[static_cast<std::size_t>(arc)] = u < m_ ? supply[u] : demand[u - m_];
            link(arc);
        }
        rebuild_tree();
    }

    long solve()
    {
        const long cap = 50L * real_arcs_ + 100000L;
        long pivots = 0;
        for (;;) {
            const long entering = block_search();
            if (entering < 0)
                return pivots;
            if (++pivots > cap)
                throw NumericalFailure("transportation simplex exceeded its pivot budget",
                                       static_cast<std::size_t>(pivots));
            pivot(entering);
        }
    }

    Matrix plan() const
    {
        Matrix p(m_, n_);
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < n_; ++j)
                p(i, j) = std::max(flow_[static_cast<std::size_t>(i) * n_ + j], 0.0);
        return p;
    }

private:
    int source(long arc) const
    {
        if (arc < real_arcs_)
            return static_cast<int>(arc / n_);
        const int u = static_cast<int>(arc - real_arcs_);
        return u < m_ ? u : root_;
    }

    int target(long arc) const
    {
        if (arc < real_arcs_)
            return m_ + static_cast<int>(arc % n_);
        const int u = static_cast<int>(arc - real_arcs_);
        return u < m_ ? root_ : u;
    }

    double arc_cost(long arc) const
    {
        if (arc < real_arcs_)
            return cost_[static_cast<std::size_t>(arc)];
        return arc - real_arcs_ < m_ ? 0.0 : artificial_cost_;
    }

    void link(long arc)
    {
        tree_[static_cast<std::size_t>(source(arc))].push_back(arc);
        tree_[static_cast<std::size_t>(target(arc))].push_back(arc);
    }

    void unlink(long arc)
    {
        for (const int node : {source(arc), target(arc)}) {
            auto& list = tree_[static_cast<std::size_t>(node)];
            list.erase(std::find(list.begin(), list.end(), arc));
        }
    }

    // Parent pointers, depths and node potentials (pi_v = pi_u + c_uv on tree arcs u -> v).
    void rebuild_tree()
    {
        stack_.clear();
        stack_.push_back(root_);
        parent_[static_cast<std::size_t>(root_)] = -1;
        pred_[static_cast<std::size_t>(root_)] = -1;
        depth_[static_cast<std::size_t>(root_)] = 0;
        pi_[static_cast<std::size_t>(root_)] = 0.0;
        while (!stack_.empty()) {
            const int u = stack_.back();
            stack_.pop_back();
            for (const long arc : tree_[static_cast<std::size_t>(u)]) {
                if (arc == pred_[static_cast<std::size_t>(u)])
                    continue;
                const int s = source(arc);
                const int v = s == u ? target(arc) : s;
                const auto vi = static_cast<std::size_t>(v);
                parent_[vi] = u;
                pred_[vi] = arc;
                up_[vi] = s == v;  // arc points from v up to its parent
                depth_[vi] = depth_[static_cast<std::size_t>(u)] + 1;
                pi_[vi] = up_[vi] ? pi_[static_cast<std::size_t>(u)] - arc_cost(arc)
                                  : pi_[static_cast<std::size_t>(u)] + arc_cost(arc);
                stack_.push_back(v);
            }
        }
    }

    double reduced_cost(long arc) const
    {
        return arc_cost(arc) + pi_[static_cast<std::size_t>(source(arc))] -
               pi_[static_cast<std::size_t>(target(arc))];
    }

    // Block search: scan blocks of real arcs cyclically from where the
    // previous search stopped and take the most negative reduced cost in the
    // first block containing one. Ties go to the lowest arc index.
    long block_search()
    {
        double best = -tol_;
        long arg = -1;
        long in_block = 0;
        long arc = next_;
        for (long k = 0; k < real_arcs_; ++k) {
            const int i = static_cast<int>(arc / n_);
            const int j = static_cast<int>(arc % n_);
            const double r = cost_[static_cast<std::size_t>(arc)] + pi_[static_cast<std::size_t>(i)] -
                             pi_[static_cast<std::size_t>(m_ + j)];
            if (r < best || (r == best && arc < arg)) {
                best = r;
                arg = arc;
            }
            if (++arc == real_arcs_)
                arc = 0;
            if (++in_block == block_) {
                if (arg >= 0)
                    break;
                in_block = 0;
            }
        }
        next_ = arc;
        return arg;
    }

    void pivot(long entering)
    {
        const int first = source(entering);
        const int second = target(entering);

        int join_a = first;
        int join_b = second;
        while (join_a != join_b) {
            if (depth_[static_cast<std::size_t>(join_a)] >= depth_[static_cast<std::size_t>(join_b)])
                join_a = parent_[static_cast<std::size_t>(join_a)];
            else
                join_b = parent_[static_cast<std::size_t>(join_b)];
        }
        const int join = join_a;

        // Walking the cycle from the apex: down to `first`, across the
        // entering arc, up from `second`. Decreasing arcs are those pointing
        // up on the first path and down on the second.
        double delta = std::numeric_limits<double>::infinity();
        int out_node = -1;
        for (int u = first; u != join; u = parent_[static_cast<std::size_t>(u)]) {
            const auto ui = static_cast<std::size_t>(u);
            if (up_[ui] && flow_[static_cast<std::size_t>(pred_[ui])] < delta) {
                delta = flow_[static_cast<std::size_t>(pred_[ui])];
                out_node = u;
            }
        }
        for (int u = second; u != join; u = parent_[static_cast<std::size_t>(u)]) {
            const auto ui = static_cast<std::size_t>(u);
            if (!up_[ui] && flow_[static_cast<std::size_t>(pred_[ui])] <= delta) {
                delta = flow_[static_cast<std::size_t>(pred_[ui])];
                out_node = u;
            }
        }
        if (out_node < 0)
            throw NumericalFailure("transportation simplex found an unbounded cycle", 0);

        delta = std::max(delta, 0.0);
        if (delta > 0.0) {
            for (int u = first; u != join; u = parent_[static_cast<std::size_t>(u)]) {
                const auto ui = static_cast<std::size_t>(u);
                flow_[static_cast<std::size_t>(pred_[ui])] += up_[ui] ? -delta : delta;
            }
            for (int u = second; u != join; u = parent_[static_cast<std::size_t>(u)]) {
                const auto ui = static_cast<std::size_t>(u);
                flow_[static_cast<std::size_t>(pred_[ui])] += up_[ui] ? delta : -delta;
            }
        }
        const long leaving = pred_[static_cast<std::size_t>(out_node)];
        flow_[static_cast<std::size_t>(leaving)] = 0.0;
        flow_[static_cast<std::size_t>(entering)] = delta;
        unlink(leaving);
        link(entering);
        rebuild_tree();
    }

    int m_;
    int n_;
    int nodes_;
    int root_;
    long real_arcs_;
    std::vector<double> cost_;  // row-major over real arcs
    std::vector<double> flow_;  // real arcs, then one artificial arc per node
    std::vector<std::vector<long>> tree_;
    std::vector<int> parent_;
    std::vector<long> pred_;
    std::vector<char> up_;
    std::vector<int> depth_;
    std::vector<double> pi_;
    std::vector<int> stack_;
    double tol_ = 0.0;
    double artificial_cost_ = 0.0;
    long block_ = 16;
    long next_ = 0;
};

void check_weights(const Vector& w, const char* which)
{
    if (w.size() == 0)
        throw DomainError(std::string(which) + " measure is empty");
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!(w[i] >= 0.0) || !std::isfinite(w[i]))
            throw DomainError(std::string(which) + " weights must be finite and non-negative");
}

}  // namespace

OtResult exact_ot(const Vector& source_weights, const Vector& target_weights, const Matrix& cost)
{
    check_weights(source_weights, "source");
    check_weights(target_weights, "target");
    if (cost.rows() != source_weights.size() || cost.cols() != target_weights.size())
        throw DimensionError("cost matrix shape does not match the measures");
    if (!cost.allFinite() || (cost.size() > 0 && cost.minCoeff() < 0.0))
        throw DomainError("costs must be finite and non-negative");
    const double sa = source_weights.sum();
    const double sb = target_weights.sum();
    if (std::abs(sa - sb) > kMassTolerance)
        throw MassMismatch("source mass " + std::to_string(sa) + " differs from target mass " +
                           std::to_string(sb));

    // Remove the sub-tolerance imbalance so the basis is exactly balanced.
    const Vector demand = target_weights * (sa / sb);
    TransportationSimplex simplex(source_weights, demand, cost);

    OtResult result;
    result.pivots = simplex.solve();
    result.plan.matrix = simplex.plan();
    result.plan.row_marginal = source_weights;
    result.plan.col_marginal = target_weights;
    result.cost = result.plan.cost(cost);
    return result;
}

OtResult exact_ot(const DiscreteMeasure& a, const DiscreteMeasure& b, const CostFn& cost)
{
    a.validate();
    b.validate();
    return exact_ot(a.weights, b.weights, cost_matrix(a, b, cost));
}

}  // namespace otshift
