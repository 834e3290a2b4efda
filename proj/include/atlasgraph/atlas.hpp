#pragma once

#include <optional>
#include <vector>

#include "atlasgraph/boundary.hpp"
#include "atlasgraph/core.hpp"

namespace atlasgraph {

// A chart can take over a point only if the point lies this close to the
// chart's surface; quadric domains are otherwise unbounded far from the chart.
inline constexpr double kTransitionResidual = 0.1;

// Learned atlas of second-order charts. Chart i is ChartId{i}; its boundary
// quartic is negative inside the region the chart is responsible for.
struct QuadraticAtlas {
    int ambient_dim = 0;
    int manifold_dim = 0;
    std::vector<charts::QuadraticChart> charts;
    std::vector<charts::AmbientSeparator> separators;
    std::vector<charts::BoundaryQuartic> quartics;
    std::vector<std::vector<int>> adjacency;

    int dim() const { return manifold_dim; }
    int size() const { return static_cast<int>(charts.size()); }

    const charts::QuadraticChart& chart(ChartId id) const { return charts.at(static_cast<size_t>(id.value)); }

    void validate() const
    {
        std::vector<int> dims;
        for (const auto& c : charts) {
            dims.push_back(c.dim());
            if (c.ambient_dim() != ambient_dim)
                throw DimensionMismatch("atlas: chart ambient dimension differs from atlas");
        }
        if (!dims.empty()) {
            require_uniform_dimension(dims);
            if (dims.front() != manifold_dim)
                throw DimensionMismatch("atlas: chart dimension differs from atlas");
        }
        if (quartics.size() != charts.size())
            throw DimensionMismatch("atlas: one boundary quartic per chart is required");
    }

    bool needs_transition(ChartId c, const Vec& xi) const
    {
        return quartics.at(static_cast<size_t>(c.value)).needs_transition(xi);
    }

    Vec embed(const RepresentativePoint& p) const { return charts::embed(chart(p.chart), p.xi); }

    Mat differential(ChartId c, const Vec& xi) const { return charts::differential(chart(c), xi); }

    // Best chart among those whose quartic accepts the point, by residual.
    std::optional<RepresentativePoint> transition(const RepresentativePoint& p) const
    {
        const auto& from = chart(p.chart);
        Vec x = charts::embed_without_offset(from, p.xi);
        auto pick = [&](const std::vector<int>& cand) -> std::optional<RepresentativePoint> {
            int best = -1;
            double best_r = std::numeric_limits<double>::infinity();
            Vec best_xi;
            for (int b : cand) {
                if (b == p.chart.value)
                    continue;
                Vec xi = charts::transition_map(from, charts[b], p.xi);
                if (quartics[b].value(xi) >= 0.0)
                    continue;
                double r = charts::residual(charts[b], x);
                if (r >= kTransitionResidual)
                    continue;
                if (r < best_r) {
                    best_r = r;
                    best = b;
                    best_xi = xi;
                }
            }
            if (best < 0)
                return std::nullopt;
            return RepresentativePoint{ChartId{best}, best_xi};
        };
        if (static_cast<size_t>(p.chart.value) < adjacency.size())
            if (auto r = pick(adjacency[p.chart.value]))
                return r;
        std::vector<int> all(charts.size());
        for (size_t i = 0; i < all.size(); ++i)
            all[i] = static_cast<int>(i);
        return pick(all);
    }

    // Chart whose quartic accepts the projection of x, preferring the smallest
    // residual among charts close to x. Falls back to plain membership.
    RepresentativePoint locate(const Vec& x) const
    {
        int best = -1;
        double best_r = std::numeric_limits<double>::infinity();
        for (int i = 0; i < size(); ++i) {
            Vec xi = charts::project_to_chart(charts[i], x);
            if (quartics[i].value(xi) >= 0.0)
                continue;
            double r = charts::residual(charts[i], x);
            if (r >= kTransitionResidual)
                continue;
            if (r < best_r) {
                best_r = r;
                best = i;
            }
        }
        if (best < 0)
            best = charts::assign_membership(charts, x);
        return RepresentativePoint{ChartId{best}, charts::project_to_chart(charts[best], x)};
    }
};

static_assert(DifferentiableChartProvider<QuadraticAtlas>);

}  // namespace atlasgraph
