#pragma once

#include <concepts>
#include <optional>
#include <string>
#include <vector>

#include "atlasgraph/linalg.hpp"

namespace atlasgraph {

struct ChartId {
    int value = 0;
    friend bool operator==(ChartId, ChartId) = default;
    friend auto operator<=>(ChartId, ChartId) = default;
};

struct RepresentativePoint {
    ChartId chart;
    Vec xi;
};

struct RepresentativeTangent {
    ChartId chart;
    Vec tau;
};

// A chart provider owns the transition rule of an atlas. needs_transition is
// evaluated on the raw coordinates after every additive update; transition
// returns nullopt when no chart can take the point.
template <class P>
concept ChartProvider = requires(const P& p, ChartId c, const Vec& xi, const RepresentativePoint& pt) {
    { p.dim() } -> std::convertible_to<int>;
    { p.needs_transition(c, xi) } -> std::convertible_to<bool>;
    { p.transition(pt) } -> std::same_as<std::optional<RepresentativePoint>>;
};

template <class P>
concept DifferentiableChartProvider = ChartProvider<P> && requires(const P& p, ChartId c, const Vec& xi) {
    { p.differential(c, xi) } -> std::convertible_to<Mat>;
};

class StepError : public Error {
public:
    StepError(const std::string& what, RepresentativePoint last)
        : Error(what), last_(std::move(last)) {}
    const RepresentativePoint& last_point() const { return last_; }

private:
    RepresentativePoint last_;
};

struct StepResult {
    RepresentativePoint point;
    int transitions = 0;
};

inline constexpr int kMaxTransitionsPerStep = 8;

template <ChartProvider P>
StepResult quasi_euclidean_step_counted(const P& provider, const RepresentativePoint& p, const Vec& tau,
                                        int max_transitions = kMaxTransitionsPerStep)
{
    if (p.xi.size() != provider.dim() || tau.size() != provider.dim())
        throw DimensionMismatch("quasi_euclidean_step: coordinate size does not match atlas dimension");
    StepResult out{RepresentativePoint{p.chart, p.xi + tau}, 0};
    while (provider.needs_transition(out.point.chart, out.point.xi)) {
        if (out.transitions >= max_transitions)
            throw StepError("quasi_euclidean_step: transition budget exhausted", out.point);
        std::optional<RepresentativePoint> next = provider.transition(out.point);
        if (!next)
            throw StepError("quasi_euclidean_step: no chart accepts the point", out.point);
        out.point = std::move(*next);
        ++out.transitions;
    }
    return out;
}

template <ChartProvider P>
RepresentativePoint quasi_euclidean_step(const P& provider, const RepresentativePoint& p, const Vec& tau)
{
    return quasi_euclidean_step_counted(provider, p, tau).point;
}

// Same-chart transport keeps the components unchanged.
inline RepresentativeTangent identity_transport(const RepresentativePoint& from, const RepresentativeTangent& tau,
                                                const RepresentativePoint& to)
{
    if (tau.chart != from.chart)
        throw ChartMismatch("identity_transport: tangent is not expressed in the source chart");
    if (from.chart != to.chart)
        throw ChartMismatch("identity_transport: source and destination charts differ");
    return RepresentativeTangent{to.chart, tau.tau};
}

inline RepresentativeTangent retraction_log_local(const RepresentativePoint& p, const RepresentativePoint& q)
{
    if (p.chart != q.chart)
        throw ChartMismatch("retraction_log_local: points live in different charts");
    if (p.xi.size() != q.xi.size())
        throw DimensionMismatch("retraction_log_local: coordinate sizes differ");
    return RepresentativeTangent{p.chart, q.xi - p.xi};
}

// G = J^T J for an embedding Jacobian J (ambient x dim).
inline Mat pullback_metric(const Mat& J, double rel_tol = 1e-12)
{
    Mat G = J.transpose() * J;
    if (G.size() == 0)
        return G;
    Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
    double top = es.eigenvalues().maxCoeff();
    if (!(top > 0.0) || es.eigenvalues().minCoeff() <= rel_tol * top)
        throw DegenerateMetric("pullback_metric: Jacobian is rank deficient");
    return G;
}

inline void require_uniform_dimension(const std::vector<int>& dims)
{
    for (int d : dims)
        if (d != dims.front())
            throw DimensionMismatch("atlas: charts of different dimensions");
}

}  // namespace atlasgraph
