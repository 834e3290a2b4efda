#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "atlasgraph/atlas.hpp"

namespace atlasgraph::geodesic {

// Quantities of the chart-linear path between xi0 and xi1. The ambient speed
// squared is P(t) = S t^2 + 2 B t + C.
struct NaiveTerms {
    double lambda = 0.0;
    double mu00 = 0.0;
    double mu01 = 0.0;
    double mu11 = 0.0;
    double S = 0.0;  // mu00 + mu11 - 2 mu01
    double B = 0.0;  // mu01 - mu00
    double C = 0.0;  // lambda + mu00
    double D = 0.0;  // C S - B^2, never negative
};

inline NaiveTerms naive_terms(const charts::QuadraticChart& ch, const Vec& xi0, const Vec& xi1)
{
    const int d = ch.dim();
    Vec delta = xi1 - xi0;
    const Eigen::Index nn = ch.K.rows();
    Vec k0(nn), k1(nn);
    for (Eigen::Index j = 0; j < nn; ++j) {
        double s0 = 0.0, s1 = 0.0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double kab = ch.K(j, a * d + b);
                s0 += delta(a) * kab * xi0(b);
                s1 += delta(a) * kab * xi1(b);
            }
        k0(j) = s0;
        k1(j) = s1;
    }
    NaiveTerms t;
    t.lambda = delta.squaredNorm();
    t.mu00 = k0.squaredNorm();
    t.mu01 = k0.dot(k1);
    t.mu11 = k1.squaredNorm();
    t.S = (k1 - k0).squaredNorm();
    t.B = k0.dot(k1 - k0);
    t.C = t.lambda + t.mu00;
    // Lagrange identity on (k0, k1 - k0): non-negative and free of cancellation
    Vec dk = k1 - k0;
    double gram = 0.0;
    for (Eigen::Index a = 0; a < nn; ++a)
        for (Eigen::Index b = a + 1; b < nn; ++b) {
            double m = k0(a) * dk(b) - k0(b) * dk(a);
            gram += m * m;
        }
    t.D = t.lambda * t.S + gram;
    return t;
}

// Terms from the scalar moments alone; used when no chart is at hand.
inline NaiveTerms naive_terms_from_moments(double lambda, double mu00, double mu01, double mu11)
{
    NaiveTerms t;
    t.lambda = lambda;
    t.mu00 = mu00;
    t.mu01 = mu01;
    t.mu11 = mu11;
    t.S = mu00 + mu11 - 2.0 * mu01;
    t.B = mu01 - mu00;
    t.C = lambda + mu00;
    t.D = std::max(0.0, lambda * t.S + (mu00 * mu11 - mu01 * mu01));
    return t;
}

// asinh(x1) - asinh(x0) without cancellation when x1 and x0 are close.
inline double asinh_difference(double x1, double x0, double gap)
{
    if (x1 * x0 > 0.0) {
        double a = std::abs(x1), b = std::abs(x0);
        double den = a * std::sqrt(1.0 + b * b) + b * std::sqrt(1.0 + a * a);
        return std::asinh(gap * (a + b) / den);
    }
    return std::asinh(x1) - std::asinh(x0);
}

// Closed-form integral of sqrt(P(t)) over [0, 1].
inline double naive_distance_from_terms(const NaiveTerms& t)
{
    if (t.lambda <= 0.0 && t.mu00 <= 0.0 && t.mu11 <= 0.0)
        return 0.0;
    if (t.S <= 0.0) {
        if (t.B == 0.0)
            return std::sqrt(t.C);
        return (std::pow(t.C + 2.0 * t.B, 1.5) - std::pow(t.C, 1.5)) / (3.0 * t.B);
    }
    double sqrtC = std::sqrt(t.C);
    double sqrtP1 = std::sqrt(std::max(0.0, t.S + 2.0 * t.B + t.C));
    double first = 0.5 * sqrtP1 + 0.5 * t.B / (sqrtP1 + sqrtC) + (t.B * t.B / t.S) / (sqrtP1 + sqrtC);
    if (t.D <= 0.0)
        return first;
    double rD = std::sqrt(t.D);
    double x1 = (t.S + t.B) / rD, x0 = t.B / rD;
    double second = t.D / (2.0 * t.S * std::sqrt(t.S)) * asinh_difference(x1, x0, t.S / rD);
    return first + second;
}

inline double naive_distance(const charts::QuadraticChart& ch, const Vec& xi0, const Vec& xi1)
{
    return naive_distance_from_terms(naive_terms(ch, xi0, xi1));
}

struct GraphVertex {
    ChartId chart;
    Vec xi;
    Vec x;
};

struct Edge {
    int to;
    double w;
};

// Vertices sorted by their first ambient coordinate for exact nearest queries.
class NearestIndex {
public:
    NearestIndex() = default;
    explicit NearestIndex(const std::vector<GraphVertex>& verts) { rebuild(verts); }

    void rebuild(const std::vector<GraphVertex>& verts)
    {
        order_.resize(verts.size());
        for (size_t i = 0; i < verts.size(); ++i)
            order_[i] = static_cast<int>(i);
        std::stable_sort(order_.begin(), order_.end(),
                         [&](int a, int b) { return verts[a].x(0) < verts[b].x(0); });
        keys_.resize(verts.size());
        for (size_t i = 0; i < order_.size(); ++i)
            keys_[i] = verts[order_[i]].x(0);
    }

    // Ties go to the lowest vertex id.
    int nearest(const std::vector<GraphVertex>& verts, const Vec& x) const
    {
        if (order_.empty())
            throw GraphError("nearest_vertex: empty graph");
        size_t hi = std::lower_bound(keys_.begin(), keys_.end(), x(0)) - keys_.begin();
        long lo = static_cast<long>(hi) - 1;
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        auto consider = [&](int v) {
            double d2 = (verts[v].x - x).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && v < best)) {
                best_d2 = d2;
                best = v;
            }
        };
        while (lo >= 0 || hi < keys_.size()) {
            bool moved = false;
            if (hi < keys_.size()) {
                double g = keys_[hi] - x(0);
                if (g * g <= best_d2) {
                    consider(order_[hi]);
                    ++hi;
                    moved = true;
                } else {
                    hi = keys_.size();
                }
            }
            if (lo >= 0) {
                double g = x(0) - keys_[lo];
                if (g * g <= best_d2) {
                    consider(order_[lo]);
                    --lo;
                    moved = true;
                } else {
                    lo = -1;
                }
            }
            if (!moved)
                break;
        }
        return best;
    }

private:
    std::vector<int> order_;
    std::vector<double> keys_;
};

struct DenseGraph {
    double delta = 0.0;
    double eps = 0.0;
    std::vector<GraphVertex> vertices;
    std::vector<std::vector<Edge>> adj;
    NearestIndex index;

    int size() const { return static_cast<int>(vertices.size()); }
    size_t edge_count() const
    {
        size_t e = 0;
        for (const auto& a : adj)
            e += a.size();
        return e / 2;
    }
    int nearest_vertex(const Vec& x) const { return index.nearest(vertices, x); }
};

inline int nearest_vertex_linear(const DenseGraph& g, const Vec& x)
{
    if (g.vertices.empty())
        throw GraphError("nearest_vertex: empty graph");
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int v = 0; v < g.size(); ++v) {
        double d2 = (g.vertices[v].x - x).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = v;
        }
    }
    return best;
}

// Weight of the edge u-v. Cross-chart pairs use the chart of u when v maps
// inside it, and never go below the ambient chord.
inline double edge_weight(const QuadraticAtlas& atlas, const GraphVertex& u, const GraphVertex& v)
{
    const auto& cu = atlas.chart(u.chart);
    if (u.chart == v.chart)
        return naive_distance(cu, u.xi, v.xi);
    double chord = (u.x - v.x).norm();
    Vec xv = charts::transition_map(atlas.chart(v.chart), cu, v.xi);
    if (atlas.quartics[u.chart.value].value(xv) >= 0.0)
        return chord;
    return std::max(chord, naive_distance(cu, u.xi, xv));
}

inline void connect_vertices(DenseGraph& g, const std::function<double(int, int)>& weight)
{
    const int n = g.size();
    g.adj.assign(n, {});
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return g.vertices[a].x(0) < g.vertices[b].x(0); });
    const double eps2 = g.eps * g.eps;
    for (int ii = 0; ii < n; ++ii) {
        int u = order[ii];
        const Vec& xu = g.vertices[u].x;
        for (int jj = ii + 1; jj < n; ++jj) {
            int v = order[jj];
            const Vec& xv = g.vertices[v].x;
            if (xv(0) - xu(0) >= g.eps)
                break;
            if ((xv - xu).squaredNorm() >= eps2)
                continue;
            int a = std::min(u, v), b = std::max(u, v);
            double w = weight(a, b);
            g.adj[a].push_back({b, w});
            g.adj[b].push_back({a, w});
        }
    }
    for (auto& lst : g.adj)
        std::sort(lst.begin(), lst.end(), [](const Edge& p, const Edge& q) { return p.to < q.to; });
}

// Grid points n * delta (|n delta| < r on every axis) that each chart's
// quartic accepts, joined when their ambient distance is below eps.
inline DenseGraph build_dense_graph(const QuadraticAtlas& atlas, double delta, double eps)
{
    if (!(delta > 0.0) || !(eps > 0.0))
        throw GraphError("build_dense_graph: delta and eps must be positive");
    DenseGraph g;
    g.delta = delta;
    g.eps = eps;
    const int d = atlas.dim();
    for (int ci = 0; ci < atlas.size(); ++ci) {
        const auto& ch = atlas.charts[ci];
        const int N = static_cast<int>(std::ceil(ch.radius / delta)) + 1;
        std::vector<int> axis;
        for (int n = -N; n <= N; ++n)
            if (std::abs(n * delta) < ch.radius)
                axis.push_back(n);
        if (axis.empty())
            continue;
        std::vector<size_t> pos(d, 0);
        for (;;) {
            Vec xi(d);
            for (int k = 0; k < d; ++k)
                xi(k) = axis[pos[k]] * delta;
            if (atlas.quartics[ci].value(xi) < 0.0)
                g.vertices.push_back(GraphVertex{ChartId{ci}, xi, charts::embed(ch, xi)});
            int k = d - 1;
            while (k >= 0 && ++pos[k] == axis.size()) {
                pos[k] = 0;
                --k;
            }
            if (k < 0)
                break;
        }
    }
    if (g.vertices.empty())
        throw GraphError("build_dense_graph: no grid point lies inside its chart boundary");
    connect_vertices(g, [&](int a, int b) { return edge_weight(atlas, g.vertices[a], g.vertices[b]); });
    g.index.rebuild(g.vertices);
    return g;
}

struct ShortestPaths {
    std::vector<double> dist;
    std::vector<int> parent;
};

// Binary-heap Dijkstra; equal distances pop the lower vertex id first. With
// target >= 0 the search stops once the target is settled.
template <class Adjacency>
ShortestPaths dijkstra(const Adjacency& adj, int source, int target = -1)
{
    const int n = static_cast<int>(adj.size());
    if (source < 0 || source >= n)
        throw GraphError("dijkstra: source out of range");
    ShortestPaths sp;
    sp.dist.assign(n, std::numeric_limits<double>::infinity());
    sp.parent.assign(n, -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    sp.dist[source] = 0.0;
    heap.push({0.0, source});
    std::vector<char> done(n, 0);
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (done[u])
            continue;
        done[u] = 1;
        if (u == target)
            break;
        for (const auto& e : adj[u]) {
            double nd = d + e.w;
            if (nd < sp.dist[e.to] || (nd == sp.dist[e.to] && !done[e.to] && u < sp.parent[e.to])) {
                sp.dist[e.to] = nd;
                sp.parent[e.to] = u;
                heap.push({nd, e.to});
            }
        }
    }
    return sp;
}

// Vertex sequence source .. target; empty when unreachable.
inline std::vector<int> extract_path(const ShortestPaths& sp, int source, int target)
{
    std::vector<int> path;
    if (!std::isfinite(sp.dist[target]))
        return path;
    for (int v = target; v != -1; v = sp.parent[v]) {
        path.push_back(v);
        if (v == source)
            break;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

inline bool is_connected(const DenseGraph& g)
{
    if (g.vertices.empty())
        return false;
    ShortestPaths sp = dijkstra(g.adj, 0);
    for (double d : sp.dist)
        if (!std::isfinite(d))
            return false;
    return true;
}

// Graph distance between ambient points through their nearest vertices,
// including the two attaching segments.
inline double graph_distance(const DenseGraph& g, const Vec& x, const Vec& y)
{
    if ((x - y).squaredNorm() == 0.0)
        return 0.0;
    int u = g.nearest_vertex(x), v = g.nearest_vertex(y);
    double legs = (g.vertices[u].x - x).norm() + (g.vertices[v].x - y).norm();
    if (u == v)
        return std::max(legs, (x - y).norm());
    ShortestPaths sp = dijkstra(g.adj, u, v);
    return sp.dist[v] + legs;
}

// Grid vertices reach radius * sqrt(d) and edges add up to eps, so a
// re-represented path point legitimately lands somewhat past the fit radius.
inline constexpr double kRepresentationSlack = 2.0;

inline void require_inside(const charts::QuadraticChart& ch, const Vec& xi, const char* what)
{
    if (xi.norm() > kRepresentationSlack * ch.radius)
        throw NotInChart(std::string(what) + ": re-represented point lies far outside the target chart");
}

// Accumulates chart-local logs along the graph path from q back to p. When
// the walk enters a new chart the running point moves through the transition
// map and the running vector through the chart Jacobians.
inline RepresentativeTangent approx_riemannian_log(const QuadraticAtlas& atlas, const DenseGraph& g,
                                                   const RepresentativePoint& p, const RepresentativePoint& q)
{
    if (p.chart == q.chart && p.xi == q.xi)
        return RepresentativeTangent{p.chart, Vec::Zero(p.xi.size())};
    int v = g.nearest_vertex(atlas.embed(p));
    int vs = g.nearest_vertex(atlas.embed(q));
    std::vector<int> path;
    if (v != vs) {
        ShortestPaths sp = dijkstra(g.adj, v, vs);
        path = extract_path(sp, v, vs);
        if (path.empty())
            throw GraphError("approx_riemannian_log: points lie in different components");
    } else {
        path = {v};
    }
    Vec acc = Vec::Zero(p.xi.size());
    ChartId cur = q.chart;
    Vec cur_xi = q.xi;
    auto visit = [&](ChartId c, const Vec& xi) {
        if (c != cur) {
            const auto& from = atlas.chart(cur);
            const auto& to = atlas.chart(c);
            Vec moved = charts::transition_map(from, to, cur_xi);
            require_inside(to, moved, "approx_riemannian_log");
            acc = charts::cross_chart_transport(from, cur_xi, to, moved, acc);
            cur_xi = moved;
            cur = c;
        }
        acc += cur_xi - xi;
        cur_xi = xi;
    };
    for (auto it = path.rbegin(); it != path.rend(); ++it)
        visit(g.vertices[*it].chart, g.vertices[*it].xi);
    visit(p.chart, p.xi);
    return RepresentativeTangent{p.chart, acc};
}

// Moves a tangent along the graph path between the nearest vertices of two
// points: identity inside a chart, Jacobian re-expression across charts.
inline RepresentativeTangent graph_transport(const QuadraticAtlas& atlas, const DenseGraph& g,
                                             const RepresentativePoint& from, const RepresentativeTangent& tau,
                                             const RepresentativePoint& to, const std::vector<int>* path_hint = nullptr)
{
    if (tau.chart != from.chart)
        throw ChartMismatch("graph_transport: tangent is not expressed in the source chart");
    std::vector<int> path;
    if (path_hint) {
        path = *path_hint;
    } else {
        int u = g.nearest_vertex(atlas.embed(from));
        int v = g.nearest_vertex(atlas.embed(to));
        ShortestPaths sp = dijkstra(g.adj, u, v);
        path = extract_path(sp, u, v);
        if (path.empty())
            throw GraphError("graph_transport: points lie in different components");
    }
    ChartId cur = from.chart;
    Vec cur_xi = from.xi;
    Vec t = tau.tau;
    auto hop = [&](ChartId c, const Vec& xi) {
        if (c != cur)
            t = charts::cross_chart_transport(atlas.chart(cur), cur_xi, atlas.chart(c), xi, t);
        cur = c;
        cur_xi = xi;
    };
    for (int v : path)
        hop(g.vertices[v].chart, g.vertices[v].xi);
    hop(to.chart, to.xi);
    return RepresentativeTangent{to.chart, t};
}

}  // namespace atlasgraph::geodesic
