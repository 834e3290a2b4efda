#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "atlasgraph/approx_primitives.hpp"
#include "atlasgraph/atlas.hpp"

namespace atlasgraph::klein {

using Rng = std::mt19937_64;

constexpr double kPi = 3.14159265358979323846;

struct PatchParams {
    double theta = 0.0;
    double phi = 0.0;
};

enum class PatchLabel { Convex, Concave, Neither };

inline const char* label_name(PatchLabel l)
{
    switch (l) {
    case PatchLabel::Convex:
        return "convex";
    case PatchLabel::Concave:
        return "concave";
    default:
        return "neither";
    }
}

// Entry 3 (x + 1) + (y + 1) holds k(x, y) for x, y in {-1, 0, 1}.
inline Vec patch(double theta, double phi)
{
    Vec v(9);
    const double c = std::cos(theta), s = std::sin(theta);
    const double cp = std::cos(phi), sp = std::sin(phi);
    for (int x = -1; x <= 1; ++x)
        for (int y = -1; y <= 1; ++y) {
            double u = x * c + y * s;
            v(3 * (x + 1) + (y + 1)) = cp * u * u + sp * u;
        }
    return v;
}

inline Vec patch(const PatchParams& p) { return patch(p.theta, p.phi); }

// -2 < tan phi < 2 is |sin phi| < 2 |cos phi|, which also excludes cos phi == 0.
inline PatchLabel label(double /*theta*/, double phi)
{
    const double c = std::cos(phi), s = std::sin(phi);
    if (!(std::abs(s) < 2.0 * std::abs(c)))
        return PatchLabel::Neither;
    return c > 0.0 ? PatchLabel::Convex : PatchLabel::Concave;
}

inline PatchLabel label(const PatchParams& p) { return label(p.theta, p.phi); }

inline std::vector<PatchParams> chart_centers(int grid = 8)
{
    if (grid < 1)
        throw DimensionMismatch("chart_centers: grid must be positive");
    std::vector<PatchParams> out;
    out.reserve(static_cast<size_t>(grid) * grid);
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j)
            out.push_back({kPi * (i + 0.5) / grid, 2.0 * kPi * (j + 0.5) / grid});
    return out;
}

inline PatchParams sample_params(Rng& rng)
{
    std::uniform_real_distribution<double> th(0.0, kPi), ph(0.0, 2.0 * kPi);
    double t = th(rng);
    return {t, ph(rng)};
}

// Canonical representative with theta in [0, pi) and phi in [0, 2 pi).
inline PatchParams canonical(PatchParams p)
{
    double t = std::fmod(p.theta, 2.0 * kPi);
    if (t < 0.0)
        t += 2.0 * kPi;
    double f = p.phi;
    if (t >= kPi) {
        t -= kPi;
        f = 2.0 * kPi - f;
    }
    f = std::fmod(f, 2.0 * kPi);
    if (f < 0.0)
        f += 2.0 * kPi;
    return {t, f};
}

// Independent stream per (seed, stream) pair.
inline Rng stream_rng(uint64_t seed, uint64_t stream)
{
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(stream),
                      static_cast<uint32_t>(stream >> 32), 0x6b6c6eu};
    return Rng(seq);
}

struct KleinAtlasConfig {
    int grid = 8;
    double radius = 1.1;
    int per_chart = 500;
    double svm_C = 10.0;
    // per-class cap on boundary training points; bounds the kernel matrix
    int svm_class_cap = 600;
    // a chart accepts points with SVM decision below this value, so that
    // neighbouring domains overlap instead of leaving soft-margin gaps
    double domain_margin = 0.5;
    uint64_t seed = 1;
};

struct ChartReport {
    int in_ball = 0;
    int own = 0;
    int others = 0;
    double max_fit_residual = 0.0;
    long smo_updates = 0;
    bool smo_converged = true;
};

struct KleinAtlas {
    QuadraticAtlas atlas;
    std::vector<PatchParams> centers;
    std::vector<ChartReport> reports;
};

namespace detail {

template <class T>
std::vector<T> subsample(std::vector<T> v, size_t cap, Rng& rng)
{
    if (v.size() <= cap)
        return v;
    std::shuffle(v.begin(), v.end(), rng);
    v.resize(cap);
    std::sort(v.begin(), v.end());
    return v;
}

inline Mat rows_of(const std::vector<Vec>& pts, const std::vector<int>& idx)
{
    Mat m(static_cast<Eigen::Index>(idx.size()), pts.empty() ? 0 : pts.front().size());
    for (size_t i = 0; i < idx.size(); ++i)
        m.row(static_cast<Eigen::Index>(i)) = pts[idx[i]].transpose();
    return m;
}

}  // namespace detail

// Per center: uniform parameter draws until per_chart land within radius of
// the center patch, a d = 2 quadratic fit, then an SVM boundary between the
// chart's own pooled members and nearby members of other charts.
inline KleinAtlas build_klein_atlas(const KleinAtlasConfig& cfg)
{
    if (cfg.per_chart < 50)
        throw DimensionMismatch("build_klein_atlas: per_chart must be at least 50");
    KleinAtlas out;
    out.centers = chart_centers(cfg.grid);
    const int nc = static_cast<int>(out.centers.size());
    QuadraticAtlas& atlas = out.atlas;
    atlas.ambient_dim = 9;
    atlas.manifold_dim = 2;
    atlas.charts.resize(nc);
    out.reports.resize(nc);

    std::vector<Vec> pooled;
    std::vector<Vec> center_patch(nc);
    for (int i = 0; i < nc; ++i) {
        Rng rng = stream_rng(cfg.seed, static_cast<uint64_t>(i));
        center_patch[i] = patch(out.centers[i]);
        std::vector<Vec> kept;
        const long max_draws = 2000L * cfg.per_chart;
        for (long draw = 0; draw < max_draws && static_cast<int>(kept.size()) < cfg.per_chart; ++draw) {
            Vec x = patch(sample_params(rng));
            if ((x - center_patch[i]).norm() < cfg.radius)
                kept.push_back(std::move(x));
        }
        if (static_cast<int>(kept.size()) < cfg.per_chart)
            throw DegenerateMetric("build_klein_atlas: too few in-ball samples for chart " + std::to_string(i));
        Mat pts(static_cast<Eigen::Index>(kept.size()), 9);
        for (size_t r = 0; r < kept.size(); ++r)
            pts.row(static_cast<Eigen::Index>(r)) = kept[r].transpose();
        charts::QuadraticFit fit;
        try {
            fit = charts::fit_local_quadratic(pts, center_patch[i], cfg.radius, 2, i);
        } catch (const Error& e) {
            throw DegenerateMetric("build_klein_atlas: chart " + std::to_string(i) + ": " + e.what());
        }
        atlas.charts[i] = fit.chart;
        out.reports[i].in_ball = fit.neighbours;
        out.reports[i].max_fit_residual = fit.max_residual;
        pooled.insert(pooled.end(), kept.begin(), kept.end());
    }

    std::vector<int> member(pooled.size());
    std::vector<int> runner_up(pooled.size());
    for (size_t p = 0; p < pooled.size(); ++p) {
        double b1 = std::numeric_limits<double>::infinity(), b2 = b1;
        int i1 = -1, i2 = -1;
        for (int i = 0; i < nc; ++i) {
            double r = charts::residual(atlas.charts[i], pooled[p]);
            if (r < b1) {
                b2 = b1;
                i2 = i1;
                b1 = r;
                i1 = i;
            } else if (r < b2) {
                b2 = r;
                i2 = i;
            }
        }
        member[p] = i1;
        runner_up[p] = i2;
    }

    atlas.separators.resize(nc);
    atlas.quartics.resize(nc);
    for (int i = 0; i < nc; ++i) {
        Rng rng = stream_rng(cfg.seed, static_cast<uint64_t>(nc + i));
        std::vector<int> own, others;
        for (size_t p = 0; p < pooled.size(); ++p) {
            if (member[p] == i)
                own.push_back(static_cast<int>(p));
            else if ((pooled[p] - center_patch[i]).norm() < 2.0 * cfg.radius)
                others.push_back(static_cast<int>(p));
        }
        if (own.empty() || others.empty())
            throw DegenerateMetric("build_klein_atlas: chart " + std::to_string(i) + " has an empty boundary class");
        own = detail::subsample(std::move(own), static_cast<size_t>(cfg.svm_class_cap), rng);
        others = detail::subsample(std::move(others), static_cast<size_t>(cfg.svm_class_cap), rng);
        svm::SmoOptions opt;
        opt.C = cfg.svm_C;
        // own members are the negative side so the quartic is negative inside
        svm::SvmModel model =
            svm::train_boundary_svm(detail::rows_of(pooled, others), detail::rows_of(pooled, own), center_patch[i], opt);
        atlas.separators[i] = charts::svm_to_quadratic(model);
        atlas.separators[i].c0 -= cfg.domain_margin;
        atlas.quartics[i] = charts::precompute_quartic(atlas.charts[i], atlas.separators[i]);
        out.reports[i].own = static_cast<int>(own.size());
        out.reports[i].others = static_cast<int>(others.size());
        out.reports[i].smo_updates = model.updates;
        out.reports[i].smo_converged = model.converged;
    }

    // charts that compete for the same pooled points are neighbours
    std::vector<std::vector<char>> adj(nc, std::vector<char>(nc, 0));
    for (size_t p = 0; p < pooled.size(); ++p)
        if (runner_up[p] >= 0) {
            adj[member[p]][runner_up[p]] = 1;
            adj[runner_up[p]][member[p]] = 1;
        }
    atlas.adjacency.assign(nc, {});
    for (int i = 0; i < nc; ++i)
        for (int j = 0; j < nc; ++j)
            if (adj[i][j])
                atlas.adjacency[i].push_back(j);
    atlas.validate();
    return out;
}

struct AtlasSample {
    RepresentativePoint point;
    Vec x;
};

// Rejection sampling of xi uniform in each chart's radius ball, kept only where
// the chart's boundary accepts it.
inline std::vector<AtlasSample> sample_atlas_points(const QuadraticAtlas& atlas, int per_chart, uint64_t seed)
{
    std::vector<AtlasSample> out;
    out.reserve(static_cast<size_t>(per_chart) * atlas.size());
    for (int i = 0; i < atlas.size(); ++i) {
        Rng rng = stream_rng(seed, static_cast<uint64_t>(i));
        const auto& ch = atlas.charts[i];
        std::uniform_real_distribution<double> u(-ch.radius, ch.radius);
        int accepted = 0;
        long tries = 0;
        const long min_tries = 100L * per_chart;
        while (accepted < per_chart) {
            ++tries;
            if (tries > min_tries && accepted * 100L < tries)
                throw SampleOutsideChart("sample_atlas_points: acceptance below 1% in chart " + std::to_string(i));
            Vec xi(2);
            xi << u(rng), u(rng);
            if (xi.norm() >= ch.radius)
                continue;
            if (!(atlas.quartics[i].value(xi) < 0.0))
                continue;
            out.push_back({{ChartId{i}, xi}, charts::embed(ch, xi)});
            ++accepted;
        }
    }
    return out;
}

// Parameters whose patch is closest to x: a coarse grid search refined by
// Gauss-Newton on the squared distance.
inline PatchParams readout(const Vec& x)
{
    static const int kCoarse = 64;
    static const std::vector<std::pair<PatchParams, Vec>> grid = [] {
        std::vector<std::pair<PatchParams, Vec>> g;
        for (int i = 0; i < kCoarse; ++i)
            for (int j = 0; j < 2 * kCoarse; ++j) {
                PatchParams p{kPi * i / kCoarse, 2.0 * kPi * j / (2 * kCoarse)};
                g.emplace_back(p, patch(p));
            }
        return g;
    }();
    PatchParams best{};
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& [p, v] : grid) {
        double d = (v - x).squaredNorm();
        if (d < bd) {
            bd = d;
            best = p;
        }
    }
    const double h = 1e-6;
    for (int it = 0; it < 30; ++it) {
        Vec r = patch(best) - x;
        Mat J(9, 2);
        J.col(0) = (patch(best.theta + h, best.phi) - patch(best.theta - h, best.phi)) / (2 * h);
        J.col(1) = (patch(best.theta, best.phi + h) - patch(best.theta, best.phi - h)) / (2 * h);
        Vec step = (J.transpose() * J + 1e-12 * Mat::Identity(2, 2)).ldlt().solve(-J.transpose() * r);
        PatchParams next{best.theta + step(0), best.phi + step(1)};
        if ((patch(next) - x).squaredNorm() > r.squaredNorm())
            break;
        best = next;
        if (step.norm() < 1e-13)
            break;
    }
    return canonical(best);
}

struct WeightedGraph {
    std::vector<std::vector<geodesic::Edge>> adj;
    int size() const { return static_cast<int>(adj.size()); }
};

// Symmetrized k-nearest-neighbour graph with Euclidean weights. Rows of pts
// are points; distances are computed in blocks.
inline WeightedGraph knn_graph(const Mat& pts, int knn)
{
    const Eigen::Index n = pts.rows();
    if (knn < 1 || knn >= n)
        throw GraphError("knn_graph: need 1 <= knn < number of points");
    Vec sq = pts.rowwise().squaredNorm();
    std::vector<std::vector<std::pair<double, int>>> best(static_cast<size_t>(n));
    const Eigen::Index block = 512;
    std::vector<std::pair<double, int>> top;
    for (Eigen::Index b0 = 0; b0 < n; b0 += block) {
        Eigen::Index bn = std::min(block, n - b0);
        // column r holds inner products of point b0 + r with every point
        Mat G = pts * pts.middleRows(b0, bn).transpose();
        for (Eigen::Index r = 0; r < bn; ++r) {
            const Eigen::Index i = b0 + r;
            const double* g = G.col(r).data();
            // sorted ascending by (distance, index)
            top.assign(static_cast<size_t>(knn), {std::numeric_limits<double>::infinity(), -1});
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i)
                    continue;
                double d2 = std::max(0.0, sq(i) + sq(j) - 2.0 * g[j]);
                if (d2 >= top.back().first)
                    continue;
                size_t pos = top.size() - 1;
                while (pos > 0 && top[pos - 1].first > d2) {
                    top[pos] = top[pos - 1];
                    --pos;
                }
                top[pos] = {d2, static_cast<int>(j)};
            }
            best[static_cast<size_t>(i)] = top;
        }
    }
    std::vector<std::vector<int>> nb(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        for (const auto& [d2, j] : best[static_cast<size_t>(i)]) {
            nb[static_cast<size_t>(i)].push_back(j);
            nb[static_cast<size_t>(j)].push_back(static_cast<int>(i));
        }
    WeightedGraph g;
    g.adj.resize(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& v = nb[static_cast<size_t>(i)];
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        for (int j : v)
            g.adj[static_cast<size_t>(i)].push_back({j, (pts.row(i) - pts.row(j)).norm()});
    }
    return g;
}

inline std::vector<int> component_labels(const WeightedGraph& g, int* count = nullptr)
{
    std::vector<int> c(static_cast<size_t>(g.size()), -1);
    int k = 0;
    std::vector<int> stack;
    for (int s = 0; s < g.size(); ++s) {
        if (c[s] >= 0)
            continue;
        c[s] = k;
        stack.assign(1, s);
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (const auto& e : g.adj[u])
                if (c[e.to] < 0) {
                    c[e.to] = k;
                    stack.push_back(e.to);
                }
        }
        ++k;
    }
    if (count)
        *count = k;
    return c;
}

// Joins components by their shortest Euclidean links, Boruvka style, so every
// pair has a finite path. Returns the number of added edges.
inline int bridge_components(const Mat& pts, WeightedGraph& g)
{
    int added = 0;
    const Eigen::Index n = pts.rows();
    for (;;) {
        int nc = 0;
        std::vector<int> comp = component_labels(g, &nc);
        if (nc <= 1)
            return added;
        std::vector<double> bd(static_cast<size_t>(nc), std::numeric_limits<double>::infinity());
        std::vector<std::pair<int, int>> link(static_cast<size_t>(nc), {-1, -1});
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                int ci = comp[i], cj = comp[j];
                if (ci == cj)
                    continue;
                double d2 = (pts.row(i) - pts.row(j)).squaredNorm();
                if (d2 < bd[ci]) {
                    bd[ci] = d2;
                    link[ci] = {static_cast<int>(i), static_cast<int>(j)};
                }
                if (d2 < bd[cj]) {
                    bd[cj] = d2;
                    link[cj] = {static_cast<int>(i), static_cast<int>(j)};
                }
            }
        std::sort(link.begin(), link.end());
        link.erase(std::unique(link.begin(), link.end()), link.end());
        for (auto [a, b] : link) {
            double w = (pts.row(a) - pts.row(b)).norm();
            g.adj[a].push_back({b, w});
            g.adj[b].push_back({a, w});
            ++added;
        }
    }
}

// Patches of the m x m parameter grid theta = pi i / m, phi = 2 pi j / m; the
// excluded endpoints are identified with included points.
struct ReferenceGraph {
    int m = 0;
    std::vector<PatchParams> params;
    Mat points;
    WeightedGraph graph;
};

inline ReferenceGraph reference_geodesic_graph(int m, int knn = 5)
{
    if (m < 2)
        throw DimensionMismatch("reference_geodesic_graph: grid must have at least two points per axis");
    ReferenceGraph r;
    r.m = m;
    r.points.resize(static_cast<Eigen::Index>(m) * m, 9);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            PatchParams p{kPi * i / m, 2.0 * kPi * j / m};
            r.params.push_back(p);
            r.points.row(static_cast<Eigen::Index>(i) * m + j) = patch(p).transpose();
        }
    r.graph = knn_graph(r.points, knn);
    return r;
}

// Top-two principal-component coordinates of the rows of pts.
struct Pca2 {
    Vec mean;
    Mat basis;  // 9 x 2
    Mat project(const Mat& pts) const { return (pts.rowwise() - mean.transpose()) * basis; }
};

inline Pca2 fit_pca2(const Mat& pts)
{
    Pca2 p;
    p.mean = pts.colwise().mean().transpose();
    Mat Xc = pts.rowwise() - p.mean.transpose();
    Eigen::JacobiSVD<Mat> svd(Xc, Eigen::ComputeThinV);
    p.basis = svd.matrixV().leftCols(2);
    return p;
}

}  // namespace atlasgraph::klein
