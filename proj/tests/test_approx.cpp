#include <gtest/gtest.h>

#include <random>

#include "atlasgraph/approx_primitives.hpp"
#include "atlasgraph/grassmann.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace atlasgraph;
using namespace atlasgraph::charts;
using namespace atlasgraph::geodesic;
using namespace fixture;

namespace {

using Rng = std::mt19937_64;

Vec random_vec(int n, Rng& rng, double half)
{
    std::uniform_real_distribution<double> u(-half, half);
    Vec v(n);
    for (int i = 0; i < n; ++i)
        v(i) = u(rng);
    return v;
}

QuadraticChart random_chart(int D, int d, Rng& rng, double curvature)
{
    Mat F = linalg::orthonormal_basis(grassmann::sample_gaussian(D, D, rng));
    QuadraticChart ch;
    ch.L = F.leftCols(d);
    ch.M = F.rightCols(D - d);
    ch.K = curvature * grassmann::sample_gaussian(D - d, d * d, rng);
    symmetrize_rows(ch.K, d);
    ch.c = grassmann::sample_gaussian(D, 1, rng);
    ch.a = Vec::Zero(D - d);
    ch.radius = 1.0;
    return ch;
}

}  // namespace

TEST(NaiveDistance, MatchesQuadratureOnRandomCharts)
{
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = trial % 4 == 0 ? 3 : 2;
        QuadraticChart ch = random_chart(7, d, rng, 1.0);
        Vec xi0 = random_vec(d, rng, 0.8), xi1 = random_vec(d, rng, 0.8);
        double closed = naive_distance(ch, xi0, xi1);
        double quad = oracle::chart_path_length(ch.L, ch.M, ch.K, xi0, xi1);
        EXPECT_NEAR(closed / quad, 1.0, 1e-8) << "trial " << trial;
    }
}

TEST(NaiveDistance, FlatChartGivesEuclideanLength)
{
    Rng rng(2);
    QuadraticChart ch = random_chart(5, 2, rng, 0.0);
    Vec xi0 = random_vec(2, rng, 1.0), xi1 = random_vec(2, rng, 1.0);
    EXPECT_NEAR(naive_distance(ch, xi0, xi1), (xi1 - xi0).norm(), 1e-14);
    EXPECT_EQ(naive_distance(ch, xi0, xi0), 0.0);
}

TEST(NaiveDistance, ConstantSpeedCase)
{
    // K_j (xi1 - xi0) orthogonal to xi1 - xi0 makes both curvature moments equal
    QuadraticChart ch;
    ch.L = Mat::Zero(3, 2);
    ch.L(0, 0) = ch.L(1, 1) = 1.0;
    ch.M = Mat::Zero(3, 1);
    ch.M(2, 0) = 1.0;
    ch.K = Mat::Zero(1, 4);
    ch.K(0, 1) = ch.K(0, 2) = 1.0;
    ch.c = Vec::Zero(3);
    ch.a = Vec::Zero(1);
    Vec xi0(2), xi1(2);
    xi0 << -0.2, 0.4;
    xi1 << 0.5, 0.4;
    NaiveTerms t = naive_terms(ch, xi0, xi1);
    EXPECT_EQ(t.S, 0.0);
    EXPECT_EQ(t.mu00, t.mu01);
    double quad = oracle::chart_path_length(ch.L, ch.M, ch.K, xi0, xi1);
    EXPECT_NEAR(naive_distance_from_terms(t), quad, 1e-12);
    EXPECT_NEAR(naive_distance_from_terms(t), std::sqrt(t.lambda + t.mu00), 1e-15);
}

TEST(NaiveDistance, LinearSpeedSquaredCase)
{
    for (double B : {-0.3, 0.2, 1.5}) {
        // S = 0 with mu01 != mu00; only reachable from raw moments
        double lambda = 0.7, mu00 = 0.4;
        double mu01 = mu00 + B;
        double mu11 = 2.0 * mu01 - mu00;
        NaiveTerms t = naive_terms_from_moments(lambda, mu00, mu01, mu11);
        ASSERT_EQ(t.S, 0.0);
        double quad = oracle::integrate01([&](double s) { return std::sqrt(t.C + 2.0 * t.B * s); });
        EXPECT_NEAR(naive_distance_from_terms(t) / quad, 1.0, 1e-12);
    }
}

TEST(NaiveDistance, NearlyConstantSpeedStaysAccurate)
{
    for (double scale : {1e-4, 1e-8, 1e-12}) {
        NaiveTerms t;
        Vec k0(2), k1(2);
        k0 << 0.3, -0.2;
        k1 = k0;
        k1(0) += scale;
        double lambda = 0.5;
        t.lambda = lambda;
        t.mu00 = k0.squaredNorm();
        t.mu01 = k0.dot(k1);
        t.mu11 = k1.squaredNorm();
        t.S = (k1 - k0).squaredNorm();
        t.B = k0.dot(k1 - k0);
        t.C = lambda + t.mu00;
        Vec dk = k1 - k0;
        double cross = k0(0) * dk(1) - k0(1) * dk(0);
        t.D = lambda * t.S + cross * cross;
        double quad = oracle::integrate01([&](double s) {
            Vec k = (1 - s) * k0 + s * k1;
            return std::sqrt(lambda + k.squaredNorm());
        });
        EXPECT_NEAR(naive_distance_from_terms(t) / quad, 1.0, 1e-10);
    }
}

TEST(NaiveDistance, NeverShorterThanChord)
{
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        QuadraticChart ch = random_chart(6, 2, rng, 2.0);
        Vec xi0 = random_vec(2, rng, 1.0), xi1 = random_vec(2, rng, 1.0);
        double chord = (embed(ch, xi0) - embed(ch, xi1)).norm();
        EXPECT_GE(naive_distance(ch, xi0, xi1), chord * (1 - 1e-12));
    }
}

TEST(DenseGraph, DiscGridHasTwentyOneVertices)
{
    DenseGraph g = build_dense_graph(single_plane(0.25), 0.1, 0.15);
    EXPECT_EQ(g.size(), 21);
    // grid neighbours at spacing 0.1 and diagonals at 0.141 are joined
    for (int u = 0; u < g.size(); ++u)
        for (const Edge& e : g.adj[u]) {
            EXPECT_NEAR(e.w, (g.vertices[u].x - g.vertices[e.to].x).norm(), 1e-14);
            EXPECT_LT(e.w, 0.15);
        }
    EXPECT_TRUE(is_connected(g));
}

TEST(DenseGraph, EdgesAreExactlyThePairsBelowEps)
{
    DenseGraph g = build_dense_graph(single_plane(0.55), 0.1, 0.25);
    size_t expected = 0;
    for (int u = 0; u < g.size(); ++u)
        for (int v = u + 1; v < g.size(); ++v)
            expected += (g.vertices[u].x - g.vertices[v].x).norm() < 0.25;
    EXPECT_EQ(g.edge_count(), expected);
    for (int u = 0; u < g.size(); ++u)
        for (const Edge& e : g.adj[u]) {
            bool back = false;
            for (const Edge& f : g.adj[e.to])
                back |= f.to == u && f.w == e.w;
            EXPECT_TRUE(back);
        }
}

TEST(DenseGraph, EmptyGraphThrows)
{
    QuadraticAtlas a = single_plane(0.25);
    a.quartics[0].a0 = 1.0;
    EXPECT_THROW(build_dense_graph(a, 0.1, 0.2), GraphError);
}

TEST(DenseGraph, NearestIndexMatchesLinearScan)
{
    DenseGraph g = build_dense_graph(single_plane(1.0), 0.1, 0.15);
    Rng rng(4);
    for (int q = 0; q < 500; ++q) {
        Vec x = random_vec(3, rng, 1.3);
        int a = g.nearest_vertex(x), b = nearest_vertex_linear(g, x);
        EXPECT_NEAR((g.vertices[a].x - x).norm(), (g.vertices[b].x - x).norm(), 0.0);
    }
    for (int v = 0; v < g.size(); v += 7)
        EXPECT_EQ(g.nearest_vertex(g.vertices[v].x), v);
}

TEST(Dijkstra, MatchesFloydWarshall)
{
    Rng rng(5);
    std::uniform_real_distribution<double> w(0.1, 2.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const int n = 30;
    std::vector<std::vector<Edge>> adj(n);
    std::vector<std::vector<double>> D(n, std::vector<double>(n, std::numeric_limits<double>::infinity()));
    for (int i = 0; i < n; ++i)
        D[i][i] = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (coin(rng) < 0.15) {
                double x = w(rng);
                adj[i].push_back({j, x});
                adj[j].push_back({i, x});
                D[i][j] = D[j][i] = x;
            }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                D[i][j] = std::min(D[i][j], D[i][k] + D[k][j]);
    for (int s = 0; s < n; ++s) {
        ShortestPaths sp = dijkstra(adj, s);
        for (int t = 0; t < n; ++t) {
            if (std::isinf(D[s][t]))
                EXPECT_TRUE(std::isinf(sp.dist[t]));
            else
                EXPECT_NEAR(sp.dist[t], D[s][t], 1e-12);
        }
    }
}

TEST(Dijkstra, TiesResolveToLowerIds)
{
    // two equal routes 0-1-3 and 0-2-3
    std::vector<std::vector<Edge>> adj(4);
    auto link = [&](int a, int b) {
        adj[a].push_back({b, 1.0});
        adj[b].push_back({a, 1.0});
    };
    link(0, 2);
    link(2, 3);
    link(0, 1);
    link(1, 3);
    ShortestPaths sp = dijkstra(adj, 0);
    EXPECT_EQ(extract_path(sp, 0, 3), (std::vector<int>{0, 1, 3}));
}

TEST(ApproxLog, SamePointGivesZero)
{
    QuadraticAtlas a = single_plane(1.0);
    DenseGraph g = build_dense_graph(a, 0.1, 0.15);
    Vec xi(2);
    xi << 0.13, -0.4;
    RepresentativePoint p{ChartId{0}, xi};
    EXPECT_EQ(approx_riemannian_log(a, g, p, p).tau, Vec::Zero(2));
}

TEST(ApproxLog, SingleFlatChartGivesCoordinateDifference)
{
    QuadraticAtlas a = single_plane(1.0);
    DenseGraph g = build_dense_graph(a, 0.1, 0.15);
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        RepresentativePoint p{ChartId{0}, random_vec(2, rng, 0.6)};
        RepresentativePoint q{ChartId{0}, random_vec(2, rng, 0.6)};
        RepresentativeTangent t = approx_riemannian_log(a, g, p, q);
        EXPECT_LT((t.tau - (q.xi - p.xi)).norm(), 1e-12);
    }
}

TEST(ApproxLog, PlanarTwoChartAtlasGivesGlobalDifference)
{
    QuadraticAtlas a = split_plane();
    DenseGraph g = build_dense_graph(a, 0.1, 0.25);
    ASSERT_TRUE(is_connected(g));
    Rng rng(7);
    int crossings = 0;
    for (int trial = 0; trial < 30; ++trial) {
        Vec x(3), y(3);
        x << -0.6 + 0.3 * random_vec(1, rng, 1.0)(0), 0.3 * random_vec(1, rng, 1.0)(0), 0.0;
        y << 0.6 + 0.3 * random_vec(1, rng, 1.0)(0), 0.3 * random_vec(1, rng, 1.0)(0), 0.0;
        RepresentativePoint p = a.locate(x);
        RepresentativePoint q = a.locate(y);
        crossings += p.chart != q.chart;
        RepresentativeTangent t = approx_riemannian_log(a, g, p, q);
        Vec ambient = a.chart(p.chart).L * t.tau;
        EXPECT_LT((ambient - (y - x)).norm(), 1e-6);
    }
    EXPECT_GT(crossings, 20);
}

TEST(GraphTransport, FlatAtlasPreservesAmbientVector)
{
    QuadraticAtlas a = split_plane();
    DenseGraph g = build_dense_graph(a, 0.1, 0.25);
    Vec x(3), y(3);
    x << -0.7, 0.1, 0.0;
    y << 0.8, -0.2, 0.0;
    RepresentativePoint p = a.locate(x), q = a.locate(y);
    ASSERT_NE(p.chart, q.chart);
    Vec tau(2);
    tau << 0.3, -1.1;
    RepresentativeTangent moved = graph_transport(a, g, p, {p.chart, tau}, q);
    EXPECT_LT((a.chart(q.chart).L * moved.tau - a.chart(p.chart).L * tau).norm(), 1e-12);
}

TEST(GraphDistance, BoundedByChordAndZeroOnSelf)
{
    QuadraticAtlas a = split_plane();
    DenseGraph g = build_dense_graph(a, 0.1, 0.25);
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        Vec x = Vec::Zero(3), y = Vec::Zero(3);
        x.head(2) = random_vec(2, rng, 0.8);
        y.head(2) = random_vec(2, rng, 0.8);
        EXPECT_GE(graph_distance(g, x, y), (x - y).norm() - 1e-12);
        EXPECT_EQ(graph_distance(g, x, x), 0.0);
    }
}
