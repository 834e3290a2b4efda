#include <gtest/gtest.h>

#include <random>

#include "atlasgraph/atlas.hpp"
#include "atlasgraph/grassmann.hpp"
#include "oracles.hpp"

using namespace atlasgraph;
using namespace atlasgraph::charts;

namespace {

using Rng = std::mt19937_64;

Mat orthonormal(int n, Rng& rng)
{
    return linalg::orthonormal_basis(grassmann::sample_gaussian(n, n, rng));
}

QuadraticChart random_chart(int D, int d, Rng& rng, double curvature = 1.0)
{
    Mat F = orthonormal(D, rng);
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

Vec random_vec(int n, Rng& rng, double half)
{
    std::uniform_real_distribution<double> u(-half, half);
    Vec v(n);
    for (int i = 0; i < n; ++i)
        v(i) = u(rng);
    return v;
}

}  // namespace

TEST(Embed, CentreIncludesNormalOffset)
{
    Rng rng(1);
    QuadraticChart ch = random_chart(5, 2, rng);
    ch.a = random_vec(3, rng, 1.0);
    Vec x0 = embed(ch, Vec::Zero(2));
    EXPECT_LT((x0 - (ch.c + ch.M * ch.a)).norm(), 1e-14);
    EXPECT_LT((embed_without_offset(ch, Vec::Zero(2)) - ch.c).norm(), 1e-14);
}

TEST(Embed, ProjectionInvertsEmbedding)
{
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        QuadraticChart ch = random_chart(7, 3, rng);
        Vec xi = random_vec(3, rng, 0.7);
        Vec x = embed(ch, xi);
        EXPECT_LT((project_to_chart(ch, x) - xi).norm(), 1e-12);
        EXPECT_LT(residual(ch, x), 1e-12);
    }
}

TEST(Embed, DifferentialMatchesFiniteDifferences)
{
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        QuadraticChart ch = random_chart(6, 2, rng);
        Vec xi = random_vec(2, rng, 0.8);
        Mat J = differential(ch, xi);
        const double h = 1e-6;
        for (int j = 0; j < 2; ++j) {
            Vec e = Vec::Zero(2);
            e(j) = h;
            Vec fd = (embed(ch, xi + e) - embed(ch, xi - e)) / (2 * h);
            EXPECT_LT((fd - J.col(j)).norm(), 1e-8);
        }
    }
}

TEST(Fit, RecoversExactQuadraticChart)
{
    Rng rng(4);
    const int D = 5, d = 2;
    QuadraticChart truth = random_chart(D, d, rng, 0.5);
    // symmetric grid so odd moments vanish
    std::vector<Vec> pts;
    for (int i = -6; i <= 6; ++i)
        for (int j = -6; j <= 6; ++j) {
            Vec xi(2);
            xi << 0.05 * i, 0.05 * j;
            if (xi.norm() <= 0.3)
                pts.push_back(embed(truth, xi));
        }
    Mat P(static_cast<int>(pts.size()), D);
    for (size_t i = 0; i < pts.size(); ++i)
        P.row(i) = pts[i].transpose();
    QuadraticFit fit = fit_local_quadratic(P, truth.c, 10.0, d);
    EXPECT_EQ(fit.neighbours, static_cast<int>(pts.size()));
    for (const Vec& x : pts)
        EXPECT_LT(residual(fit.chart, x), 1e-6);
    EXPECT_LT(fit.max_residual, 1e-6);
    // the tangent frame agrees up to rotation
    EXPECT_LT((fit.chart.L * fit.chart.L.transpose() - truth.L * truth.L.transpose()).norm(), 1e-6);
}

TEST(Fit, NeighboursOnlyWithinRadius)
{
    Rng rng(5);
    Mat P = grassmann::sample_gaussian(400, 3, rng);
    Vec c = Vec::Zero(3);
    QuadraticFit fit = fit_local_quadratic(P, c, 1.0, 2);
    int expected = 0;
    for (int i = 0; i < P.rows(); ++i)
        expected += P.row(i).norm() < 1.0;
    EXPECT_EQ(fit.neighbours, expected);
    EXPECT_LT((fit.chart.L.transpose() * fit.chart.M).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fit, TooFewNeighboursThrows)
{
    Mat P = Mat::Zero(3, 4);
    P(1, 0) = 0.1;
    P(2, 1) = 0.1;
    EXPECT_THROW(fit_local_quadratic(P, Vec::Zero(4), 1.0, 2), DegenerateMetric);
}

TEST(Membership, LowestResidualWinsAndTiesGoLow)
{
    Rng rng(6);
    QuadraticChart a = random_chart(4, 2, rng);
    QuadraticChart b = a;
    QuadraticChart far = random_chart(4, 2, rng);
    Vec x = embed(a, random_vec(2, rng, 0.3));
    EXPECT_EQ(assign_membership({a, b}, x), 0);
    EXPECT_EQ(assign_membership({far, b}, x), 1);
}

TEST(Transition, MatchesProjectionOfEmbedding)
{
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        QuadraticChart a = random_chart(6, 2, rng), b = random_chart(6, 2, rng);
        a.a = random_vec(4, rng, 0.5);
        Vec xi = random_vec(2, rng, 0.5);
        Vec expect = project_to_chart(b, embed_without_offset(a, xi));
        EXPECT_LT((transition_map(a, b, xi) - expect).norm(), 1e-13);
    }
}

TEST(Transition, SameFlatChartIsIdentity)
{
    Rng rng(8);
    QuadraticChart a = random_chart(5, 2, rng, 0.0);
    Vec xi = random_vec(2, rng, 1.0);
    EXPECT_LT((transition_map(a, a, xi) - xi).norm(), 1e-14);
    Vec tau = random_vec(2, rng, 1.0);
    EXPECT_LT((cross_chart_transport(a, xi, a, xi, tau) - tau).norm(), 1e-13);
}

TEST(Transport, CrossChartPreservesAmbientTangentWhenPlanesAgree)
{
    Rng rng(9);
    QuadraticChart a = random_chart(5, 2, rng, 0.0);
    QuadraticChart b = a;
    Mat R(2, 2);
    R << std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
    b.L = a.L * R;
    b.c = a.c + a.L * random_vec(2, rng, 1.0);
    Vec xi = random_vec(2, rng, 0.5);
    Vec tau = random_vec(2, rng, 1.0);
    Vec out = cross_chart_transport(a, xi, b, transition_map(a, b, xi), tau);
    EXPECT_LT((b.L * out - a.L * tau).norm(), 1e-12);
}

TEST(Transport, DegenerateTargetThrows)
{
    Rng rng(10);
    QuadraticChart a = random_chart(4, 2, rng);
    QuadraticChart b = a;
    b.L.col(1) = b.L.col(0);
    b.M = Mat::Zero(4, 0);
    b.K = Mat::Zero(0, 4);
    EXPECT_THROW(cross_chart_transport(a, Vec::Zero(2), b, Vec::Zero(2), Vec::Ones(2)), DegenerateMetric);
}

TEST(Svm, QuadraticKernelValue)
{
    Vec x(2), y(2);
    x << 1, 2;
    y << 3, -1;
    EXPECT_DOUBLE_EQ(svm::quadratic_kernel(x, y), 1.0 + 1.0);
    EXPECT_DOUBLE_EQ(svm::quadratic_kernel(x, x), 5.0 + 25.0);
}

TEST(Svm, MatchesBruteForceDualOnSmallProblems)
{
    Rng rng(11);
    std::uniform_int_distribution<int> size(4, 9);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = size(rng);
        Mat X = grassmann::sample_gaussian(n, 3, rng);
        Vec y(n);
        for (int i = 0; i < n; ++i)
            y(i) = (X.row(i).squaredNorm() > 2.5) ? 1.0 : -1.0;
        y(0) = 1.0;
        y(1) = -1.0;
        Mat K = svm::quadratic_gram(X);
        const double C = trial % 2 ? 10.0 : 0.5;
        svm::SmoResult r = svm::smo_solve(K, y, {C, 1e-5, 1000000});
        ASSERT_TRUE(r.converged);
        oracle::DualSolution best = oracle::brute_force_svm_dual(K, y, C);
        ASSERT_TRUE(best.found);
        double obj = svm::dual_objective(K, y, r.alpha);
        EXPECT_NEAR(obj, best.objective, 1e-6 * std::max(1.0, std::abs(best.objective)));
        EXPECT_LT(svm::kkt_violation(K, y, r.alpha, C), 1e-5);
        EXPECT_NEAR(y.dot(r.alpha), 0.0, 1e-10);
        EXPECT_GE(r.alpha.minCoeff(), 0.0);
        EXPECT_LE(r.alpha.maxCoeff(), C);
    }
}

TEST(Svm, SeparatesSphericalShell)
{
    Rng rng(12);
    Mat pts = grassmann::sample_gaussian(300, 3, rng);
    std::vector<int> in, out;
    for (int i = 0; i < pts.rows(); ++i) {
        double r = pts.row(i).norm();
        if (r < 0.8)
            in.push_back(i);
        else if (r > 1.2)
            out.push_back(i);
    }
    Mat pos(out.size(), 3), neg(in.size(), 3);
    for (size_t i = 0; i < out.size(); ++i)
        pos.row(i) = pts.row(out[i]);
    for (size_t i = 0; i < in.size(); ++i)
        neg.row(i) = pts.row(in[i]);
    Vec origin = Vec::Zero(3);
    origin(0) = 0.25;
    svm::SvmModel m = svm::train_boundary_svm(pos, neg, origin);
    ASSERT_TRUE(m.converged);
    int wrong = 0;
    for (int i = 0; i < pos.rows(); ++i)
        wrong += m.decision(pos.row(i).transpose()) <= 0;
    for (int i = 0; i < neg.rows(); ++i)
        wrong += m.decision(neg.row(i).transpose()) >= 0;
    EXPECT_EQ(wrong, 0);
}

TEST(Separator, TranslatedFormEqualsDecision)
{
    Rng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const int D = 4;
        svm::SvmModel m;
        m.support = grassmann::sample_gaussian(12, D, rng);
        m.coef = grassmann::sample_gaussian(12, 1, rng);
        m.bias = random_vec(1, rng, 2.0)(0);
        m.origin = random_vec(D, rng, 1.0);
        AmbientSeparator s = svm_to_quadratic(m);
        EXPECT_FALSE(s.extended);
        for (int j = 0; j < 10; ++j) {
            Vec x = random_vec(D, rng, 2.0);
            double f = m.decision(x);
            EXPECT_NEAR(s.value(x), f, 1e-9 * std::max(1.0, std::abs(f)));
        }
    }
}

TEST(Separator, SingularFormKeepsLinearTerm)
{
    svm::SvmModel m;
    m.support = Mat::Zero(1, 3);
    m.support(0, 0) = 1.0;
    m.coef = Vec::Ones(1);
    m.bias = -0.5;
    m.origin = Vec::Zero(3);
    m.support(0, 1) = 0.5;
    AmbientSeparator s = svm_to_quadratic(m);
    Vec x(3);
    x << 0.3, -0.7, 2.0;
    EXPECT_NEAR(s.value(x), m.decision(x), 1e-12);
    // a rank one form with its linear term in range has no residual part
    EXPECT_FALSE(s.extended);
    // equal and opposite rank one terms cancel in A but not in w
    svm::SvmModel m2 = m;
    m2.support = Mat::Zero(2, 3);
    m2.support(0, 0) = 1.0;
    m2.support(1, 0) = 2.0;
    m2.coef.resize(2);
    m2.coef << 1.0, -0.25;
    AmbientSeparator s2 = svm_to_quadratic(m2);
    EXPECT_TRUE(s2.extended);
    EXPECT_NEAR(s2.value(x), m2.decision(x), 1e-12);
}

TEST(Quartic, EqualsSeparatorOfEmbedding)
{
    Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const int D = 6, d = trial % 3 == 0 ? 3 : 2;
        QuadraticChart ch = random_chart(D, d, rng);
        ch.a = random_vec(D - d, rng, 0.3);
        AmbientSeparator s;
        Mat B = grassmann::sample_gaussian(D, D, rng);
        s.A = 0.5 * (B + B.transpose());
        s.shift = random_vec(D, rng, 1.0);
        s.c0 = random_vec(1, rng, 1.0)(0);
        s.extended = trial % 2 == 1;
        s.linear = s.extended ? random_vec(D, rng, 1.0) : Vec::Zero(D);
        BoundaryQuartic q = precompute_quartic(ch, s);
        for (int j = 0; j < 10; ++j) {
            Vec xi = random_vec(d, rng, 1.0);
            EXPECT_NEAR(q.value(xi), s.value(embed(ch, xi)), 1e-10);
        }
    }
}

TEST(Atlas, RejectsMixedDimensions)
{
    Rng rng(15);
    QuadraticAtlas atlas;
    atlas.ambient_dim = 5;
    atlas.manifold_dim = 2;
    atlas.charts = {random_chart(5, 2, rng), random_chart(5, 3, rng)};
    atlas.quartics.resize(2);
    EXPECT_THROW(atlas.validate(), DimensionMismatch);
}
