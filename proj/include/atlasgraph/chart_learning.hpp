#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "atlasgraph/core.hpp"
#include "atlasgraph/linalg.hpp"
#include "atlasgraph/stats.hpp"

namespace atlasgraph::charts {

// Second-order chart x = 1/2 M K (xi (x) xi) + L xi + c + M a.
// L and M are orthonormal and complementary; every row of K is a symmetric
// d x d block in row-major order.
struct QuadraticChart {
    int id = 0;
    Vec c;
    Mat L;
    Mat M;
    Mat K;
    Vec a;
    double radius = 0.0;

    int dim() const { return static_cast<int>(L.cols()); }
    int ambient_dim() const { return static_cast<int>(L.rows()); }
};

struct QuadraticFit {
    QuadraticChart chart;
    Vec normal_offset;  // fitted constant normal term, folded into chart.c
    int neighbours = 0;
    double median_residual = 0.0;
    double max_residual = 0.0;
};

inline constexpr double kFitRidge = 1e-8;

inline Vec normal_curvature(const QuadraticChart& ch, const Vec& xi)
{
    return 0.5 * (ch.K * linalg::kron(xi, xi));
}

inline Vec embed(const QuadraticChart& ch, const Vec& xi)
{
    Vec x = ch.L * xi + ch.c;
    if (ch.M.cols() > 0)
        x += ch.M * (normal_curvature(ch, xi) + ch.a);
    return x;
}

inline Vec embed_without_offset(const QuadraticChart& ch, const Vec& xi)
{
    Vec x = ch.L * xi + ch.c;
    if (ch.M.cols() > 0)
        x += ch.M * normal_curvature(ch, xi);
    return x;
}

inline Vec project_to_chart(const QuadraticChart& ch, const Vec& x)
{
    return ch.L.transpose() * (x - ch.c);
}

inline double residual(const QuadraticChart& ch, const Vec& x)
{
    return (x - embed(ch, project_to_chart(ch, x))).norm();
}

// Column j is L e_j + 1/2 M K (xi (x) e_j + e_j (x) xi).
inline Mat differential(const QuadraticChart& ch, const Vec& xi)
{
    const int d = ch.dim();
    Mat J = ch.L;
    if (ch.M.cols() == 0)
        return J;
    Mat dz = Mat::Zero(static_cast<Eigen::Index>(d) * d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) {
            dz(i * d + j, j) += xi(i);
            dz(j * d + i, j) += xi(i);
        }
    J += 0.5 * ch.M * (ch.K * dz);
    return J;
}

// Symmetrises each row of K viewed as a d x d block.
inline void symmetrize_rows(Mat& K, int d)
{
    for (Eigen::Index r = 0; r < K.rows(); ++r)
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                double m = 0.5 * (K(r, i * d + j) + K(r, j * d + i));
                K(r, i * d + j) = m;
                K(r, j * d + i) = m;
            }
}

// Least-squares second-order chart around the mean of the points within
// radius r of center. Rows of points are ambient samples.
inline QuadraticFit fit_local_quadratic(const Mat& points, const Vec& center, double r, int d, int id = 0)
{
    const int D = static_cast<int>(points.cols());
    if (center.size() != D)
        throw DimensionMismatch("fit_local_quadratic: center has wrong dimension");
    if (d < 1 || d > D)
        throw DimensionMismatch("fit_local_quadratic: chart dimension out of range");
    std::vector<int> nb;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        if ((points.row(i).transpose() - center).norm() < r)
            nb.push_back(static_cast<int>(i));
    const int N = static_cast<int>(nb.size());
    const int terms = 1 + d * d;
    if (N < d + 1 + d * (d + 1) / 2)
        throw DegenerateMetric("fit_local_quadratic: too few neighbours for a quadratic fit");
    Mat X(N, D);
    for (int i = 0; i < N; ++i)
        X.row(i) = points.row(nb[i]);
    Vec mean = X.colwise().mean().transpose();
    Mat Xc = X.rowwise() - mean.transpose();
    Mat cov = (Xc.transpose() * Xc) / static_cast<double>(N);
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    // eigenvalues ascending; reverse for the frame
    Mat V = es.eigenvectors().rowwise().reverse();
    QuadraticFit fit;
    QuadraticChart& ch = fit.chart;
    ch.id = id;
    ch.radius = r;
    ch.L = V.leftCols(d);
    ch.M = V.rightCols(D - d);
    Mat tau = Xc * ch.L;
    Mat nu = Xc * ch.M;
    Mat T(N, terms);
    for (int i = 0; i < N; ++i) {
        Vec t = tau.row(i).transpose();
        T(i, 0) = 1.0;
        T.row(i).tail(d * d) = linalg::kron(t, t).transpose();
    }
    Mat normal = T.transpose() * T + kFitRidge * Mat::Identity(terms, terms);
    Mat H = normal.ldlt().solve(T.transpose() * nu);
    fit.normal_offset = H.row(0).transpose();
    ch.K = 2.0 * H.bottomRows(d * d).transpose();
    symmetrize_rows(ch.K, d);
    ch.c = mean + ch.M * fit.normal_offset;
    ch.a = Vec::Zero(D - d);
    fit.neighbours = N;
    std::vector<double> res(N);
    for (int i = 0; i < N; ++i)
        res[i] = residual(ch, X.row(i).transpose());
    fit.median_residual = stats::median(res);
    fit.max_residual = *std::max_element(res.begin(), res.end());
    return fit;
}

// Index of the chart with the smallest residual; ties go to the lowest index.
inline int assign_membership(const std::vector<QuadraticChart>& charts, const Vec& x)
{
    if (charts.empty())
        throw DimensionMismatch("assign_membership: no charts");
    int best = 0;
    double best_r = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < charts.size(); ++i) {
        double r = residual(charts[i], x);
        if (r < best_r) {
            best_r = r;
            best = static_cast<int>(i);
        }
    }
    return best;
}

// Re-expresses a point of chart a in chart b through the ambient image. The
// normal offset term of chart a is not applied.
inline Vec transition_map(const QuadraticChart& a, const QuadraticChart& b, const Vec& xi)
{
    return b.L.transpose() * (embed_without_offset(a, xi) - b.c);
}

// tau_b = pinv(J_b) J_a tau_a.
inline Vec cross_chart_transport(const QuadraticChart& a, const Vec& xi_a, const QuadraticChart& b,
                                 const Vec& xi_b, const Vec& tau)
{
    Mat Jb = differential(b, xi_b);
    Mat G = pullback_metric(Jb);
    Vec v = differential(a, xi_a) * tau;
    return G.ldlt().solve(Jb.transpose() * v);
}

}  // namespace atlasgraph::charts
