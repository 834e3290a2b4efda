#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "atlasgraph/linalg.hpp"

namespace atlasgraph::grassmann {

using Rng = std::mt19937_64;

inline constexpr double kChartConditionLimit = 1e12;
inline constexpr double kReorthTol = 1e-8;

inline Mat sample_gaussian(int rows, int cols, Rng& rng)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat G(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            G(i, j) = nd(rng);
    return G;
}

// Haar-distributed point on Gr(n, k), returned as an orthonormal n x k frame.
inline Mat sample_uniform(int n, int k, Rng& rng)
{
    if (k < 1 || k >= n)
        throw DimensionMismatch("sample_uniform: need 0 < k < n");
    return linalg::orthonormal_basis(sample_gaussian(n, k, rng));
}

inline double delta_max(int n, int k)
{
    return 0.5 * M_PI * std::sqrt(static_cast<double>(std::max(k, n - k)));
}

// Principal angles in ascending order. Cosines and sines are computed from
// separate SVDs and paired, so small angles keep full relative accuracy.
inline Vec principal_angles(const Mat& X, const Mat& Y)
{
    if (X.rows() != Y.rows() || X.cols() != Y.cols())
        throw DimensionMismatch("principal_angles: frames have different shapes");
    Mat Qx = linalg::orthonormal_basis(X);
    Mat Qy = linalg::orthonormal_basis(Y);
    Mat C = Qx.transpose() * Qy;
    Vec cosv = Eigen::JacobiSVD<Mat>(C).singularValues();  // descending
    Mat S = Qy - Qx * C;
    Vec sinv = Eigen::JacobiSVD<Mat>(S).singularValues();  // descending
    const Eigen::Index k = cosv.size();
    Vec theta(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        double c = linalg::clamp_unit(cosv(i));
        double s = linalg::clamp_unit(sinv(k - 1 - i));
        theta(i) = std::atan2(s, c);
    }
    return theta;
}

inline double distance(const Mat& X, const Mat& Y)
{
    return principal_angles(X, Y).norm();
}

// Permutation pi with pi(j) = idx[j] for j < k, then the remaining rows in
// increasing order. perm[j] is the row that column j of P_idx selects.
inline std::vector<int> full_permutation(int n, const std::vector<int>& idx)
{
    std::vector<char> used(n, 0);
    std::vector<int> perm;
    perm.reserve(n);
    for (int i : idx) {
        if (i < 0 || i >= n || used[i])
            throw DimensionMismatch("full_permutation: invalid chart indices");
        used[i] = 1;
        perm.push_back(i);
    }
    for (int i = 0; i < n; ++i)
        if (!used[i])
            perm.push_back(i);
    return perm;
}

inline Mat permutation_matrix(int n, const std::vector<int>& idx)
{
    std::vector<int> perm = full_permutation(n, idx);
    Mat P = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j)
        P(perm[j], j) = 1.0;
    return P;
}

// 0-based indices of the k largest diagonal entries of the projector onto
// colspan(X), returned in increasing order. Ties go to the lower index.
inline std::vector<int> identify_chart(const Mat& X)
{
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(X.cols());
    Mat Q = linalg::orthonormal_basis(X);
    Vec diag = Q.rowwise().squaredNorm();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return diag(a) > diag(b); });
    std::vector<int> idx(order.begin(), order.begin() + k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline Mat select_rows(const Mat& X, const std::vector<int>& perm, int begin, int end)
{
    Mat out(end - begin, X.cols());
    for (int r = begin; r < end; ++r)
        out.row(r - begin) = X.row(perm[r]);
    return out;
}

// A = X_L X_U^{-1} for the Ehresmann chart with the given indices.
inline Mat ingest(const Mat& X, const std::vector<int>& idx)
{
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(X.cols());
    if (static_cast<int>(idx.size()) != k)
        throw DimensionMismatch("ingest: index count must equal k");
    std::vector<int> perm = full_permutation(n, idx);
    Mat XU = select_rows(X, perm, 0, k);
    Mat XL = select_rows(X, perm, k, n);
    Eigen::PartialPivLU<Mat> lu(XU.transpose());
    if (!(lu.rcond() * kChartConditionLimit > 1.0))
        throw NotInChart("ingest: upper block is too ill conditioned for this chart");
    return lu.solve(XL.transpose()).transpose();
}

// Orthogonal Q_A whose leading k columns span (I; A).
inline Mat qa_from_a(const Mat& A)
{
    const int nk = static_cast<int>(A.rows());
    const int k = static_cast<int>(A.cols());
    Mat Sk = linalg::inv_sqrtm_spd(Mat::Identity(k, k) + A.transpose() * A);
    Mat Snk = linalg::inv_sqrtm_spd(Mat::Identity(nk, nk) + A * A.transpose());
    Mat Q(nk + k, nk + k);
    Q.topLeftCorner(k, k) = Sk;
    Q.topRightCorner(k, nk) = -A.transpose() * Snk;
    Q.bottomLeftCorner(nk, k) = A * Sk;
    Q.bottomRightCorner(nk, nk) = Snk;
    return Q;
}

struct EhresmannChart {
    int n = 0;
    int k = 0;
    std::vector<int> indices;
    Mat Q;  // n x n orthogonal frame
    bool identity_frame = true;
};

inline EhresmannChart identity_chart(int n, std::vector<int> idx)
{
    EhresmannChart c;
    c.n = n;
    c.k = static_cast<int>(idx.size());
    c.indices = std::move(idx);
    c.Q = Mat::Identity(n, n);
    c.identity_frame = true;
    return c;
}

// Y = Q P (I; A), an n x k frame of the point with coordinates A.
inline Mat chart_point(const EhresmannChart& chart, const Mat& A)
{
    std::vector<int> perm = full_permutation(chart.n, chart.indices);
    Mat stacked(chart.n, chart.k);
    stacked.topRows(chart.k).setIdentity();
    stacked.bottomRows(chart.n - chart.k) = A;
    Mat PY = Mat::Zero(chart.n, chart.k);
    for (int j = 0; j < chart.n; ++j)
        PY.row(perm[j]) = stacked.row(j);
    if (chart.identity_frame)
        return PY;
    return chart.Q * PY;
}

inline Mat reconstruct_projector(const EhresmannChart& chart, const Mat& A)
{
    return linalg::colproj(chart_point(chart, A));
}

// Coordinates of colspan(X) in a general chart frame.
inline Mat ingest_in_chart(const EhresmannChart& chart, const Mat& X)
{
    if (chart.identity_frame)
        return ingest(X, chart.indices);
    return ingest(chart.Q.transpose() * X, chart.indices);
}

// Re-centres the atlas at the point with coordinates A. The new frame is
// P_new Q_A P_new^T built from the new permutation, and the point becomes A = 0.
inline EhresmannChart atlas_transition(const EhresmannChart& chart, const Mat& A)
{
    Mat Y = chart_point(chart, A);
    std::vector<int> new_idx = identify_chart(Y);
    Mat At = ingest(Y, new_idx);
    Mat P = permutation_matrix(chart.n, new_idx);
    EhresmannChart out;
    out.n = chart.n;
    out.k = chart.k;
    out.indices = std::move(new_idx);
    out.Q = P * qa_from_a(At) * P.transpose();
    out.identity_frame = false;
    if (linalg::orthogonality_residual(out.Q) > kReorthTol) {
        Eigen::HouseholderQR<Mat> qr(out.Q);
        Mat Qn = qr.householderQ();
        // keep column orientation of the unorthonormalised frame
        for (int j = 0; j < Qn.cols(); ++j)
            if (Qn.col(j).dot(out.Q.col(j)) < 0.0)
                Qn.col(j) *= -1.0;
        out.Q = Qn;
    }
    return out;
}

struct FrechetState {
    EhresmannChart chart;
    Mat A;
    Mat QU;  // columns of Q at the chart indices
    Mat QL;  // remaining columns, increasing order
    long count = 0;
    int transitions = 0;
};

inline void refresh_frame_blocks(FrechetState& s)
{
    if (s.chart.identity_frame) {
        s.QU.resize(0, 0);
        s.QL.resize(0, 0);
        return;
    }
    std::vector<int> perm = full_permutation(s.chart.n, s.chart.indices);
    s.QU.resize(s.chart.n, s.chart.k);
    s.QL.resize(s.chart.n, s.chart.n - s.chart.k);
    for (int j = 0; j < s.chart.k; ++j)
        s.QU.col(j) = s.chart.Q.col(perm[j]);
    for (int j = s.chart.k; j < s.chart.n; ++j)
        s.QL.col(j - s.chart.k) = s.chart.Q.col(perm[j]);
}

inline void maybe_transition(FrechetState& s)
{
    if (s.A.size() && s.A.cwiseAbs().maxCoeff() >= 1.0) {
        s.chart = atlas_transition(s.chart, s.A);
        s.A = Mat::Zero(s.chart.n - s.chart.k, s.chart.k);
        refresh_frame_blocks(s);
        ++s.transitions;
    }
}

inline FrechetState frechet_init(const Mat& X1)
{
    FrechetState s;
    s.chart = identity_chart(static_cast<int>(X1.rows()), identify_chart(X1));
    s.A = ingest(X1, s.chart.indices);
    s.count = 1;
    maybe_transition(s);
    return s;
}

inline Mat frechet_ingest(const FrechetState& s, const Mat& X)
{
    if (s.chart.identity_frame)
        return ingest(X, s.chart.indices);
    Mat C = s.QU.transpose() * X;
    Mat B = s.QL.transpose() * X;
    Eigen::PartialPivLU<Mat> lu(C.transpose());
    if (!(lu.rcond() * kChartConditionLimit > 1.0))
        throw NotInChart("frechet_stream_step: sample is not representable in the current chart");
    return lu.solve(B.transpose()).transpose();
}

// Running Euclidean mean in chart coordinates with ad hoc re-centring.
inline void frechet_stream_step(FrechetState& s, const Mat& X)
{
    Mat At = frechet_ingest(s, X);
    ++s.count;
    s.A += (At - s.A) / static_cast<double>(s.count);
    maybe_transition(s);
}

inline Mat frechet_estimate(const FrechetState& s)
{
    return linalg::orthonormal_basis(chart_point(s.chart, s.A));
}

struct TangentSvd {
    Mat U;
    Vec sigma;
    Mat V;
};

inline TangentSvd thin_svd(const Mat& M)
{
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return TangentSvd{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

// Returns the SVD of (I - X X^+) Y (X^T Y)^{-1}; X need not be orthonormal.
inline TangentSvd gifee_log(const Mat& X, const Mat& Y)
{
    Mat XtX = X.transpose() * X;
    Mat XtY = X.transpose() * Y;
    Eigen::PartialPivLU<Mat> lu(XtY.transpose());
    if (!(lu.rcond() * kChartConditionLimit > 1.0))
        throw NotInChart("gifee_log: X^T Y is singular");
    Mat resid = Y - X * XtX.ldlt().solve(XtY);
    Mat T = lu.solve(resid.transpose()).transpose();
    return thin_svd(T);
}

inline Mat gifee_exp(const Mat& X, const TangentSvd& log, double i)
{
    Vec theta = log.sigma.array().atan();
    Vec c = (theta / i).array().cos();
    Vec s = (theta / i).array().sin();
    Mat Z = X * log.V * c.asDiagonal() + log.U * s.asDiagonal();
    return linalg::orthonormal_basis(Z);
}

inline Mat manopt_log(const Mat& X, const Mat& Y)
{
    TangentSvd t = gifee_log(X, Y);
    Vec theta = t.sigma.array().atan();
    return t.U * theta.asDiagonal() * t.V.transpose();
}

// Geodesic step X -> Exp_X(L / i) for orthonormal X and horizontal L.
inline Mat manopt_exp(const Mat& X, const Mat& L, double i = 1.0)
{
    TangentSvd t = thin_svd(L / i);
    Vec c = t.sigma.array().cos();
    Vec s = t.sigma.array().sin();
    Mat Z = X * t.V * c.asDiagonal() * t.V.transpose() + t.U * s.asDiagonal() * t.V.transpose();
    return linalg::orthonormal_basis(Z);
}

inline Mat manopt_ret(const Mat& X, const Mat& L, double i = 1.0)
{
    TangentSvd t = thin_svd(X + L / i);
    return linalg::orthonormal_basis(t.U * t.V.transpose());
}

inline Mat opca_step(const Mat& W, const Vec& x, double eta)
{
    return linalg::orthonormal_basis(W + eta * x * (x.transpose() * W));
}

inline Mat opca_block_step(const Mat& W, const Mat& X, double eta)
{
    return linalg::orthonormal_basis(W + eta * X * (X.transpose() * W));
}

// Geodesic power distribution around a pole: Y' = Exp_X((d/d_max)^p Log_X Y)
// with Y uniform and d = dist(X, Y). Draws with an undefined log are redrawn.
inline Mat sample_gpd(const Mat& center, double p, Rng& rng, int max_redraws = 1000)
{
    const int n = static_cast<int>(center.rows());
    const int k = static_cast<int>(center.cols());
    const double dmax = delta_max(n, k);
    for (int attempt = 0; attempt < max_redraws; ++attempt) {
        Mat Y = sample_uniform(n, k, rng);
        Mat L;
        try {
            L = manopt_log(center, Y);
        } catch (const NotInChart&) {
            continue;
        }
        double d = L.norm();
        double scale = std::pow(d / dmax, p);
        return manopt_exp(center, scale * L, 1.0);
    }
    throw ConvergenceError("sample_gpd: could not draw a sample with a defined log");
}

// Horizontal lift of the chart tangent tau at A, expressed at the orthonormal
// frame returned in X_out.
inline Mat horizontal_lift(const EhresmannChart& chart, const Mat& A, const Mat& tau, Mat& X_out)
{
    Mat Y = chart_point(chart, A);
    Mat Z = Mat::Zero(chart.n - chart.k, chart.k);
    Mat dY = chart_point(chart, Z + tau) - chart_point(chart, Z);
    Eigen::HouseholderQR<Mat> qr(Y);
    Mat X = qr.householderQ() * Mat::Identity(chart.n, chart.k);
    Mat R = X.transpose() * Y;
    Mat proj = dY - X * (X.transpose() * dY);
    X_out = X;
    return R.transpose().partialPivLu().solve(proj.transpose()).transpose();
}

// Distance between the chart step A + tau and the geodesic leaving the same
// point with the same initial velocity.
inline double retraction_error(const EhresmannChart& chart, const Mat& A, const Mat& tau)
{
    Mat X;
    Mat D = horizontal_lift(chart, A, tau, X);
    Mat exact = manopt_exp(X, D, 1.0);
    return distance(chart_point(chart, A + tau), exact);
}

// Random chart frame: Q_A of a random coordinate block, conjugated by the
// permutation of random indices.
inline EhresmannChart random_chart(int n, int k, Rng& rng)
{
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> idx(all.begin(), all.begin() + k);
    std::sort(idx.begin(), idx.end());
    Mat P = permutation_matrix(n, idx);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    Mat A0(n - k, k);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < n - k; ++i)
            A0(i, j) = u(rng);
    EhresmannChart c;
    c.n = n;
    c.k = k;
    c.indices = idx;
    c.Q = P * qa_from_a(A0) * P.transpose();
    c.identity_frame = false;
    return c;
}

}  // namespace atlasgraph::grassmann
