#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "atlasgraph/errors.hpp"

namespace atlasgraph {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace linalg {

// Symmetric square root through the eigendecomposition. Input must be SPD up
// to a relative eigenvalue floor.
inline Mat sqrtm_spd(const Mat& S, double rel_floor = 1e-14)
{
    if (S.rows() != S.cols())
        throw DimensionMismatch("sqrtm_spd: matrix is not square");
    if (S.size() == 0)
        return S;
    Mat sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    if (es.info() != Eigen::Success)
        throw NotSpd("sqrtm_spd: eigendecomposition failed");
    const Vec& ev = es.eigenvalues();
    double top = std::max(std::abs(ev.maxCoeff()), 1.0);
    if (ev.minCoeff() <= rel_floor * top)
        throw NotSpd("sqrtm_spd: matrix is not positive definite (min eigenvalue " +
                     std::to_string(ev.minCoeff()) + ")");
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

inline Mat inv_sqrtm_spd(const Mat& S, double rel_floor = 1e-14)
{
    Mat sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    if (es.info() != Eigen::Success)
        throw NotSpd("inv_sqrtm_spd: eigendecomposition failed");
    const Vec& ev = es.eigenvalues();
    double top = std::max(std::abs(ev.maxCoeff()), 1.0);
    if (ev.minCoeff() <= rel_floor * top)
        throw NotSpd("inv_sqrtm_spd: matrix is not positive definite");
    return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

// Orthonormal basis of colspan(X) via Householder QR; throws when X is rank
// deficient relative to tol.
inline Mat orthonormal_basis(const Mat& X, double tol = 1e-12)
{
    Eigen::HouseholderQR<Mat> qr(X);
    Mat R = qr.matrixQR().topRows(X.cols()).triangularView<Eigen::Upper>();
    double scale = std::max(R.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < R.rows(); ++i)
        if (std::abs(R(i, i)) <= tol * scale)
            throw RankDeficient("orthonormal_basis: input is rank deficient");
    Mat Q = qr.householderQ() * Mat::Identity(X.rows(), X.cols());
    return Q;
}

// Orthogonal projector onto colspan(X).
inline Mat colproj(const Mat& X)
{
    Mat Q = orthonormal_basis(X);
    return Q * Q.transpose();
}

inline double orthogonality_residual(const Mat& Q)
{
    return (Q.transpose() * Q - Mat::Identity(Q.cols(), Q.cols())).cwiseAbs().maxCoeff();
}

// Ratio of extreme singular values; infinity for singular input.
inline double condition_number(const Mat& A)
{
    Eigen::JacobiSVD<Mat> svd(A);
    const Vec& s = svd.singularValues();
    if (s.size() == 0)
        return 1.0;
    double lo = s(s.size() - 1);
    if (lo <= 0.0)
        return std::numeric_limits<double>::infinity();
    return s(0) / lo;
}

// Moore-Penrose pseudo-inverse with singular values below rel_cutoff * s_max
// treated as zero.
inline Mat pinv(const Mat& A, double rel_cutoff = 1e-10)
{
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    Vec sinv = Vec::Zero(s.size());
    double top = s.size() ? s(0) : 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_cutoff * top)
            sinv(i) = 1.0 / s(i);
    return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

inline Vec kron(const Vec& a, const Vec& b)
{
    Vec out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

inline double clamp_unit(double v)
{
    return std::min(1.0, std::max(0.0, v));
}

}  // namespace linalg
}  // namespace atlasgraph
