#pragma once

#include "atlasgraph/chart_learning.hpp"
#include "atlasgraph/svm.hpp"

namespace atlasgraph::charts {

// s(x) = (x - shift)^T A (x - shift) + linear^T (x - shift) + c0. linear is
// zero unless A was too singular to absorb the linear term.
struct AmbientSeparator {
    Mat A;
    Vec shift;
    double c0 = 0.0;
    Vec linear;
    bool extended = false;

    double value(const Vec& x) const
    {
        Vec z = x - shift;
        double v = z.dot(A * z) + c0;
        if (extended)
            v += linear.dot(z);
        return v;
    }
};

inline constexpr double kSeparatorPinvCutoff = 1e-10;

// Rewrites the kernel decision sum b_i k'(s_i, x - o) + b as a translated
// quadratic form. The shift solves 2 A s = -w on the range of A.
inline AmbientSeparator svm_to_quadratic(const svm::SvmModel& m)
{
    const Eigen::Index D = m.origin.size();
    Mat A = Mat::Zero(D, D);
    Vec w = Vec::Zero(D);
    for (Eigen::Index i = 0; i < m.support.rows(); ++i) {
        Vec s = m.support.row(i).transpose();
        A.noalias() += m.coef(i) * s * s.transpose();
        w += m.coef(i) * s;
    }
    A = 0.5 * (A + A.transpose());
    Mat Ap = linalg::pinv(A, kSeparatorPinvCutoff);
    Vec s = -0.5 * (Ap * w);
    AmbientSeparator sep;
    sep.A = A;
    sep.shift = m.origin + s;
    sep.c0 = s.dot(A * s) + w.dot(s) + m.bias;
    sep.linear = w + 2.0 * (A * s);
    double scale = std::max(w.norm(), 1.0);
    sep.extended = sep.linear.norm() > 1e-9 * scale;
    if (!sep.extended)
        sep.linear.setZero();
    return sep;
}

// Separator pulled back through the chart:
// z^T A4 z + xi^T A3 z + A2a.z + xi^T A2b xi + A1.xi + a0 with z = xi (x) xi.
struct BoundaryQuartic {
    Mat A4;
    Mat A3;
    Vec A2a;
    Mat A2b;
    Vec A1;
    double a0 = 0.0;

    double value(const Vec& xi) const
    {
        Vec z = linalg::kron(xi, xi);
        return z.dot(A4 * z) + xi.dot(A3 * z) + A2a.dot(z) + xi.dot(A2b * xi) + A1.dot(xi) + a0;
    }
    bool needs_transition(const Vec& xi) const { return value(xi) > 0.0; }
};

inline BoundaryQuartic precompute_quartic(const QuadraticChart& ch, const AmbientSeparator& sep)
{
    const Mat& A = sep.A;
    Vec cbar = ch.c - sep.shift;
    if (ch.M.cols() > 0)
        cbar += ch.M * ch.a;
    Mat MK = ch.M.cols() > 0 ? Mat(ch.M * ch.K) : Mat::Zero(ch.ambient_dim(), ch.dim() * ch.dim());
    BoundaryQuartic q;
    q.A4 = 0.25 * MK.transpose() * A * MK;
    q.A3 = ch.L.transpose() * A * MK;
    q.A2a = MK.transpose() * (A * cbar);
    q.A2b = ch.L.transpose() * A * ch.L;
    q.A1 = 2.0 * ch.L.transpose() * (A * cbar);
    q.a0 = sep.c0 + cbar.dot(A * cbar);
    if (sep.extended) {
        q.A2a += 0.5 * MK.transpose() * sep.linear;
        q.A1 += ch.L.transpose() * sep.linear;
        q.a0 += sep.linear.dot(cbar);
    }
    return q;
}

}  // namespace atlasgraph::charts
