#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "atlasgraph/linalg.hpp"

namespace atlasgraph::svm {

inline double quadratic_kernel(const Vec& x, const Vec& y)
{
    double t = x.dot(y);
    return t + t * t;
}

// Gram matrix of the rows of Z under the quadratic kernel.
inline Mat quadratic_gram(const Mat& Z)
{
    Mat G = Z * Z.transpose();
    return G + G.cwiseProduct(G);
}

struct SmoOptions {
    double C = 10.0;
    double tol = 1e-5;
    long max_updates = 1000000;
};

struct SmoResult {
    Vec alpha;
    double b = 0.0;  // decision is sum alpha_i y_i K(x_i, x) + b
    double gap = 0.0;
    long updates = 0;
    bool converged = false;
};

// Dual C-SVC, min 1/2 a^T Q a - e^T a with 0 <= a <= C and y^T a = 0, solved
// by SMO on the maximal violating pair.
inline SmoResult smo_solve(const Mat& K, const Vec& y, const SmoOptions& opt = {})
{
    const Eigen::Index n = y.size();
    if (K.rows() != n || K.cols() != n)
        throw DimensionMismatch("smo_solve: kernel size does not match labels");
    for (Eigen::Index i = 0; i < n; ++i)
        if (y(i) != 1.0 && y(i) != -1.0)
            throw DimensionMismatch("smo_solve: labels must be +1 or -1");
    const double C = opt.C;
    Mat Q = (y * y.transpose()).cwiseProduct(K);
    Vec alpha = Vec::Zero(n);
    Vec G = Vec::Constant(n, -1.0);
    SmoResult res;
    auto in_up = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) < C) || (y(t) < 0 && alpha(t) > 0); };
    auto in_low = [&](Eigen::Index t) { return (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < C); };
    for (;;) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        Eigen::Index i = -1, j = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            double v = -y(t) * G(t);
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        res.gap = (i < 0 || j < 0) ? 0.0 : gmax - gmin;
        if (i < 0 || j < 0 || res.gap < opt.tol) {
            res.converged = true;
            break;
        }
        if (res.updates >= opt.max_updates)
            break;
        ++res.updates;
        const double ai = alpha(i), aj = alpha(j);
        if (y(i) != y(j)) {
            double quad = Q(i, i) + Q(j, j) + 2.0 * Q(i, j);
            if (quad <= 0.0)
                quad = 1e-12;
            double delta = (-G(i) - G(j)) / quad;
            double diff = ai - aj;
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0) {
                if (alpha(j) < 0) {
                    alpha(j) = 0;
                    alpha(i) = diff;
                }
            } else if (alpha(i) < 0) {
                alpha(i) = 0;
                alpha(j) = -diff;
            }
            if (diff > 0) {
                if (alpha(i) > C) {
                    alpha(i) = C;
                    alpha(j) = C - diff;
                }
            } else if (alpha(j) > C) {
                alpha(j) = C;
                alpha(i) = C + diff;
            }
        } else {
            double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
            if (quad <= 0.0)
                quad = 1e-12;
            double delta = (G(i) - G(j)) / quad;
            double sum = ai + aj;
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > C) {
                if (alpha(i) > C) {
                    alpha(i) = C;
                    alpha(j) = sum - C;
                }
                if (alpha(j) > C) {
                    alpha(j) = C;
                    alpha(i) = sum - C;
                }
            } else {
                if (alpha(j) < 0) {
                    alpha(j) = 0;
                    alpha(i) = sum;
                }
                if (alpha(i) < 0) {
                    alpha(i) = 0;
                    alpha(j) = sum;
                }
            }
        }
        double di = alpha(i) - ai, dj = alpha(j) - aj;
        G += Q.col(i) * di + Q.col(j) * dj;
    }
    // offset from free vectors, or the midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        double yg = y(t) * G(t);
        if (alpha(t) >= C) {
            if (y(t) < 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else if (alpha(t) <= 0) {
            if (y(t) > 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
    res.alpha = alpha;
    res.b = -rho;
    return res;
}

inline double dual_objective(const Mat& K, const Vec& y, const Vec& alpha)
{
    Vec ya = y.cwiseProduct(alpha);
    return 0.5 * ya.dot(K * ya) - alpha.sum();
}

// Largest violation of the dual KKT conditions (m(a) - M(a) form).
inline double kkt_violation(const Mat& K, const Vec& y, const Vec& alpha, double C)
{
    Vec G = (y.cwiseProduct(K * y.cwiseProduct(alpha))) - Vec::Ones(y.size());
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < y.size(); ++t) {
        double v = -y(t) * G(t);
        if ((y(t) > 0 && alpha(t) < C) || (y(t) < 0 && alpha(t) > 0))
            up = std::max(up, v);
        if ((y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < C))
            low = std::min(low, v);
    }
    if (!std::isfinite(up) || !std::isfinite(low))
        return 0.0;
    return std::max(0.0, up - low);
}

// Trained decision f(x) = sum coef_i k'(s_i, x - origin) + b.
struct SvmModel {
    Mat support;  // rows, in origin-shifted coordinates
    Vec coef;     // alpha_i y_i
    double bias = 0.0;
    double C = 10.0;
    Vec origin;
    bool converged = true;
    long updates = 0;

    double decision(const Vec& x) const
    {
        Vec z = x - origin;
        Vec t = support * z;
        return coef.dot(t + t.cwiseProduct(t)) + bias;
    }
};

// +1 for rows of pos, -1 for rows of neg. The kernel sees x - origin.
inline SvmModel train_boundary_svm(const Mat& pos, const Mat& neg, const Vec& origin, const SmoOptions& opt = {})
{
    const Eigen::Index D = origin.size();
    if (pos.cols() != D || neg.cols() != D)
        throw DimensionMismatch("train_boundary_svm: sample dimension mismatch");
    if (pos.rows() == 0 || neg.rows() == 0)
        throw DimensionMismatch("train_boundary_svm: both classes need samples");
    const Eigen::Index n = pos.rows() + neg.rows();
    Mat Z(n, D);
    Z.topRows(pos.rows()) = pos.rowwise() - origin.transpose();
    Z.bottomRows(neg.rows()) = neg.rowwise() - origin.transpose();
    Vec y(n);
    y.head(pos.rows()).setConstant(1.0);
    y.tail(neg.rows()).setConstant(-1.0);
    SmoResult r = smo_solve(quadratic_gram(Z), y, opt);
    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < n; ++i)
        if (r.alpha(i) > 0.0)
            sv.push_back(i);
    SvmModel m;
    m.support.resize(static_cast<Eigen::Index>(sv.size()), D);
    m.coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (size_t t = 0; t < sv.size(); ++t) {
        m.support.row(t) = Z.row(sv[t]);
        m.coef(t) = r.alpha(sv[t]) * y(sv[t]);
    }
    m.bias = r.b;
    m.C = opt.C;
    m.origin = origin;
    m.converged = r.converged;
    m.updates = r.updates;
    return m;
}

}  // namespace atlasgraph::svm
