#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "atlasgraph/approx_primitives.hpp"
#include "atlasgraph/atlas.hpp"
#include "atlasgraph/klein.hpp"

namespace atlasgraph::rpb {

class FlowStarvation : public ConvergenceError {
public:
    FlowStarvation(const std::string& what, int iteration) : ConvergenceError(what), iteration_(iteration) {}
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

class BoundaryStall : public ConvergenceError {
public:
    using ConvergenceError::ConvergenceError;
};

struct RpbConfig {
    double h = 1.0;  // a class band is several units wide, smaller balls starve
    double alpha = 0.1;
    double step = 0.005;
    int iterations = 2000;
    static constexpr double lambda = 0.5;

    void validate() const
    {
        if (!(h > 0.0) || !(step > 0.0) || !(alpha >= 0.0) || iterations < 0)
            throw DimensionMismatch("RpbConfig: need h > 0, step > 0, alpha >= 0, iterations >= 0");
    }
};

struct FlowState {
    RepresentativePoint point;
    std::optional<RepresentativeTangent> prev_tangent;
    std::vector<RepresentativePoint> trace;
    // tangent applied at trace[t], in trace[t]'s chart
    std::vector<RepresentativeTangent> tangents;
    // <tangent_t, tangent_{t-1} carried into the chart of tangent_t>
    std::vector<double> alignment;
    int transitions = 0;
};

inline FlowState start_flow(const RepresentativePoint& p)
{
    FlowState s;
    s.point = p;
    s.trace.push_back(p);
    return s;
}

// Retraction logs of the data rows within ambient radius h of embed(p). Each
// datum is re-represented in p's chart by projection; data off the chart's
// surface fall back to the graph logarithm when a graph is given.
struct LocalLogs {
    std::vector<Vec> logs;
    int fallbacks = 0;
};

inline LocalLogs in_ball_logs(const QuadraticAtlas& atlas, const geodesic::DenseGraph* g, const Mat& data,
                              const RepresentativePoint& p, double h)
{
    LocalLogs out;
    const auto& ch = atlas.chart(p.chart);
    Vec x = atlas.embed(p);
    const double h2 = h * h;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if ((data.row(i).transpose() - x).squaredNorm() >= h2)
            continue;
        Vec y = data.row(i).transpose();
        Vec xi = charts::project_to_chart(ch, y);
        if (!g || charts::residual(ch, y) < kTransitionResidual) {
            out.logs.push_back(xi - p.xi);
            continue;
        }
        RepresentativePoint q = atlas.locate(y);
        out.logs.push_back(geodesic::approx_riemannian_log(atlas, *g, p, q).tau);
        ++out.fallbacks;
    }
    return out;
}

// Sign making the largest-magnitude component positive; the lowest index wins
// ties.
inline Vec canonical_sign(Vec v)
{
    Eigen::Index k = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) > std::abs(v(k)))
            k = i;
    if (v(k) < 0.0)
        v = -v;
    return v;
}

// Top unit eigenvector of the uncentered second moment of the logs.
inline Vec local_covariance_direction(const std::vector<Vec>& logs, const Vec* prev)
{
    if (logs.size() < 2)
        throw ConvergenceError("local_covariance_direction: fewer than two samples in the ball");
    const Eigen::Index d = logs.front().size();
    Mat S = Mat::Zero(d, d);
    for (const Vec& l : logs)
        S.noalias() += l * l.transpose();
    S /= static_cast<double>(logs.size());
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    Vec w = es.eigenvectors().col(d - 1);
    w.normalize();
    if (prev && prev->size() == d && prev->squaredNorm() > 0.0)
        return w.dot(*prev) < 0.0 ? Vec(-w) : w;
    return canonical_sign(w);
}

inline Vec mean_of(const std::vector<Vec>& logs)
{
    Vec m = Vec::Zero(logs.front().size());
    for (const Vec& l : logs)
        m += l;
    return m / static_cast<double>(logs.size());
}

// Previous tangent carried to the chart of p. A chart change uses the
// first-order cross-chart transport between the two representatives.
inline std::optional<Vec> carried_prev(const QuadraticAtlas& atlas, const FlowState& s)
{
    if (!s.prev_tangent)
        return std::nullopt;
    const RepresentativeTangent& t = *s.prev_tangent;
    if (t.chart == s.point.chart)
        return t.tau;
    const RepresentativePoint& before = s.trace[s.trace.size() - 2];
    return charts::cross_chart_transport(atlas.chart(before.chart), before.xi, atlas.chart(s.point.chart), s.point.xi,
                                         t.tau);
}

// W + alpha (I - W W^T) m with <tangent, prev> >= 0. W is flipped when the
// correction alone would break the sign, and the correction is dropped when
// neither orientation keeps it.
inline Vec flow_tangent(const QuadraticAtlas& atlas, const geodesic::DenseGraph* g, const Mat& data,
                        const FlowState& s, const RpbConfig& cfg, int iteration, const Vec* orientation_hint = nullptr)
{
    LocalLogs local = in_ball_logs(atlas, g, data, s.point, cfg.h);
    if (local.logs.size() < 2)
        throw FlowStarvation("principal flow: fewer than two samples within h at iteration " +
                                 std::to_string(iteration),
                             iteration);
    std::optional<Vec> prev = carried_prev(atlas, s);
    const Vec* ref = prev ? &*prev : orientation_hint;
    Vec w = local_covariance_direction(local.logs, ref);
    Vec m = mean_of(local.logs);
    Vec corr = cfg.alpha * (m - w * w.dot(m));
    Vec t = w + corr;
    if (ref && t.dot(*ref) < 0.0) {
        Vec flipped = -w + corr;
        t = flipped.dot(*ref) >= 0.0 ? flipped : w;
    }
    return t;
}

inline void advance(const QuadraticAtlas& atlas, FlowState& s, const Vec& tangent, double step)
{
    std::optional<Vec> prev = carried_prev(atlas, s);
    s.alignment.push_back(prev ? tangent.dot(*prev) : 0.0);
    s.tangents.push_back({s.point.chart, tangent});
    StepResult r = quasi_euclidean_step_counted(atlas, s.point, step * tangent);
    s.transitions += r.transitions;
    s.prev_tangent = RepresentativeTangent{s.point.chart, tangent};
    s.point = r.point;
    s.trace.push_back(s.point);
}

inline FlowState principal_flow_step(const QuadraticAtlas& atlas, const geodesic::DenseGraph* g, const Mat& data,
                                     FlowState state, const RpbConfig& cfg, int iteration = 0)
{
    Vec t = flow_tangent(atlas, g, data, state, cfg, iteration);
    advance(atlas, state, t, cfg.step);
    return state;
}

// Tangent of a flow carried to the boundary point: identity within a chart,
// graph-path transport across charts.
inline Vec carry_to(const QuadraticAtlas& atlas, const geodesic::DenseGraph& g, const RepresentativePoint& from,
                    const Vec& tau, const RepresentativePoint& to)
{
    if (from.chart == to.chart)
        return identity_transport(from, {from.chart, tau}, to).tau;
    return geodesic::graph_transport(atlas, g, from, {from.chart, tau}, to).tau;
}

// lambda-weighted average of the two carried tangents, sign-aligned with the
// boundary's previous tangent.
inline Vec boundary_tangent(const Vec& t_plus, const Vec& t_minus, const std::optional<Vec>& prev)
{
    Vec avg = RpbConfig::lambda * t_plus + (1.0 - RpbConfig::lambda) * t_minus;
    const double scale = t_plus.norm() + t_minus.norm();
    if (!(avg.norm() > 1e-12 * scale))
        throw BoundaryStall("boundary_step: transported flow tangents cancel");
    if (prev && avg.dot(*prev) < 0.0)
        avg = -avg;
    return avg;
}

inline FlowState boundary_step(const QuadraticAtlas& atlas, const geodesic::DenseGraph& g, FlowState boundary,
                               const RepresentativePoint& plus_at, const Vec& plus_tangent,
                               const RepresentativePoint& minus_at, const Vec& minus_tangent, const RpbConfig& cfg)
{
    Vec tp = carry_to(atlas, g, plus_at, plus_tangent, boundary.point);
    Vec tm = carry_to(atlas, g, minus_at, minus_tangent, boundary.point);
    Vec t = boundary_tangent(tp, tm, carried_prev(atlas, boundary));
    advance(atlas, boundary, t, cfg.step);
    return boundary;
}

struct TraceRow {
    RepresentativePoint point;
    Vec x;
    klein::PatchParams params;
};

struct RpbResult {
    std::vector<TraceRow> plus;
    std::vector<TraceRow> minus;
    std::vector<TraceRow> boundary;
    FlowState flow_plus;
    FlowState flow_minus;
    FlowState flow_boundary;
    int completed = 0;
    std::string error;
};

// Ambient point -> parameters used by the classifier.
using Readout = std::function<klein::PatchParams(const Vec&)>;

inline std::vector<TraceRow> readout_trace(const QuadraticAtlas& atlas, const std::vector<RepresentativePoint>& pts,
                                           const Readout& read)
{
    std::vector<TraceRow> rows;
    rows.reserve(pts.size());
    for (const auto& p : pts) {
        Vec x = atlas.embed(p);
        rows.push_back({p, x, read(x)});
    }
    return rows;
}

// Lockstep Euler integration of the two principal flows and the boundary. A
// mid-run failure keeps the traces so far and records the error.
inline RpbResult run_rpb(const QuadraticAtlas& atlas, const geodesic::DenseGraph& g, const Mat& data_plus,
                         const Mat& data_minus, const RepresentativePoint& start_plus,
                         const RepresentativePoint& start_minus, const RepresentativePoint& start_boundary,
                         const RpbConfig& cfg, const Readout& read = klein::readout)
{
    cfg.validate();
    RpbResult res;
    FlowState fp = start_flow(start_plus), fm = start_flow(start_minus), fb = start_flow(start_boundary);
    try {
        for (int it = 0; it < cfg.iterations; ++it) {
            Vec tp = flow_tangent(atlas, &g, data_plus, fp, cfg, it);
            Vec tm;
            if (it == 0) {
                // orient the minus flow like the plus flow on first contact
                Vec hint = carry_to(atlas, g, fp.point, tp, fm.point);
                tm = flow_tangent(atlas, &g, data_minus, fm, cfg, it, &hint);
            } else {
                tm = flow_tangent(atlas, &g, data_minus, fm, cfg, it);
            }
            RepresentativePoint at_p = fp.point, at_m = fm.point;
            advance(atlas, fp, tp, cfg.step);
            advance(atlas, fm, tm, cfg.step);
            fb = boundary_step(atlas, g, std::move(fb), at_p, tp, at_m, tm, cfg);
            res.completed = it + 1;
        }
    } catch (const Error& e) {
        res.error = e.what();
    }
    // traces stay equal length even when a curve failed mid-iteration
    size_t n = std::min({fp.trace.size(), fm.trace.size(), fb.trace.size()});
    fp.trace.resize(n);
    fm.trace.resize(n);
    fb.trace.resize(n);
    res.plus = readout_trace(atlas, fp.trace, read);
    res.minus = readout_trace(atlas, fm.trace, read);
    res.boundary = readout_trace(atlas, fb.trace, read);
    res.flow_plus = std::move(fp);
    res.flow_minus = std::move(fm);
    res.flow_boundary = std::move(fb);
    return res;
}

// Representative of q closest to p in the parameter plane under the
// identifications (theta + pi, 2 pi - phi) and phi + 2 pi.
inline Vec param_displacement(const klein::PatchParams& p, const klein::PatchParams& q)
{
    using klein::kPi;
    Vec best(2);
    double bd = std::numeric_limits<double>::infinity();
    for (int s = -1; s <= 1; ++s) {
        double th = q.theta + s * kPi;
        double ph = s == 0 ? q.phi : 2.0 * kPi - q.phi;
        double dphi = std::remainder(ph - p.phi, 2.0 * kPi);
        double dth = th - p.theta;
        double d = dth * dth + dphi * dphi;
        if (d < bd) {
            bd = d;
            best << dth, dphi;
        }
    }
    return best;
}

// Nearest boundary-trace point in the parameter plane; the side is read off
// the local trace normal, oriented toward the nearest point of the plus
// (convex) flow.
class BoundaryClassifier {
public:
    explicit BoundaryClassifier(const RpbResult& r)
    {
        const auto& b = r.boundary;
        if (b.empty())
            throw GraphError("classify_by_boundary: empty boundary trace");
        for (size_t i = 0; i < b.size(); ++i) {
            size_t lo = i > 0 ? i - 1 : i, hi = i + 1 < b.size() ? i + 1 : i;
            if (lo == hi)
                continue;
            Vec dir = param_displacement(b[lo].params, b[hi].params);
            if (dir.norm() < 1e-12)
                continue;
            Vec n(2);
            n << -dir(1), dir(0);
            n.normalize();
            Vec toward = nearest_displacement(b[i].params, r.plus);
            if (n.dot(toward) < 0.0)
                n = -n;
            anchors_.push_back(b[i].params);
            normals_.push_back(n);
        }
        if (anchors_.empty())
            throw GraphError("classify_by_boundary: boundary trace does not move");
    }

    klein::PatchLabel operator()(const klein::PatchParams& q) const
    {
        size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        Vec disp;
        for (size_t i = 0; i < anchors_.size(); ++i) {
            Vec d = param_displacement(anchors_[i], q);
            double dd = d.squaredNorm();
            if (dd < bd) {
                bd = dd;
                best = i;
                disp = d;
            }
        }
        return normals_[best].dot(disp) >= 0.0 ? klein::PatchLabel::Convex : klein::PatchLabel::Concave;
    }

private:
    static Vec nearest_displacement(const klein::PatchParams& p, const std::vector<TraceRow>& trace)
    {
        Vec best = Vec::Zero(2);
        double bd = std::numeric_limits<double>::infinity();
        for (const auto& row : trace) {
            Vec d = param_displacement(p, row.params);
            if (d.squaredNorm() < bd) {
                bd = d.squaredNorm();
                best = d;
            }
        }
        return best;
    }

    std::vector<klein::PatchParams> anchors_;
    std::vector<Vec> normals_;
};

inline klein::PatchLabel classify_by_boundary(const RpbResult& r, const klein::PatchParams& q)
{
    return BoundaryClassifier(r)(q);
}

// Uniformly drawn patches split by class; Neither draws are discarded.
struct LabeledPatches {
    Mat convex;
    Mat concave;
};

inline LabeledPatches labeled_sample(int draws, uint64_t seed)
{
    klein::Rng rng = klein::stream_rng(seed, 0x7270620000ull);
    std::vector<Vec> cv, cc;
    for (int i = 0; i < draws; ++i) {
        klein::PatchParams p = klein::sample_params(rng);
        klein::PatchLabel l = klein::label(p);
        if (l == klein::PatchLabel::Convex)
            cv.push_back(klein::patch(p));
        else if (l == klein::PatchLabel::Concave)
            cc.push_back(klein::patch(p));
    }
    auto pack = [](const std::vector<Vec>& v) {
        Mat m(static_cast<Eigen::Index>(v.size()), 9);
        for (size_t i = 0; i < v.size(); ++i)
            m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
        return m;
    };
    return {pack(cv), pack(cc)};
}

}  // namespace atlasgraph::rpb
