#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atlasgraph/approx_primitives.hpp"
#include "atlasgraph/grassmann.hpp"
#include "atlasgraph/io.hpp"
#include "atlasgraph/klein.hpp"
#include "atlasgraph/rpb.hpp"
#include "atlasgraph/stats.hpp"

namespace atlasgraph::bench {

using Clock = std::chrono::steady_clock;

// ---- Grassmann Frechet streams ----

enum class Method { Atlas, Gifee, ManoptExp, ManoptRet, Opca };

inline const char* method_name(Method m)
{
    switch (m) {
    case Method::Atlas:
        return "atlas";
    case Method::Gifee:
        return "gifee";
    case Method::ManoptExp:
        return "manopt-exp";
    case Method::ManoptRet:
        return "manopt-ret";
    case Method::Opca:
        return "opca";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    for (Method m : {Method::Atlas, Method::Gifee, Method::ManoptExp, Method::ManoptRet, Method::Opca})
        if (s == method_name(m))
            return m;
    throw DimensionMismatch("unknown method '" + s + "' (atlas, gifee, manopt-exp, manopt-ret, opca)");
}

struct FrechetConfig {
    int n = 30;
    int k = 5;
    double p = 2.0;
    int samples = 1000;
    Method method = Method::Atlas;
    uint64_t seed = 1;
    // zero the time column so reruns are byte-identical
    bool timing = true;

    void validate() const
    {
        if (!(n > k && k >= 1))
            throw DimensionMismatch("grassmann-frechet: need n > k >= 1");
        if (!(p > 1.0))
            throw DimensionMismatch("grassmann-frechet: need p > 1");
        if (samples < 1)
            throw DimensionMismatch("grassmann-frechet: need samples >= 1");
    }
};

struct FrechetRow {
    int iter = 0;
    double error = 0.0;
    long long cum_time_ns = 0;
    int n_transitions = 0;
};

struct FrechetRun {
    Mat center;
    std::vector<FrechetRow> rows;
};

// The center and the sample stream depend only on (n, k, p, seed), so every
// method sees the same samples.
class GpdStream {
public:
    GpdStream(int n, int k, double p, uint64_t seed) : rng_(klein::stream_rng(seed, 0x677064ull)), p_(p)
    {
        center_ = grassmann::sample_uniform(n, k, rng_);
    }
    const Mat& center() const { return center_; }
    Mat next() { return grassmann::sample_gpd(center_, p_, rng_); }

private:
    grassmann::Rng rng_;
    double p_;
    Mat center_;
};

inline FrechetRun run_frechet(const FrechetConfig& cfg)
{
    cfg.validate();
    GpdStream stream(cfg.n, cfg.k, cfg.p, cfg.seed);
    FrechetRun run;
    run.center = stream.center();
    run.rows.reserve(static_cast<size_t>(cfg.samples));

    grassmann::FrechetState state;
    Mat X;
    long long total_ns = 0;
    for (int i = 1; i <= cfg.samples; ++i) {
        Mat Y = stream.next();
        auto t0 = Clock::now();
        if (i == 1) {
            if (cfg.method == Method::Atlas)
                state = grassmann::frechet_init(Y);
            else
                X = Y;
        } else {
            switch (cfg.method) {
            case Method::Atlas:
                grassmann::frechet_stream_step(state, Y);
                break;
            case Method::Gifee:
                X = grassmann::gifee_exp(X, grassmann::gifee_log(X, Y), i);
                break;
            case Method::ManoptExp:
                X = grassmann::manopt_exp(X, grassmann::manopt_log(X, Y), i);
                break;
            case Method::ManoptRet:
                X = grassmann::manopt_ret(X, grassmann::manopt_log(X, Y), i);
                break;
            case Method::Opca:
                X = grassmann::opca_block_step(X, Y, 1.0 / i);
                break;
            }
        }
        auto t1 = Clock::now();
        total_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
        Mat est = cfg.method == Method::Atlas ? grassmann::frechet_estimate(state) : X;
        run.rows.push_back({i, grassmann::distance(est, run.center), cfg.timing ? total_ns : 0,
                            cfg.method == Method::Atlas ? state.transitions : 0});
    }
    return run;
}

inline std::string frechet_csv(const FrechetConfig& cfg, const FrechetRun& run)
{
    std::ostringstream head;
    head << "method=" << method_name(cfg.method) << " n=" << cfg.n << " k=" << cfg.k << " p=" << cfg.p
         << " samples=" << cfg.samples << " seed=" << cfg.seed;
    io::CsvWriter w({"iter", "error", "cum_time_ns", "n_transitions"},
                    {head.str(), "error = grassmann distance between estimate and population center",
                     "cum_time_ns = monotonic time spent in estimator updates only"});
    for (const auto& r : run.rows)
        w.row(r.iter, r.error, r.cum_time_ns, r.n_transitions);
    return w.str();
}

// ---- Retraction order ----

struct RetractionConfig {
    int n = 6;
    int k = 2;
    std::vector<double> scales = {1e-1, 3.1622776601683794e-2, 1e-2, 3.1622776601683794e-3,
                                  1e-3, 3.1622776601683794e-4, 1e-4};
    int probes = 20;
    uint64_t seed = 1;

    void validate() const
    {
        if (!(n > k && k >= 1))
            throw DimensionMismatch("retraction-order: need n > k >= 1");
        if (scales.size() < 2)
            throw DimensionMismatch("retraction-order: need at least two scales");
        for (double s : scales)
            if (!(s > 0.0))
                throw DimensionMismatch("retraction-order: scales must be positive");
        if (probes < 1)
            throw DimensionMismatch("retraction-order: need probes >= 1");
    }
};

struct RetractionProbe {
    std::vector<double> errors;
    double slope = 0.0;
};

inline Mat uniform_block(int rows, int cols, grassmann::Rng& rng, double half_width)
{
    std::uniform_real_distribution<double> u(-half_width, half_width);
    Mat m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            m(i, j) = u(rng);
    return m;
}

// Each probe: random chart frame, base point |A_ij| <= 0.5, unit chart
// direction tau; error of the chart step against the geodesic with the same
// initial velocity.
inline std::vector<RetractionProbe> run_retraction_order(const RetractionConfig& cfg)
{
    cfg.validate();
    grassmann::Rng rng = klein::stream_rng(cfg.seed, 0x726574ull);
    std::vector<RetractionProbe> out;
    for (int probe = 0; probe < cfg.probes; ++probe) {
        grassmann::EhresmannChart c = grassmann::random_chart(cfg.n, cfg.k, rng);
        Mat A = uniform_block(cfg.n - cfg.k, cfg.k, rng, 0.5);
        Mat tau = uniform_block(cfg.n - cfg.k, cfg.k, rng, 1.0);
        tau /= tau.norm();
        RetractionProbe p;
        for (double s : cfg.scales)
            p.errors.push_back(grassmann::retraction_error(c, A, s * tau));
        p.slope = stats::loglog_slope(cfg.scales, p.errors);
        out.push_back(std::move(p));
    }
    return out;
}

inline std::string retraction_csv(const RetractionConfig& cfg, const std::vector<RetractionProbe>& probes)
{
    std::ostringstream head;
    head << "n=" << cfg.n << " k=" << cfg.k << " probes=" << cfg.probes << " seed=" << cfg.seed;
    io::CsvWriter w({"probe", "scale", "error", "slope"},
                    {head.str(), "slope = least-squares slope of log(error) against log(scale) for the probe"});
    for (size_t i = 0; i < probes.size(); ++i)
        for (size_t j = 0; j < cfg.scales.size(); ++j)
            w.row(i, cfg.scales[j], probes[i].errors[j], probes[i].slope);
    return w.str();
}

// ---- Klein atlas, samples, graph ----

inline std::string klein_sample_csv(const QuadraticAtlas& atlas, const std::vector<klein::AtlasSample>& pts)
{
    std::vector<std::string> header = {"chart_id", "xi0", "xi1"};
    for (const auto& s : io::numbered("x", atlas.ambient_dim))
        header.push_back(s);
    for (const char* s : {"theta", "phi", "label"})
        header.push_back(s);
    io::CsvWriter w(header, {"theta, phi, label: nearest Klein-bottle parameters of the ambient point"});
    for (const auto& s : pts) {
        klein::PatchParams q = klein::readout(s.x);
        w.row(s.point.chart.value, s.point.xi, s.x, q.theta, q.phi, klein::label_name(klein::label(q)));
    }
    return w.str();
}

// ---- Distance preservation ----

struct DistanceConfig {
    int ref_grid = 200;
    int pairs = 100;
    int knn = 5;
    uint64_t seed = 1;

    void validate() const
    {
        if (ref_grid < 2 || pairs < 1 || knn < 1)
            throw DimensionMismatch("distances: need ref-grid >= 2, pairs >= 1, knn >= 1");
    }
};

struct DistanceRow {
    int pair_id = 0;
    int a = 0;
    int b = 0;
    double true_dist = 0.0;
    double atlas_dist = 0.0;
    double pca_dist = 0.0;
    bool skipped = false;
};

struct DistanceSummary {
    int used = 0;
    int skipped = 0;
    int pca_bridges = 0;
    double atlas_pearson = 0.0, atlas_spearman = 0.0, atlas_distortion = 0.0;
    double pca_pearson = 0.0, pca_spearman = 0.0, pca_distortion = 0.0;
};

struct DistanceRun {
    std::vector<DistanceRow> rows;
    DistanceSummary summary;
};

// Pairs are vertices of the reference grid. The PCA baseline is a kNN graph
// on the 2-D projection of the same grid with Euclidean weights measured in
// the projection; its disconnected pieces are bridged by shortest links.
inline DistanceRun run_distances(const geodesic::DenseGraph& atlas_graph, const DistanceConfig& cfg)
{
    cfg.validate();
    klein::ReferenceGraph ref = klein::reference_geodesic_graph(cfg.ref_grid, cfg.knn);
    klein::Pca2 pca = klein::fit_pca2(ref.points);
    Mat proj = pca.project(ref.points);
    klein::WeightedGraph pg = klein::knn_graph(proj, cfg.knn);
    DistanceRun run;
    run.summary.pca_bridges = klein::bridge_components(proj, pg);

    klein::Rng rng = klein::stream_rng(cfg.seed, 0x64697374ull);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(ref.points.rows()) - 1);
    std::vector<double> T, A, P;
    for (int id = 0; id < cfg.pairs; ++id) {
        DistanceRow r;
        r.pair_id = id;
        r.a = pick(rng);
        r.b = pick(rng);
        r.true_dist = geodesic::dijkstra(ref.graph.adj, r.a, r.b).dist[r.b];
        r.pca_dist = geodesic::dijkstra(pg.adj, r.a, r.b).dist[r.b];
        r.atlas_dist = geodesic::graph_distance(atlas_graph, ref.points.row(r.a).transpose(),
                                                ref.points.row(r.b).transpose());
        r.skipped = !std::isfinite(r.true_dist) || !std::isfinite(r.pca_dist) || !std::isfinite(r.atlas_dist);
        if (r.skipped) {
            ++run.summary.skipped;
        } else {
            T.push_back(r.true_dist);
            A.push_back(r.atlas_dist);
            P.push_back(r.pca_dist);
        }
        run.rows.push_back(r);
    }
    auto& s = run.summary;
    s.used = static_cast<int>(T.size());
    if (s.used >= 2) {
        s.atlas_pearson = stats::pearson(A, T);
        s.atlas_spearman = stats::spearman(A, T);
        s.pca_pearson = stats::pearson(P, T);
        s.pca_spearman = stats::spearman(P, T);
    }
    s.atlas_distortion = stats::distortion(A, T);
    s.pca_distortion = stats::distortion(P, T);
    return run;
}

inline std::string distances_csv(const DistanceConfig& cfg, const DistanceRun& run)
{
    std::ostringstream head, sum;
    head << "ref_grid=" << cfg.ref_grid << " pairs=" << cfg.pairs << " knn=" << cfg.knn << " seed=" << cfg.seed;
    io::CsvWriter w({"pair_id", "true_dist", "atlas_dist", "pca_dist", "skipped"},
                    {head.str(), "distortion = (max estimate/true) * (max true/estimate) over pairs with true > 0"});
    for (const auto& r : run.rows)
        w.row(r.pair_id, r.true_dist, r.atlas_dist, r.pca_dist, r.skipped ? 1 : 0);
    const auto& s = run.summary;
    sum.precision(6);
    sum << "summary used=" << s.used << " skipped=" << s.skipped << " atlas_pearson=" << s.atlas_pearson
        << " atlas_spearman=" << s.atlas_spearman << " atlas_distortion=" << s.atlas_distortion
        << " pca_pearson=" << s.pca_pearson << " pca_spearman=" << s.pca_spearman
        << " pca_distortion=" << s.pca_distortion << " pca_bridges=" << s.pca_bridges;
    w.comment(sum.str());
    return w.str();
}

// ---- Principal boundary ----

struct RpbExperimentConfig {
    rpb::RpbConfig rpb;
    klein::PatchParams start_plus{klein::kPi / 2, 0.0};
    klein::PatchParams start_minus{klein::kPi / 2, klein::kPi};
    // parameter midpoint of the two class starts when unset
    std::optional<klein::PatchParams> start_boundary;
    int draws = 8000;
    int test_patches = 1000;
    uint64_t seed = 1;

    void validate() const
    {
        rpb.validate();
        if (draws < 1 || test_patches < 1)
            throw DimensionMismatch("rpb: need draws >= 1 and test-patches >= 1");
    }
};

struct RpbExperiment {
    rpb::RpbResult result;
    int data_convex = 0;
    int data_concave = 0;
    int tested = 0;
    int correct = 0;
    double accuracy = 0.0;
};

inline klein::PatchParams param_midpoint(const klein::PatchParams& a, const klein::PatchParams& b)
{
    Vec d = rpb::param_displacement(a, b);
    return {a.theta + 0.5 * d(0), a.phi + 0.5 * d(1)};
}

// Every recorded step after the first kept a nonnegative inner product with
// the previous tangent.
inline bool sign_consistent(const rpb::FlowState& s)
{
    for (size_t t = 1; t < s.alignment.size(); ++t)
        if (s.alignment[t] < 0.0)
            return false;
    return true;
}

inline bool sign_consistent(const rpb::RpbResult& r)
{
    return sign_consistent(r.flow_plus) && sign_consistent(r.flow_minus) && sign_consistent(r.flow_boundary);
}

// Held-out labeled patches come from a stream disjoint from the training draws.
inline std::vector<std::pair<klein::PatchParams, klein::PatchLabel>> held_out_patches(int count, uint64_t seed)
{
    klein::Rng rng = klein::stream_rng(seed, 0x74657374ull);
    std::vector<std::pair<klein::PatchParams, klein::PatchLabel>> out;
    while (static_cast<int>(out.size()) < count) {
        klein::PatchParams p = klein::sample_params(rng);
        klein::PatchLabel l = klein::label(p);
        if (l != klein::PatchLabel::Neither)
            out.push_back({p, l});
    }
    return out;
}

inline RpbExperiment run_rpb_experiment(const QuadraticAtlas& atlas, const geodesic::DenseGraph& g,
                                        const RpbExperimentConfig& cfg)
{
    cfg.validate();
    rpb::LabeledPatches data = rpb::labeled_sample(cfg.draws, cfg.seed);
    RpbExperiment ex;
    ex.data_convex = static_cast<int>(data.convex.rows());
    ex.data_concave = static_cast<int>(data.concave.rows());
    klein::PatchParams pb = cfg.start_boundary.value_or(param_midpoint(cfg.start_plus, cfg.start_minus));
    RepresentativePoint sp = atlas.locate(klein::patch(cfg.start_plus));
    RepresentativePoint sm = atlas.locate(klein::patch(cfg.start_minus));
    RepresentativePoint sb = atlas.locate(klein::patch(pb));
    ex.result = rpb::run_rpb(atlas, g, data.convex, data.concave, sp, sm, sb, cfg.rpb);
    if (ex.result.boundary.size() < 2)
        return ex;
    rpb::BoundaryClassifier classify(ex.result);
    for (const auto& [p, l] : held_out_patches(cfg.test_patches, cfg.seed)) {
        ++ex.tested;
        ex.correct += classify(p) == l;
    }
    ex.accuracy = static_cast<double>(ex.correct) / ex.tested;
    return ex;
}

inline std::string rpb_csv(const QuadraticAtlas& atlas, const RpbExperimentConfig& cfg, const RpbExperiment& ex)
{
    std::ostringstream head, sum;
    head << "h=" << cfg.rpb.h << " alpha=" << cfg.rpb.alpha << " step=" << cfg.rpb.step
         << " iters=" << cfg.rpb.iterations << " draws=" << cfg.draws << " seed=" << cfg.seed;
    std::vector<std::string> header = {"iter", "curve", "chart_id"};
    for (const auto& s : io::numbered("xi", atlas.manifold_dim))
        header.push_back(s);
    for (const auto& s : io::numbered("x", atlas.ambient_dim))
        header.push_back(s);
    header.push_back("theta");
    header.push_back("phi");
    io::CsvWriter w(header, {head.str()});
    const std::pair<const char*, const std::vector<rpb::TraceRow>*> curves[] = {
        {"plus", &ex.result.plus}, {"minus", &ex.result.minus}, {"boundary", &ex.result.boundary}};
    for (const auto& [name, rows] : curves)
        for (size_t i = 0; i < rows->size(); ++i) {
            const auto& r = (*rows)[i];
            w.row(i, name, r.point.chart.value, r.point.xi, r.x, r.params.theta, r.params.phi);
        }
    sum << "summary completed=" << ex.result.completed << " error=\"" << ex.result.error << "\""
        << " sign_consistent=" << (sign_consistent(ex.result) ? 1 : 0) << " tested=" << ex.tested
        << " accuracy=" << ex.accuracy;
    w.comment(sum.str());
    return w.str();
}

}  // namespace atlasgraph::bench
