#pragma once

#include <filesystem>
#include <fstream>
#include <locale>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "atlasgraph/approx_primitives.hpp"
#include "atlasgraph/atlas.hpp"

namespace atlasgraph::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Whole-file write through a temporary in the same directory, then rename.
inline void write_atomic(const std::string& path, const std::string& contents)
{
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw IoError("cannot open " + tmp.string() + " for writing");
        f << contents;
        f.flush();
        if (!f)
            throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot rename onto " + path + ": " + ec.message());
    }
}

inline std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Row-major nested arrays.
inline json to_json(const Mat& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline json to_json(const Vec& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v(i));
    return a;
}

// Shape is explicit because an empty row list loses the column count.
inline Mat mat_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw IoError(std::string("atlas json: bad row count for ") + what);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& r = j[static_cast<size_t>(i)];
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
            throw IoError(std::string("atlas json: bad column count for ") + what);
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = r[static_cast<size_t>(c)].get<double>();
    }
    return m;
}

inline Vec vec_from_json(const json& j, Eigen::Index n, const char* what)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
        throw IoError(std::string("atlas json: bad length for ") + what);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = j[static_cast<size_t>(i)].get<double>();
    return v;
}

inline void check_schema(const json& j, const char* what)
{
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != kSchemaVersion)
        throw IoError(std::string(what) + ": unsupported schema_version");
}

inline json atlas_to_json(const QuadraticAtlas& a)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["ambient_dim"] = a.ambient_dim;
    j["dim"] = a.manifold_dim;
    json charts = json::array();
    for (int i = 0; i < a.size(); ++i) {
        const auto& ch = a.charts[i];
        const auto& q = a.quartics[i];
        json c;
        c["id"] = ch.id;
        c["center"] = to_json(ch.c);
        c["L"] = to_json(ch.L);
        c["M"] = to_json(ch.M);
        c["K"] = to_json(ch.K);
        c["a"] = to_json(ch.a);
        c["radius"] = ch.radius;
        c["quartic"] = {{"A4", to_json(q.A4)}, {"A3", to_json(q.A3)}, {"A2a", to_json(q.A2a)},
                        {"A2b", to_json(q.A2b)}, {"A1", to_json(q.A1)}, {"a0", q.a0}};
        if (static_cast<size_t>(i) < a.separators.size()) {
            const auto& s = a.separators[i];
            c["separator"] = {{"A", to_json(s.A)}, {"shift", to_json(s.shift)}, {"c0", s.c0}};
            if (s.extended)
                c["extended_linear"] = to_json(s.linear);
        }
        charts.push_back(std::move(c));
    }
    j["charts"] = std::move(charts);
    json adj = json::array();
    for (int i = 0; i < static_cast<int>(a.adjacency.size()); ++i)
        for (int k : a.adjacency[i])
            if (i < k)
                adj.push_back({i, k});
    j["adjacency"] = std::move(adj);
    return j;
}

inline QuadraticAtlas atlas_from_json(const json& j)
{
    check_schema(j, "atlas json");
    QuadraticAtlas a;
    try {
        a.ambient_dim = j.at("ambient_dim").get<int>();
        a.manifold_dim = j.at("dim").get<int>();
        const Eigen::Index D = a.ambient_dim, d = a.manifold_dim;
        bool with_sep = true;
        for (const json& c : j.at("charts")) {
            charts::QuadraticChart ch;
            ch.id = c.at("id").get<int>();
            ch.c = vec_from_json(c.at("center"), D, "center");
            ch.L = mat_from_json(c.at("L"), D, d, "L");
            ch.M = mat_from_json(c.at("M"), D, D - d, "M");
            ch.K = mat_from_json(c.at("K"), D - d, d * d, "K");
            ch.a = vec_from_json(c.at("a"), D - d, "a");
            ch.radius = c.at("radius").get<double>();
            const json& q = c.at("quartic");
            charts::BoundaryQuartic bq;
            bq.A4 = mat_from_json(q.at("A4"), d * d, d * d, "A4");
            bq.A3 = mat_from_json(q.at("A3"), d, d * d, "A3");
            bq.A2a = vec_from_json(q.at("A2a"), d * d, "A2a");
            bq.A2b = mat_from_json(q.at("A2b"), d, d, "A2b");
            bq.A1 = vec_from_json(q.at("A1"), d, "A1");
            bq.a0 = q.at("a0").get<double>();
            if (c.contains("separator")) {
                const json& s = c["separator"];
                charts::AmbientSeparator sep;
                sep.A = mat_from_json(s.at("A"), D, D, "separator.A");
                sep.shift = vec_from_json(s.at("shift"), D, "separator.shift");
                sep.c0 = s.at("c0").get<double>();
                sep.extended = c.contains("extended_linear");
                sep.linear = sep.extended ? vec_from_json(c["extended_linear"], D, "extended_linear") : Vec::Zero(D);
                a.separators.push_back(std::move(sep));
            } else {
                with_sep = false;
            }
            a.charts.push_back(std::move(ch));
            a.quartics.push_back(std::move(bq));
        }
        if (!with_sep)
            a.separators.clear();
        a.adjacency.assign(a.charts.size(), {});
        for (const json& e : j.at("adjacency")) {
            int u = e.at(0).get<int>(), v = e.at(1).get<int>();
            if (u < 0 || v < 0 || u >= a.size() || v >= a.size())
                throw IoError("atlas json: adjacency refers to a missing chart");
            a.adjacency[u].push_back(v);
            a.adjacency[v].push_back(u);
        }
        for (auto& l : a.adjacency)
            std::sort(l.begin(), l.end());
    } catch (const json::exception& e) {
        throw IoError(std::string("atlas json: ") + e.what());
    }
    a.validate();
    return a;
}

inline void save_atlas(const QuadraticAtlas& a, const std::string& path)
{
    write_atomic(path, atlas_to_json(a).dump(1) + "\n");
}

inline QuadraticAtlas load_atlas(const std::string& path)
{
    try {
        return atlas_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

inline json graph_to_json(const geodesic::DenseGraph& g)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["delta"] = g.delta;
    j["eps"] = g.eps;
    json verts = json::array();
    for (const auto& v : g.vertices)
        verts.push_back({{"chart", v.chart.value}, {"xi", to_json(v.xi)}, {"x", to_json(v.x)}});
    j["vertices"] = std::move(verts);
    json edges = json::array();
    for (int u = 0; u < g.size(); ++u)
        for (const auto& e : g.adj[u])
            if (u < e.to)
                edges.push_back({u, e.to, e.w});
    j["edges"] = std::move(edges);
    return j;
}

inline geodesic::DenseGraph graph_from_json(const json& j)
{
    check_schema(j, "graph json");
    geodesic::DenseGraph g;
    try {
        g.delta = j.at("delta").get<double>();
        g.eps = j.at("eps").get<double>();
        for (const json& v : j.at("vertices")) {
            const json& xi = v.at("xi");
            const json& x = v.at("x");
            g.vertices.push_back({ChartId{v.at("chart").get<int>()},
                                  vec_from_json(xi, static_cast<Eigen::Index>(xi.size()), "xi"),
                                  vec_from_json(x, static_cast<Eigen::Index>(x.size()), "x")});
        }
        g.adj.assign(g.vertices.size(), {});
        for (const json& e : j.at("edges")) {
            int u = e.at(0).get<int>(), v = e.at(1).get<int>();
            double w = e.at(2).get<double>();
            if (u < 0 || v < 0 || u >= g.size() || v >= g.size())
                throw IoError("graph json: edge refers to a missing vertex");
            g.adj[u].push_back({v, w});
            g.adj[v].push_back({u, w});
        }
    } catch (const json::exception& e) {
        throw IoError(std::string("graph json: ") + e.what());
    }
    for (auto& l : g.adj)
        std::sort(l.begin(), l.end(), [](const geodesic::Edge& a, const geodesic::Edge& b) { return a.to < b.to; });
    g.index.rebuild(g.vertices);
    return g;
}

inline void save_graph(const geodesic::DenseGraph& g, const std::string& path)
{
    write_atomic(path, graph_to_json(g).dump() + "\n");
}

inline geodesic::DenseGraph load_graph(const std::string& path)
{
    try {
        return graph_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

// Locale-independent CSV text with round-trip precision.
class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header, const std::vector<std::string>& comments = {})
    {
        out_.imbue(std::locale::classic());
        out_.precision(17);
        for (const auto& c : comments)
            out_ << "# " << c << "\n";
        for (size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }

    template <class... T>
    void row(const T&... fields)
    {
        bool first = true;
        ((out_ << (first ? "" : ","), put(fields), first = false), ...);
        out_ << "\n";
    }

    void comment(const std::string& c) { out_ << "# " << c << "\n"; }
    std::string str() const { return out_.str(); }
    void save(const std::string& path) const { write_atomic(path, out_.str()); }

private:
    void put(const Vec& v)
    {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            out_ << (i ? "," : "") << v(i);
    }
    template <class T>
    void put(const T& v)
    {
        out_ << v;
    }

    std::ostringstream out_;
};

inline std::vector<std::string> numbered(const std::string& stem, int n)
{
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i)
        v.push_back(stem + std::to_string(i));
    return v;
}

}  // namespace atlasgraph::io
