#pragma once

// Flat test atlases in R^3 shared by the unit suites.

#include "atlasgraph/atlas.hpp"

namespace fixture {

using namespace atlasgraph;
using charts::BoundaryQuartic;
using charts::QuadraticChart;

// Flat chart of the plane z = 0 in R^3 with a disc boundary of radius r
// around the given centre.
inline QuadraticChart plane_chart(int id, double cx, double cy, double angle, double r)
{
    QuadraticChart ch;
    ch.id = id;
    ch.L = Mat::Zero(3, 2);
    ch.L(0, 0) = std::cos(angle);
    ch.L(1, 0) = std::sin(angle);
    ch.L(0, 1) = -std::sin(angle);
    ch.L(1, 1) = std::cos(angle);
    ch.M = Mat::Zero(3, 1);
    ch.M(2, 0) = 1.0;
    ch.K = Mat::Zero(1, 4);
    ch.c = Vec::Zero(3);
    ch.c(0) = cx;
    ch.c(1) = cy;
    ch.a = Vec::Zero(1);
    ch.radius = r;
    return ch;
}

inline BoundaryQuartic disc_quartic(double r)
{
    BoundaryQuartic q;
    q.A4 = Mat::Zero(4, 4);
    q.A3 = Mat::Zero(2, 4);
    q.A2a = Vec::Zero(4);
    q.A2b = Mat::Identity(2, 2);
    q.A1 = Vec::Zero(2);
    q.a0 = -r * r;
    return q;
}

inline QuadraticAtlas single_plane(double r)
{
    QuadraticAtlas a;
    a.ambient_dim = 3;
    a.manifold_dim = 2;
    a.charts = {plane_chart(0, 0, 0, 0, r)};
    a.quartics = {disc_quartic(r)};
    a.adjacency = {{}};
    return a;
}

// Two overlapping rotated charts of the plane; each owns one half-plane.
inline QuadraticAtlas split_plane()
{
    QuadraticAtlas a;
    a.ambient_dim = 3;
    a.manifold_dim = 2;
    a.charts = {plane_chart(0, -0.5, 0.0, 0.3, 1.2), plane_chart(1, 0.5, 0.1, -0.7, 1.2)};
    for (int i = 0; i < 2; ++i) {
        const auto& ch = a.charts[i];
        // chart 0 owns x < 0 and chart 1 owns x > 0; the grid cube bounds the rest
        BoundaryQuartic q = disc_quartic(0.0);
        Vec ex = Vec::Zero(3);
        ex(0) = i == 0 ? 1.0 : -1.0;
        q.A2b.setZero();
        q.A1 = ch.L.transpose() * ex;
        q.a0 = ex.dot(ch.c);
        a.quartics.push_back(q);
    }
    a.adjacency = {{1}, {0}};
    return a;
}

}  // namespace fixture
