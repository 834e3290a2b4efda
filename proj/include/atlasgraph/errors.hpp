#pragma once

#include <stdexcept>
#include <string>

namespace atlasgraph {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ChartMismatch : public Error {
public:
    using Error::Error;
};

class DegenerateMetric : public Error {
public:
    using Error::Error;
};

class NotSpd : public Error {
public:
    using Error::Error;
};

class NotInChart : public Error {
public:
    using Error::Error;
};

class RankDeficient : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class GraphError : public Error {
public:
    using Error::Error;
};

class SampleOutsideChart : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace atlasgraph
