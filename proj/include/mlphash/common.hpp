#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mlphash {

// Row-major so that matrices filled from a value stream have a fixed,
// documented element order (row by row).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// The user's key: seed of every key-derived pseudo-random draw.
struct UserKey {
    std::uint64_t seed = 0;
    friend bool operator==(UserKey a, UserKey b) { return a.seed == b.seed; }
    friend bool operator!=(UserKey a, UserKey b) { return a.seed != b.seed; }
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteInput : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct DegenerateDraw : Error { using Error::Error; };
struct SchemeMismatch : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct ZeroVector : Error { using Error::Error; };
struct InvalidParameter : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct EmptyDistribution : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

struct ParseError : Error {
    long line = 0;
    ParseError(const std::string& msg, long line_no)
        : Error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

struct InsufficientSamples : Error {
    std::string identity_id;
    explicit InsufficientSamples(const std::string& id)
        : Error("identity '" + id + "' needs at least 2 samples (1 enrollment + 1 probe)"),
          identity_id(id) {}
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace mlphash
