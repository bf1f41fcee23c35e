#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace psteer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define PSTEER_DECLARE_ERROR(Name)                 \
    class Name : public Error {                    \
    public:                                        \
        using Error::Error;                        \
    }

PSTEER_DECLARE_ERROR(ContractViolation);
PSTEER_DECLARE_ERROR(TransportError);
PSTEER_DECLARE_ERROR(EmptyPrefillError);
PSTEER_DECLARE_ERROR(UnsupportedOptionError);
PSTEER_DECLARE_ERROR(DegenerateDirectionError);
PSTEER_DECLARE_ERROR(InsufficientDataError);
PSTEER_DECLARE_ERROR(EnumerationBoundError);
PSTEER_DECLARE_ERROR(BatteryConstructionError);
PSTEER_DECLARE_ERROR(UndefinedAlignmentError);
PSTEER_DECLARE_ERROR(JudgeFormatError);
PSTEER_DECLARE_ERROR(TrainingError);
PSTEER_DECLARE_ERROR(ConfigError);
PSTEER_DECLARE_ERROR(CheckpointError);

#undef PSTEER_DECLARE_ERROR

enum class Direction { up, down };
enum class ExtractionMode { b, s };
enum class Method { L1LI, L1ZI, L2LI, L2ZI, MDB, MDS };
enum class Regularization { L1, L2 };
enum class Intercept { LI, ZI };

inline constexpr std::array<Method, 6> kAllMethods{Method::L1LI, Method::L1ZI, Method::L2LI,
                                                   Method::L2ZI, Method::MDB,  Method::MDS};
inline constexpr std::array<Direction, 2> kBothDirections{Direction::up, Direction::down};

/// OCEAN trait ids in canonical order.
inline const std::array<std::string, 5> kOceanTraits{"O", "C", "E", "A", "N"};

std::string to_string(Direction d);
std::string to_string(ExtractionMode m);
std::string to_string(Method m);
std::string to_string(Regularization r);
std::string to_string(Intercept i);

Direction direction_from_string(std::string_view s);
ExtractionMode mode_from_string(std::string_view s);
Method method_from_string(std::string_view s);

/// Probe method for a (regularization, intercept) pair.
Method probe_method(Regularization r, Intercept i);

/// Sign that maps a direction onto "improvement": +1 for up, -1 for down.
inline int sign_of(Direction d) { return d == Direction::up ? 1 : -1; }

/// Hex-encoded SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Shortest round-trippable decimal rendering of a double.
std::string format_number(double x);

}  // namespace psteer
