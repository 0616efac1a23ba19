#pragma once

#include <stdexcept>
#include <string>

namespace sitetrack {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry
struct TooFewPoints final : Error { using Error::Error; };
struct DegenerateConfiguration final : Error { using Error::Error; };
struct PointAtInfinity final : Error { using Error::Error; };

// radio
struct DegenerateGeometry final : Error { using Error::Error; };
struct OutOfBand final : Error { using Error::Error; };
struct EmptyGrid final : Error { using Error::Error; };

// inertial
struct DegenerateCalibration final : Error { using Error::Error; };

// social force
struct CoincidentCenters final : Error { using Error::Error; };

// filtering
struct NonPsdCovariance final : Error { using Error::Error; };
struct SingularInnovation final : Error { using Error::Error; };
struct DimensionMismatch final : Error { using Error::Error; };
struct UnknownTarget final : Error { using Error::Error; };

// metrics
struct NoOverlap final : Error { using Error::Error; };
struct EmptyInput final : Error { using Error::Error; };

// config / io
struct InvalidConfig final : Error { using Error::Error; };
struct IoError final : Error { using Error::Error; };

}  // namespace sitetrack
