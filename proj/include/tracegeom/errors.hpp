// Error taxonomy. Two trunk categories drive CLI exit codes: configuration
// problems (bad input, exit 2) and computation problems (budget, precision,
// domain violations discovered mid-run, exit 3).
#pragma once

#include <stdexcept>
#include <string>

namespace tracegeom {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ComputationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- configuration trunk ----------------------------------------------------
struct ReduciblePolynomial : ConfigError { using ConfigError::ConfigError; };
struct BasisNotARing : ConfigError { using ConfigError::ConfigError; };
struct DiscriminantMismatch : ConfigError { using ConfigError::ConfigError; };
struct UnsupportedDegree : ConfigError { using ConfigError::ConfigError; };
struct InvalidSetting : ConfigError { using ConfigError::ConfigError; };
struct WindowMismatch : ConfigError { using ConfigError::ConfigError; };

// -- computation trunk ------------------------------------------------------
struct IndexDivisorUnsupported : ComputationError { using ComputationError::ComputationError; };
struct OverflowGuard : ComputationError { using ComputationError::ComputationError; };
struct InsufficientPrecision : ComputationError { using ComputationError::ComputationError; };
struct CentralElement : ComputationError { using ComputationError::ComputationError; };
struct NonIntegerIndex : ComputationError { using ComputationError::ComputationError; };
struct EnumerationBudgetExceeded : ComputationError { using ComputationError::ComputationError; };
struct UnsupportedRadius : ComputationError { using ComputationError::ComputationError; };
struct PrecisionExhausted : ComputationError { using ComputationError::ComputationError; };
struct TruncationTooSmall : ComputationError { using ComputationError::ComputationError; };
struct CentralTrace : ComputationError { using ComputationError::ComputationError; };
struct FactorizationBudget : ComputationError { using ComputationError::ComputationError; };
struct NonRegular : ComputationError { using ComputationError::ComputationError; };

}  // namespace tracegeom
