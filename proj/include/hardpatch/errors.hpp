#pragma once

#include <stdexcept>
#include <string>

namespace hardpatch {

// Raised before a query would push the ledger past its budget; the ledger
// is never over-charged. Callers that can produce partial results catch
// this and attach best-so-far state.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Backend failure on an oracle boundary: child crash, timeout, transport.
class OracleIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Backend replied, but not in the wire format (e.g. non-integer label).
class ProtocolError : public OracleIoError {
 public:
  using OracleIoError::OracleIoError;
};

// The warped object left the frame entirely; the sampler redraws.
class TransformDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No adversarial starting point could be found (baseline attacks).
class InitializationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Process exit codes used by the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitBudgetExceededPartial = 2,
  kExitInitializationFailure = 3,
  kExitOracleIo = 4,
};

}  // namespace hardpatch
