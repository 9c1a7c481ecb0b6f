#ifndef PSD_ERRORS_H_
#define PSD_ERRORS_H_

#include <stdexcept>
#include <string>

namespace psd {

// Malformed or inconsistent input data. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A sense ID string that does not match `<digits>(<alnum>)`.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failure while running a pipeline stage (I/O, encoder faults, divergence).
// The CLI maps this to exit code 3.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace psd

#endif  // PSD_ERRORS_H_
