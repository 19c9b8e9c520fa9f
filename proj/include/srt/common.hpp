#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace srt {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

// Error categories surfaced through the C API as integer status codes.
enum class ErrorCode {
    kInvalidInput = 1,
    kConfigMismatch,
    kInvalidToken,
    kAlreadyWrapped,
    kInvalidSample,
    kParseMiss,
    kDivergence,
    kInvalidConfig,
    kParseError,
    kSchemaError,
    kInvalidSpec,
    kBatchTooLarge,
    kIo,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

// Parameters are stored at float32 precision and computed on in float64.
inline double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

std::string shape_string(const Matrix& m);

}  // namespace srt
