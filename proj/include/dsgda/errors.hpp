#pragma once

#include <stdexcept>
#include <string>

namespace dsgda {

struct InvalidSize : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NotSymmetric : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// lambda in {0, 1}: the C_lambda constant is undefined (0 means the topology
// term vanishes, 1 means the bound diverges); callers special-case both.
struct DegenerateSpectrum : std::domain_error {
  using std::domain_error::domain_error;
};

struct DomainViolation : std::domain_error {
  using std::domain_error::domain_error;
};

struct SaddleOutsideDomain : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConstantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  int line = 0;
  int column = 0;
  ParseError(int line_, int column_, const std::string& reason)
      : std::runtime_error("parse error at line " + std::to_string(line_) +
                           ", column " + std::to_string(column_) + ": " + reason),
        line(line_),
        column(column_) {}
};

struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyReservoir : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& path, const std::string& key, const std::string& reason)
      : std::runtime_error("config error in " + path +
                           (key.empty() ? std::string() : " (key '" + key + "')") + ": " + reason) {}
};

struct StepConditionViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MismatchedShapes : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TooFewSeeds : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyGrid : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InnerSolveFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroModulus : std::domain_error {
  using std::domain_error::domain_error;
};

struct MissingB : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SchemaMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dsgda
