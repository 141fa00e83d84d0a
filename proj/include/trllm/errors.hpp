#pragma once

#include <stdexcept>
#include <string>

namespace trllm {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Problems with input data (files, fixtures, datasets). The CLI maps these to exit code 3.
class DataError : public Error {
public:
  using Error::Error;
};

class ParseError : public DataError {
public:
  using DataError::DataError;
};

class ValidationError : public DataError {
public:
  using DataError::DataError;
};

class DimensionError : public DataError {
public:
  using DataError::DataError;
};

// Weight container: bad magic, version or dtype.
class FormatError : public DataError {
public:
  using DataError::DataError;
};

// Weight container: payload shorter than declared.
class LengthError : public DataError {
public:
  using DataError::DataError;
};

// A tensor required by the network layout is missing.
class SchemaError : public DataError {
public:
  using DataError::DataError;
};

class ShapeError : public DataError {
public:
  using DataError::DataError;
};

class GenerationError : public DataError {
public:
  using DataError::DataError;
};

class DegenerateInputError : public DataError {
public:
  using DataError::DataError;
};

class IoError : public DataError {
public:
  using DataError::DataError;
};

// A caller broke a documented precondition.
class ContractError : public DataError {
public:
  using DataError::DataError;
};

// Failures talking to a model endpoint. The CLI maps these to exit code 4.
class EndpointError : public Error {
public:
  using Error::Error;
};

// Connection failure or retries exhausted.
class TransportError : public EndpointError {
public:
  using EndpointError::EndpointError;
};

// Response body is not the expected JSON shape.
class ProtocolError : public EndpointError {
public:
  using EndpointError::EndpointError;
};

// Non-retryable HTTP 4xx.
class RequestError : public EndpointError {
public:
  using EndpointError::EndpointError;
  RequestError(int status, const std::string& what) : EndpointError(what), status_(status) {}
  int status() const { return status_; }

private:
  int status_ = 0;
};

}  // namespace trllm
