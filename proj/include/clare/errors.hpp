#pragma once

#include <stdexcept>
#include <string>

namespace clare {

// Base of every error raised by the library. Each subclass maps to one
// failure category so callers (and tests) can discriminate by type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
  using Error::Error;
};
class FormatError : public Error {
  using Error::Error;
};
class UnsupportedVersionError : public Error {
  using Error::Error;
};
class CorruptFileError : public Error {
  using Error::Error;
};
class DataError : public Error {
  using Error::Error;
};
class ConfigError : public Error {
  using Error::Error;
};
class QuotaError : public Error {
  using Error::Error;
};
class ShapeError : public Error {
  using Error::Error;
};
class LabelError : public Error {
  using Error::Error;
};
class ExpansionError : public Error {
  using Error::Error;
};
class ScheduleError : public Error {
  using Error::Error;
};
class MetricError : public Error {
  using Error::Error;
};
class EvaluationError : public Error {
  using Error::Error;
};
class AggregationError : public Error {
  using Error::Error;
};

}  // namespace clare
