#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace translate {

// Root of every error raised by the library. Subclasses name the violated
// contract so callers (and the CLI) can report precisely what went wrong.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// A cohort (usually the anchor) has no subjects.
class SupportError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row) : Error(what), row_(row) {}
  // 1-based data row (header excluded).
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, std::vector<std::string> columns)
      : Error(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, int cohort) : Error(what), cohort_(cohort) {}
  int cohort() const { return cohort_; }

 private:
  int cohort_;
};

class InsufficientDataError : public Error {
 public:
  InsufficientDataError(const std::string& what, int cohort) : Error(what), cohort_(cohort) {}
  int cohort() const { return cohort_; }

 private:
  int cohort_;
};

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class SubgroupSupportError : public Error {
 public:
  using Error::Error;
};

class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

class PairingError : public Error {
 public:
  using Error::Error;
};

class StudyError : public Error {
 public:
  using Error::Error;
};

}  // namespace translate
