#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kg2t {

// Base of every error raised by the library. `kind()` is the stable error
// name used in CLI diagnostics and HTTP error bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define KG2T_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what) : Error(#Name, what) {}           \
  }

// kg-model
class MalformedRecord : public Error {
 public:
  MalformedRecord(const std::string& what, std::size_t byte_offset)
      : Error("MalformedRecord",
              what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};
KG2T_DEFINE_ERROR(BadRatios);
KG2T_DEFINE_ERROR(DuplicateNameId);

// template-engine
class DslSyntaxError : public Error {
 public:
  DslSyntaxError(const std::string& what, std::size_t line)
      : Error("DslSyntaxError", "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};
KG2T_DEFINE_ERROR(UnknownPlaceholderProperty);
KG2T_DEFINE_ERROR(NoCoverage);
KG2T_DEFINE_ERROR(EmptyPlan);
KG2T_DEFINE_ERROR(UnknownIrregular);
KG2T_DEFINE_ERROR(UnfilledPlaceholder);

// grammar-eval
KG2T_DEFINE_ERROR(ServiceUnavailable);
KG2T_DEFINE_ERROR(MalformedResponse);

// judgement-stats
KG2T_DEFINE_ERROR(EmptyInput);
KG2T_DEFINE_ERROR(DegenerateSample);
KG2T_DEFINE_ERROR(SampleSizeOutOfRange);
KG2T_DEFINE_ERROR(TableTooLarge);
KG2T_DEFINE_ERROR(JoinMismatch);
KG2T_DEFINE_ERROR(MalformedCsv);

// survey-service
KG2T_DEFINE_ERROR(SizeMismatch);
KG2T_DEFINE_ERROR(UnknownSession);
KG2T_DEFINE_ERROR(DuplicateRating);
KG2T_DEFINE_ERROR(NotServed);
KG2T_DEFINE_ERROR(CapExceeded);

#undef KG2T_DEFINE_ERROR

}  // namespace kg2t
