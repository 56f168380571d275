#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scaptcha {

enum class ErrorKind {
  MalformedWav,
  UnsupportedFormat,
  IoError,
  EmptyInput,
  LengthMismatch,
  InvalidFraction,
  AlphaOutOfRange,
  EmptyCorpus,
  RemoteUnavailable,
  RateLimited,
  AuthFailure,
  InputUnrecognized,
  MixedSampleRates,
  UnsuccessfulResult,
  ParseError,
  UnknownPhoneme,
  OutOfVocabulary,
  NoSegmentsFound,
  DimensionMismatch,
  DegenerateClasses,
  MissingCraftedLabel,
  InvalidArgument,
  UsageError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers can decide
/// between pausing, skipping and aborting without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class OutOfVocabularyError : public Error {
 public:
  explicit OutOfVocabularyError(std::vector<std::string> words);

  const std::vector<std::string>& words() const noexcept { return words_; }

 private:
  std::vector<std::string> words_;
};

}  // namespace scaptcha
