#include "scaptcha/error.hpp"

namespace scaptcha {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedWav: return "MalformedWav";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidFraction: return "InvalidFraction";
    case ErrorKind::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::RemoteUnavailable: return "RemoteUnavailable";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::AuthFailure: return "AuthFailure";
    case ErrorKind::InputUnrecognized: return "InputUnrecognized";
    case ErrorKind::MixedSampleRates: return "MixedSampleRates";
    case ErrorKind::UnsuccessfulResult: return "UnsuccessfulResult";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownPhoneme: return "UnknownPhoneme";
    case ErrorKind::OutOfVocabulary: return "OutOfVocabulary";
    case ErrorKind::NoSegmentsFound: return "NoSegmentsFound";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateClasses: return "DegenerateClasses";
    case ErrorKind::MissingCraftedLabel: return "MissingCraftedLabel";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Unknown";
}

namespace {

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ", ";
    out += w;
  }
  return out;
}

}  // namespace

OutOfVocabularyError::OutOfVocabularyError(std::vector<std::string> words)
    : Error(ErrorKind::OutOfVocabulary, join_words(words)), words_(std::move(words)) {}

}  // namespace scaptcha
