#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace codemix {

/// Failure categories raised by the library. Every library error is a data or
/// contract error; the CLI maps them to exit code 2.
enum class ErrorKind {
  // corpus / IO
  MalformedRow,
  EmptyCorpus,
  InvalidUtf8,
  IoError,
  // markov
  RowNotStochastic,
  OutOfRange,
  LengthMismatch,
  TooShort,
  // tokenizer
  UnsegmentableLine,
  TargetTooSmall,
  UnknownId,
  MalformedVocabRow,
  // textprep
  EmptyDataset,
  ClassTooSmall,
  UnknownLabel,
  // neural
  ShapeMismatch,
  InvalidRate,
  BatchTooSmall,
  TargetOutOfRange,
  // ulmfit
  IdOutOfRange,
  StreamTooShort,
  FingerprintMismatch,
  SingleClassTrainSet,
  VersionMismatch,
  CorruptManifest,
  TruncatedPayload,
  InvalidConfig,
  // metrics
  EmptyMatrix,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::int64_t detail = -1)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Numeric payload: line number, byte offset, row index, id ... (-1 if none).
  std::int64_t detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::int64_t detail_;
};

}  // namespace codemix
