#include "codemix/errors.hpp"

namespace codemix {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::InvalidUtf8: return "InvalidUtf8";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::RowNotStochastic: return "RowNotStochastic";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::UnsegmentableLine: return "UnsegmentableLine";
    case ErrorKind::TargetTooSmall: return "TargetTooSmall";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::MalformedVocabRow: return "MalformedVocabRow";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::ClassTooSmall: return "ClassTooSmall";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidRate: return "InvalidRate";
    case ErrorKind::BatchTooSmall: return "BatchTooSmall";
    case ErrorKind::TargetOutOfRange: return "TargetOutOfRange";
    case ErrorKind::IdOutOfRange: return "IdOutOfRange";
    case ErrorKind::StreamTooShort: return "StreamTooShort";
    case ErrorKind::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorKind::SingleClassTrainSet: return "SingleClassTrainSet";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptManifest: return "CorruptManifest";
    case ErrorKind::TruncatedPayload: return "TruncatedPayload";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
  }
  return "Unknown";
}

}  // namespace codemix
