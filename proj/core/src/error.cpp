#include "tbm/error.hpp"

namespace tbm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::AllZeroVolume: return "AllZeroVolume";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorKind::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorKind::NotNifti1: return "NotNifti1";
    case ErrorKind::DimensionalityOutOfRange: return "DimensionalityOutOfRange";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::EmptyCohort: return "EmptyCohort";
    case ErrorKind::NonDiffeomorphicMap: return "NonDiffeomorphicMap";
    case ErrorKind::RankTooLarge: return "RankTooLarge";
    case ErrorKind::ConstantCovariate: return "ConstantCovariate";
    case ErrorKind::SingularPenalty: return "SingularPenalty";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::MassMismatch: return "MassMismatch";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace tbm
