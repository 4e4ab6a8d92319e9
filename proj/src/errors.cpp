#include "visa/errors.hpp"

namespace visa {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoFrames: return "NoFrames";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
    case ErrorCode::CorruptBundle: return "CorruptBundle";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::InvalidFactor: return "InvalidFactor";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidRadius: return "InvalidRadius";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::InvalidIterations: return "InvalidIterations";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::InvalidPath: return "InvalidPath";
    case ErrorCode::InvalidRect: return "InvalidRect";
    case ErrorCode::NotAPacket: return "NotAPacket";
    case ErrorCode::CorruptPacket: return "CorruptPacket";
    case ErrorCode::WrongModel: return "WrongModel";
    case ErrorCode::BadImage: return "BadImage";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace visa
