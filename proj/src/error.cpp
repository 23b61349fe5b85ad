#include "selectshare/error.hpp"

namespace selectshare {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::NonFiniteNumber: return "NonFiniteNumber";
    case Errc::DepthExceeded: return "DepthExceeded";
    case Errc::NotAContainer: return "NotAContainer";
    case Errc::MalformedMessage: return "MalformedMessage";
    case Errc::FrameShapeMismatch: return "FrameShapeMismatch";
    case Errc::MessageNotFound: return "MessageNotFound";
    case Errc::EmptyFieldList: return "EmptyFieldList";
    case Errc::InconsistentPaths: return "InconsistentPaths";
    case Errc::WeakSeed: return "WeakSeed";
    case Errc::TooManyMessages: return "TooManyMessages";
    case Errc::EmptyMessageList: return "EmptyMessageList";
    case Errc::MalformedInput: return "MalformedInput";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::InvalidSignature: return "InvalidSignature";
    case Errc::MalformedProof: return "MalformedProof";
    case Errc::InvalidClaims: return "InvalidClaims";
    case Errc::MalformedToken: return "MalformedToken";
    case Errc::MalformedKey: return "MalformedKey";
    case Errc::InvalidClient: return "InvalidClient";
    case Errc::InvalidKeyProof: return "InvalidKeyProof";
    case Errc::MissingAuthorizationDetails: return "MissingAuthorizationDetails";
    case Errc::PolicyEmpty: return "PolicyEmpty";
    case Errc::NotFound: return "NotFound";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::MalformedPolicy: return "MalformedPolicy";
    case Errc::BadSignature: return "BadSignature";
    case Errc::UnknownSigner: return "UnknownSigner";
    case Errc::MixedDevices: return "MixedDevices";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::MalformedInputFile: return "MalformedInputFile";
    case Errc::UploadFailed: return "UploadFailed";
    case Errc::SigningFailed: return "SigningFailed";
    case Errc::MalformedEnvelope: return "MalformedEnvelope";
    case Errc::IssuerUnreachable: return "IssuerUnreachable";
    case Errc::Io: return "Io";
    case Errc::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace selectshare
