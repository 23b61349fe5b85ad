#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace selectshare {

enum class Errc {
  // canonical
  DuplicateKey,
  NonFiniteNumber,
  DepthExceeded,
  NotAContainer,
  MalformedMessage,
  // framing
  FrameShapeMismatch,
  MessageNotFound,
  EmptyFieldList,
  InconsistentPaths,
  // bbs
  WeakSeed,
  TooManyMessages,
  EmptyMessageList,
  MalformedInput,
  IndexOutOfRange,
  InvalidSignature,
  MalformedProof,
  // credential / jose
  InvalidClaims,
  MalformedToken,
  MalformedKey,
  // issuer
  InvalidClient,
  InvalidKeyProof,
  MissingAuthorizationDetails,
  PolicyEmpty,
  NotFound,
  Unauthorized,
  MalformedPolicy,
  // storage
  BadSignature,
  UnknownSigner,
  // transcoder
  MixedDevices,
  EmptyInput,
  MalformedInputFile,
  UploadFailed,
  SigningFailed,
  // proxy
  MalformedEnvelope,
  IssuerUnreachable,
  // plumbing
  Io,
  Config,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a machine-readable code; `what()` is the human message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  explicit Error(Errc code) : Error(code, std::string(to_string(code))) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace selectshare
