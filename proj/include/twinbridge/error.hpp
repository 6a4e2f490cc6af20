#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace twinbridge {

/// Structured reason codes shared by every service. The string form is the
/// wire representation used in `"reason"` fields.
enum class ErrorCode {
  UnknownDevice,
  KindMismatch,
  OutOfRange,
  MalformedJson,
  MissingField,
  BadType,
  NoData,
  UnknownZone,
  ConfigInvalid,
  OriginTimeout,
  OriginError,
  StaleUpdate,
  VizMismatch,
  SubscriberLagged,
  NanInput,
  NegativeWind,
  NegativeRpm,
  TargetUnreachable,
  PortInUse,
  StartupTimeout,
  Unreachable,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view text);

/// HTTP status used when a code crosses a service boundary.
int http_status_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  explicit Error(ErrorCode code, std::string detail = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace twinbridge
