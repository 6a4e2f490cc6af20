#include "twinbridge/error.hpp"

#include <array>
#include <utility>

namespace twinbridge {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 21> kNames{{
    {ErrorCode::UnknownDevice, "UNKNOWN_DEVICE"},
    {ErrorCode::KindMismatch, "KIND_MISMATCH"},
    {ErrorCode::OutOfRange, "OUT_OF_RANGE"},
    {ErrorCode::MalformedJson, "MALFORMED_JSON"},
    {ErrorCode::MissingField, "MISSING_FIELD"},
    {ErrorCode::BadType, "BAD_TYPE"},
    {ErrorCode::NoData, "NO_DATA"},
    {ErrorCode::UnknownZone, "UNKNOWN_ZONE"},
    {ErrorCode::ConfigInvalid, "CONFIG_INVALID"},
    {ErrorCode::OriginTimeout, "ORIGIN_TIMEOUT"},
    {ErrorCode::OriginError, "ORIGIN_ERROR"},
    {ErrorCode::StaleUpdate, "STALE_UPDATE"},
    {ErrorCode::VizMismatch, "VIZ_MISMATCH"},
    {ErrorCode::SubscriberLagged, "SUBSCRIBER_LAGGED"},
    {ErrorCode::NanInput, "NAN_INPUT"},
    {ErrorCode::NegativeWind, "NEGATIVE_WIND"},
    {ErrorCode::NegativeRpm, "NEGATIVE_RPM"},
    {ErrorCode::TargetUnreachable, "TARGET_UNREACHABLE"},
    {ErrorCode::PortInUse, "PORT_IN_USE"},
    {ErrorCode::StartupTimeout, "STARTUP_TIMEOUT"},
    {ErrorCode::Unreachable, "UNREACHABLE"},
}};

std::string compose_message(ErrorCode code, const std::string& detail) {
  std::string msg{to_string(code)};
  if (!detail.empty()) {
    msg += '(';
    msg += detail;
    msg += ')';
  }
  return msg;
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "UNKNOWN";
}

std::optional<ErrorCode> error_code_from_string(std::string_view text) {
  for (const auto& [c, name] : kNames) {
    if (name == text) return c;
  }
  return std::nullopt;
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownDevice:
    case ErrorCode::UnknownZone:
    case ErrorCode::NoData:
      return 404;
    case ErrorCode::KindMismatch:
    case ErrorCode::OutOfRange:
    case ErrorCode::VizMismatch:
      return 422;
    case ErrorCode::StaleUpdate:
      return 409;
    case ErrorCode::OriginTimeout:
      return 504;
    case ErrorCode::OriginError:
    case ErrorCode::Unreachable:
      return 502;
    case ErrorCode::SubscriberLagged:
    case ErrorCode::PortInUse:
    case ErrorCode::StartupTimeout:
    case ErrorCode::TargetUnreachable:
      return 500;
    default:
      return 400;
  }
}

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(compose_message(code, detail)),
      code_(code),
      detail_(std::move(detail)) {}

}  // namespace twinbridge
