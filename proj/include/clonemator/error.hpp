#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clonemator {

enum class ErrorCode {
    InvalidArgument,
    ScaleOutOfRange,
    EmptyTag,
    UnknownEntity,
    NotAClone,
    SameObject,
    NoSnapAnchor,
    UnknownRecording,
    AlreadyGrouped,
    TooFewMembers,
    CannotRemoveControlledBody,
    EmptyUndoStack,
    NotStatic,
    BadTimestep,
    AlreadyRecording,
    NotRecording,
    EmptyRecording,
    ScopeViolation,
    SelfReplayActive,
    HandOccupied,
    ParseError,
    ValidationError,
    UnresolvedName,
    SceneLoadError,
    PortInUse,
    ControllerTaken,
    NotController,
    OutOfOrderSeq,
    MalformedPayload,
};

std::string_view to_string(ErrorCode code);

class EngineError : public std::runtime_error {
public:
    EngineError(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace clonemator
