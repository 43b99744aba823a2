#include "clonemator/error.hpp"

namespace clonemator {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ScaleOutOfRange: return "ScaleOutOfRange";
        case ErrorCode::EmptyTag: return "EmptyTag";
        case ErrorCode::UnknownEntity: return "UnknownEntity";
        case ErrorCode::NotAClone: return "NotAClone";
        case ErrorCode::SameObject: return "SameObject";
        case ErrorCode::NoSnapAnchor: return "NoSnapAnchor";
        case ErrorCode::UnknownRecording: return "UnknownRecording";
        case ErrorCode::AlreadyGrouped: return "AlreadyGrouped";
        case ErrorCode::TooFewMembers: return "TooFewMembers";
        case ErrorCode::CannotRemoveControlledBody: return "CannotRemoveControlledBody";
        case ErrorCode::EmptyUndoStack: return "EmptyUndoStack";
        case ErrorCode::NotStatic: return "NotStatic";
        case ErrorCode::BadTimestep: return "BadTimestep";
        case ErrorCode::AlreadyRecording: return "AlreadyRecording";
        case ErrorCode::NotRecording: return "NotRecording";
        case ErrorCode::EmptyRecording: return "EmptyRecording";
        case ErrorCode::ScopeViolation: return "ScopeViolation";
        case ErrorCode::SelfReplayActive: return "SelfReplayActive";
        case ErrorCode::HandOccupied: return "HandOccupied";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::UnresolvedName: return "UnresolvedName";
        case ErrorCode::SceneLoadError: return "SceneLoadError";
        case ErrorCode::PortInUse: return "PortInUse";
        case ErrorCode::ControllerTaken: return "ControllerTaken";
        case ErrorCode::NotController: return "NotController";
        case ErrorCode::OutOfOrderSeq: return "OutOfOrderSeq";
        case ErrorCode::MalformedPayload: return "MalformedPayload";
    }
    return "Unknown";
}

}  // namespace clonemator
