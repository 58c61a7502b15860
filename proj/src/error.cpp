#include <vmsim/error.hpp>

namespace vmsim {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::TimeBeforeSeriesStart: return "TimeBeforeSeriesStart";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::InvalidSeries: return "InvalidSeries";
    case Errc::NameTooLong: return "NameTooLong";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::InvalidSample: return "InvalidSample";
    case Errc::InvalidName: return "InvalidName";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::NotFound: return "NotFound";
    case Errc::BindFailure: return "BindFailure";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::EventInPast: return "EventInPast";
    case Errc::AlreadyMigrating: return "AlreadyMigrating";
    case Errc::TargetMemoryExhausted: return "TargetMemoryExhausted";
    case Errc::WorkloadMissing: return "WorkloadMissing";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::InvariantViolated: return "InvariantViolated";
    case Errc::UnknownController: return "UnknownController";
    case Errc::NoneNotAllowed: return "NoneNotAllowed";
    case Errc::NoFeasibleServer: return "NoFeasibleServer";
    case Errc::Infeasible: return "Infeasible";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::EmptyFactor: return "EmptyFactor";
    case Errc::OutputUnwritable: return "OutputUnwritable";
    case Errc::RotationFailed: return "RotationFailed";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::HeaderMismatch: return "HeaderMismatch";
    }
    return "Unknown";
}

} // namespace vmsim
