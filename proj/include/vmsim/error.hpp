#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vmsim {

/// Failure categories raised across the library. The CLI maps these onto
/// exit codes; the batch runner records their names in the ERR file.
enum class Errc {
    // core model
    TimeBeforeSeriesStart,
    EmptySeries,
    InvalidSeries,
    // times store
    NameTooLong,
    BadMagic,
    TruncatedPayload,
    InvalidSample,
    InvalidName,
    StorageFailure,
    NotFound,
    BindFailure,
    ProtocolError,
    // engine
    EventInPast,
    AlreadyMigrating,
    TargetMemoryExhausted,
    WorkloadMissing,
    ConfigInvalid,
    InvariantViolated,
    // controllers
    UnknownController,
    NoneNotAllowed,
    NoFeasibleServer,
    Infeasible,
    // schedule
    InvalidParams,
    ParseError,
    SchemaError,
    // runner
    EmptyFactor,
    OutputUnwritable,
    RotationFailed,
    // analysis
    EmptyInput,
    HeaderMismatch,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace vmsim
