#pragma once

#include <stdexcept>
#include <string>

namespace sepcr {

// Base for all library errors so callers can catch one type at the boundary.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- data ingestion ---
struct MalformedRow : Error {
    using Error::Error;
};
struct SchemaMismatch : Error {
    using Error::Error;
};
struct DuplicateInterval : Error {
    using Error::Error;
};
struct IndexOutOfRange : Error {
    using Error::Error;
};

// --- graphs ---
struct ParseError : Error {
    using Error::Error;
};
struct CycleDetected : Error {
    using Error::Error;
};
struct BadDeterministicEdge : Error {
    using Error::Error;
};
struct NoDecomposition : Error {
    using Error::Error;
};
struct UnknownNode : Error {
    using Error::Error;
};
struct IncompletePartition : Error {
    using Error::Error;
};
struct TooManyCovariates : Error {
    using Error::Error;
};

// --- model fitting ---
struct UnknownCovariate : Error {
    using Error::Error;
};
struct EmptyRiskSet : Error {
    using Error::Error;
};
struct Separation : Error {
    using Error::Error;
};
struct SingularInformation : Error {
    using Error::Error;
};
struct NonConvergence : Error {
    using Error::Error;
};
struct NotConverged : Error {
    using Error::Error;
};

// --- weights / estimation ---
struct PositivityBreach : Error {
    using Error::Error;
};
struct PartitionMismatch : Error {
    using Error::Error;
};
struct OffsetOutOfRange : Error {
    using Error::Error;
};
struct NoSubjectsInArm : Error {
    using Error::Error;
};
struct MissingRegime : Error {
    using Error::Error;
};
struct ContinuousCovariate : Error {
    using Error::Error;
};
struct EmptyCell : Error {
    using Error::Error;
};
struct ResampleFitFailure : Error {
    using Error::Error;
};

// --- oracle / simulation ---
struct InvalidDgp : Error {
    using Error::Error;
};
struct StateSpaceTooLarge : Error {
    using Error::Error;
};
struct UndefinedConditional : Error {
    using Error::Error;
};

// --- configuration / CLI ---
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace sepcr
