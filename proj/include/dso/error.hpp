#pragma once

#include <stdexcept>
#include <string>

namespace dso {

// Every failure the toolkit can report. The CLI maps these onto exit codes
// and machine-readable error JSON, so the set is closed and named.
enum class ErrorKind {
    MalformedPtx,
    EmptyTrace,
    OutOfRange,
    SchemaMismatch,
    NonPositivePower,
    EtaOutOfRange,
    VoltageBelowKappa,
    FrequencyBelowKappa,
    RankDeficient,
    Underdetermined,
    DatasetTooSmall,
    InvalidArgument,
    InvalidModel,
    IoError,
};

inline const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedPtx:        return "MalformedPtx";
        case ErrorKind::EmptyTrace:          return "EmptyTrace";
        case ErrorKind::OutOfRange:          return "OutOfRange";
        case ErrorKind::SchemaMismatch:      return "SchemaMismatch";
        case ErrorKind::NonPositivePower:    return "NonPositivePower";
        case ErrorKind::EtaOutOfRange:       return "EtaOutOfRange";
        case ErrorKind::VoltageBelowKappa:   return "VoltageBelowKappa";
        case ErrorKind::FrequencyBelowKappa: return "FrequencyBelowKappa";
        case ErrorKind::RankDeficient:       return "RankDeficient";
        case ErrorKind::Underdetermined:     return "Underdetermined";
        case ErrorKind::DatasetTooSmall:     return "DatasetTooSmall";
        case ErrorKind::InvalidArgument:     return "InvalidArgument";
        case ErrorKind::InvalidModel:        return "InvalidModel";
        case ErrorKind::IoError:             return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind),
          message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

} // namespace dso
