#include "branchsim/error.hpp"

namespace branchsim
{
    std::string_view to_string(ErrorCode code) noexcept
    {
        switch (code)
        {
        case ErrorCode::InvalidSeed: return "InvalidSeed";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::UnstableParams: return "UnstableParams";
        case ErrorCode::NumericFault: return "NumericFault";
        case ErrorCode::OutOfOrderAppend: return "OutOfOrderAppend";
        case ErrorCode::StepNotStored: return "StepNotStored";
        case ErrorCode::CorruptStore: return "CorruptStore";
        case ErrorCode::NotYetSimulated: return "NotYetSimulated";
        case ErrorCode::DuplicateBranch: return "DuplicateBranch";
        case ErrorCode::InvalidAnnotation: return "InvalidAnnotation";
        case ErrorCode::InvalidObservation: return "InvalidObservation";
        case ErrorCode::InvalidClassCount: return "InvalidClassCount";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::TreeIncomplete: return "TreeIncomplete";
        case ErrorCode::CorruptLineage: return "CorruptLineage";
        case ErrorCode::InvalidWorkerCount: return "InvalidWorkerCount";
        case ErrorCode::InvalidProbe: return "InvalidProbe";
        case ErrorCode::InvalidRange: return "InvalidRange";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::NodeBusy: return "NodeBusy";
        }
        return "Unknown";
    }

    Error::Error(ErrorCode code, const std::string &detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail)
    {
    }

    void fail(ErrorCode code, const std::string &detail)
    {
        throw Error(code, detail);
    }
}
