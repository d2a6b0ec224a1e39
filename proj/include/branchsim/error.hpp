#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace branchsim
{
    enum class ErrorCode
    {
        InvalidSeed,
        InvalidParams,
        UnstableParams,
        NumericFault,
        OutOfOrderAppend,
        StepNotStored,
        CorruptStore,
        NotYetSimulated,
        DuplicateBranch,
        InvalidAnnotation,
        InvalidObservation,
        InvalidClassCount,
        UnknownNode,
        TreeIncomplete,
        CorruptLineage,
        InvalidWorkerCount,
        InvalidProbe,
        InvalidRange,
        InvalidConfig,
        NodeBusy,
    };

    std::string_view to_string(ErrorCode code) noexcept;

    // Every failure surfaced by the library carries one of the codes above; the
    // service maps codes to HTTP statuses and the CLI to exit codes.
    class Error : public std::runtime_error
    {
    public:
        Error(ErrorCode code, const std::string &detail);

        ErrorCode code() const noexcept { return code_; }
        const std::string &detail() const noexcept { return detail_; }

    private:
        ErrorCode code_;
        std::string detail_;
    };

    [[noreturn]] void fail(ErrorCode code, const std::string &detail);
}
