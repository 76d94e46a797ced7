#pragma once

#include <stdexcept>
#include <string>

namespace cpm {

// Error taxonomy. Every error class maps to a stable process exit code so
// scripts can dispatch on failures (see tools/cpm.cpp).
class Error : public std::runtime_error {
public:
    Error(std::string what, int exit_code)
        : std::runtime_error(std::move(what)), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

#define CPM_DEFINE_ERROR(Name, code)                                     \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& what) : Error(what, code) {}    \
    }

CPM_DEFINE_ERROR(ArgumentError, 2);
CPM_DEFINE_ERROR(IoError, 3);
CPM_DEFINE_ERROR(ShapeMismatchError, 4);
CPM_DEFINE_ERROR(NotScalarError, 5);
CPM_DEFINE_ERROR(AngleNearPiError, 6);
CPM_DEFINE_ERROR(EmptyCloudError, 7);
CPM_DEFINE_ERROR(PartMissingError, 8);
CPM_DEFINE_ERROR(InvalidRangeError, 9);
CPM_DEFINE_ERROR(InvalidSpecError, 10);
CPM_DEFINE_ERROR(GenerationFailedError, 11);
CPM_DEFINE_ERROR(NoModelForRelationError, 12);
CPM_DEFINE_ERROR(AllPartsMissingError, 13);
CPM_DEFINE_ERROR(DataLeakError, 14);

#undef CPM_DEFINE_ERROR

}  // namespace cpm
