#pragma once

#include <stdexcept>
#include <string>

namespace dde {

// Coarse failure class; the CLI maps it onto its exit code.
enum class ErrorCategory {
    validation,  // bad arguments or configuration
    transport,   // network / catalog access
    integrity,   // data that is present but wrong (checksum, range, format)
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define DDE_DEFINE_ERROR(name, cat)                                   \
    class name : public Error {                                       \
    public:                                                           \
        explicit name(const std::string& what)                        \
            : Error(ErrorCategory::cat, what) {}                      \
    }

DDE_DEFINE_ERROR(ArgumentError, validation);
DDE_DEFINE_ERROR(ConfigError, validation);
DDE_DEFINE_ERROR(ValidationError, validation);
DDE_DEFINE_ERROR(LabelError, validation);
DDE_DEFINE_ERROR(ProjectionError, validation);
DDE_DEFINE_ERROR(GeometryError, integrity);
DDE_DEFINE_ERROR(FormatError, integrity);
DDE_DEFINE_ERROR(MetadataError, integrity);
DDE_DEFINE_ERROR(EmptyRasterError, integrity);
DDE_DEFINE_ERROR(AlignmentError, integrity);
DDE_DEFINE_ERROR(ParseError, integrity);
DDE_DEFINE_ERROR(IntegrityError, integrity);
DDE_DEFINE_ERROR(DegenerateCurveError, integrity);
DDE_DEFINE_ERROR(NoSolutionError, integrity);
DDE_DEFINE_ERROR(WriteError, internal);
DDE_DEFINE_ERROR(IoError, internal);
DDE_DEFINE_ERROR(RenderError, internal);

#undef DDE_DEFINE_ERROR

class TransportError : public Error {
public:
    TransportError(const std::string& what, bool retryable)
        : Error(ErrorCategory::transport, what), retryable_(retryable) {}

    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

}  // namespace dde
