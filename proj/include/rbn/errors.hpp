#ifndef RBN_ERRORS_HPP
#define RBN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rbn {

/* All library failures derive from rbn::Error so callers (the CLI in
 * particular) can map them onto exit codes in one place. */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define RBN_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                  \
    public:                                                      \
        explicit Name(const std::string& what) : Error(what) {}  \
    }

RBN_DEFINE_ERROR(StructureError);
RBN_DEFINE_ERROR(IndexError);
RBN_DEFINE_ERROR(CapacityError);
RBN_DEFINE_ERROR(ShapeError);
RBN_DEFINE_ERROR(DomainError);
RBN_DEFINE_ERROR(EmptyWeightError);
RBN_DEFINE_ERROR(DegenerateSketchError);
RBN_DEFINE_ERROR(StepSizeError);
RBN_DEFINE_ERROR(ScheduleError);
RBN_DEFINE_ERROR(CorruptionError);
RBN_DEFINE_ERROR(IoError);

#undef RBN_DEFINE_ERROR

/* Raised when some parental configuration never occurs in the sample set;
 * carries the offending flat index. */
class DegenerateConfigError : public Error {
public:
    DegenerateConfigError(std::size_t config, const std::string& what) : Error(what), config_(config) {}
    std::size_t config() const { return config_; }

private:
    std::size_t config_;
};

} // namespace rbn

#endif
