#ifndef QWF_ERRORS_HPP
#define QWF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qwf {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define QWF_DEFINE_ERROR(Name)                                              \
    struct Name : Error {                                                   \
        explicit Name(const std::string& msg = #Name) : Error(msg) {}       \
    }

QWF_DEFINE_ERROR(NonSymmetric);
QWF_DEFINE_ERROR(NoConvergence);
QWF_DEFINE_ERROR(SingularCh);
QWF_DEFINE_ERROR(DimensionMismatch);
QWF_DEFINE_ERROR(RepeatedEigenvalue);
QWF_DEFINE_ERROR(IllConditionedVandermonde);
QWF_DEFINE_ERROR(EigenFailure);
QWF_DEFINE_ERROR(SingularEntry);
QWF_DEFINE_ERROR(RepeatedNode);
QWF_DEFINE_ERROR(UnknownFamily);
QWF_DEFINE_ERROR(BadParams);
QWF_DEFINE_ERROR(NotIntegrable);
QWF_DEFINE_ERROR(SingularOperator);
QWF_DEFINE_ERROR(NonFinite);
QWF_DEFINE_ERROR(SingularS);
QWF_DEFINE_ERROR(SingularV0);
QWF_DEFINE_ERROR(NotSPD);
QWF_DEFINE_ERROR(Blowup);
QWF_DEFINE_ERROR(BranchTrackingFailure);
QWF_DEFINE_ERROR(TailTooHeavy);
QWF_DEFINE_ERROR(DomainError);
QWF_DEFINE_ERROR(QuadratureNotConverged);
QWF_DEFINE_ERROR(ShapeMismatch);
QWF_DEFINE_ERROR(BandwidthTooSmall);
QWF_DEFINE_ERROR(RootBracketFailure);
QWF_DEFINE_ERROR(NonPositiveMass);
QWF_DEFINE_ERROR(DegenerateJN);
QWF_DEFINE_ERROR(DependentPins);
QWF_DEFINE_ERROR(DifferentiationUnstable);

#undef QWF_DEFINE_ERROR

} // namespace qwf

#endif
