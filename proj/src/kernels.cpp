#include "vcph/kernels.hpp"

#include "vcph/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace vcph {

double eval(Kernel k, double x) {
    switch (k.kind) {
    case KernelKind::gaussian:
        return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    case KernelKind::epanechnikov:
        return std::abs(x) < 1.0 ? 0.75 * (1.0 - x * x) : 0.0;
    }
    return 0.0;
}

double eval_scaled(Kernel k, double x, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("bandwidth must be positive");
    return eval(k, x / h) / h;
}

double moment(Kernel k, KernelMoment which) {
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    if (k.kind == KernelKind::gaussian) {
        switch (which) {
        case KernelMoment::mu2: return 1.0;
        case KernelMoment::nu0: return 1.0 / (2.0 * sqrt_pi);
        case KernelMoment::nu2: return 1.0 / (4.0 * sqrt_pi);
        }
    }
    switch (which) {
    case KernelMoment::mu2: return 0.2;
    case KernelMoment::nu0: return 0.6;
    case KernelMoment::nu2: return 3.0 / 35.0;
    }
    return 0.0;
}

double effective_radius(Kernel k) { return k.kind == KernelKind::gaussian ? 3.0 : 1.0; }

std::string_view kernel_name(Kernel k) {
    return k.kind == KernelKind::gaussian ? "gaussian" : "epanechnikov";
}

Kernel parse_kernel(std::string_view name) {
    if (name == "gaussian") return gaussian_kernel;
    if (name == "epanechnikov") return epanechnikov_kernel;
    throw ArgumentError("unknown kernel '" + std::string(name) + "'");
}

} // namespace vcph
