#pragma once

#include <string_view>

namespace vcph {

enum class KernelKind { gaussian, epanechnikov };

// mu2 = int x^2 K, nu0 = int K^2, nu2 = int x^2 K^2
enum class KernelMoment { mu2, nu0, nu2 };

struct Kernel {
    KernelKind kind = KernelKind::gaussian;
    friend bool operator==(const Kernel&, const Kernel&) = default;
};

inline constexpr Kernel gaussian_kernel{KernelKind::gaussian};
inline constexpr Kernel epanechnikov_kernel{KernelKind::epanechnikov};

double eval(Kernel k, double x);

// K_h(x) = K(x / h) / h; throws ArgumentError unless h > 0.
double eval_scaled(Kernel k, double x, double h);

double moment(Kernel k, KernelMoment which);

// Half-width (in units of h) of the region treated as the local
// neighborhood: the support for compact kernels, 3 for the Gaussian.
double effective_radius(Kernel k);

std::string_view kernel_name(Kernel k);
Kernel parse_kernel(std::string_view name);

} // namespace vcph
