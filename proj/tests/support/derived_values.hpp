#pragma once

// Reference numbers produced by a separate scripted computation
// (double precision, printed with 17 significant digits).
namespace derived {

// Step weights at initialization, logits -t / ln(C + 1).
inline constexpr double kQ1[] = {0.8088716470574221, 0.19112835294257785};
inline constexpr double kQ2[] = {0.6392324347433317, 0.2572449925587782, 0.10352257269789013};
inline constexpr double kQ3[] = {0.5442927089314376, 0.26457893812598465, 0.12861097227868895,
                                 0.06251738066388891};
inline constexpr double kLogitsC2[] = {0.0, -0.9102392266268373, -1.8204784532536746};

// Number of paths of length 1..C over K types.
inline constexpr unsigned long long kPathsK2C2 = 6;
inline constexpr unsigned long long kPathsK3C3 = 39;

// Positional table entry p(1, 0).
inline constexpr double kSin1 = 0.8414709848078965;

// Nadam on a scalar, gradient 1, lr 1e-3, b1 0.9, b2 0.999, eps 1e-8, start 0.
inline constexpr double kNadamTrace[] = {-0.001473684195789474, -0.0026309962836531292,
                                         -0.0037092177587787073};

}  // namespace derived
