#pragma once

#include <complex>
#include <string>
#include <vector>

#include "indexforms/forms.hpp"

namespace indexforms::zeta {

struct FitDivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Hurwitz zeta by Euler-Maclaurin, remainder below 1e-12 for the supported
/// range (q > 0, s != 1, moderate |s|).
std::complex<double> hurwitz_zeta(std::complex<double> s, double q);

/// Residue of the simple pole of zeta_H(s, q) at s = 1 (analytically 1);
/// extracted numerically from a shrinking ring, as an independent oracle.
double hurwitz_pole_residue(double q);

/// psi-free constant term of zeta_H at s = 1: lim_{s->1} zeta_H(s,q) - 1/(s-1).
double hurwitz_constant_at_pole(double q);

struct HeatExpansionFit {
    std::vector<double> exponents;     // power of t per fitted column
    std::vector<bool> with_log;       // column carries an extra log(t)
    std::vector<double> coefficients;
    double residual = 0;              // max abs residual on the samples
    double condition = 0;             // condition estimate of the design matrix

    /// Coefficient of t^p (log term or not); 0 if the column is absent.
    double coefficient(double p, bool log_term = false) const;
    /// Integral of the fitted expansion times t^{-1/2} over [0, t0].
    double integral_with_sqrt_weight(double t0) const;
};

/// Least-squares fit of samples (t, value) in the span of {t^e} and
/// optionally {t^e log t}. Throws FitDivergenceError when the residual
/// exceeds fit_tol or the design matrix condition exceeds 1e12. With
/// relative_weights each sample is scaled by 1/|value| so the residual and
/// fit_tol are read relatively (for data spanning decades).
HeatExpansionFit heat_trace_expansion_fit(const std::vector<double>& t,
                                          const std::vector<double>& value,
                                          const std::vector<double>& exponent_menu,
                                          bool with_log, double fit_tol = 1e-8,
                                          bool relative_weights = false);

/// Geometric grid with the given endpoints (inclusive).
std::vector<double> geometric_grid(double t_min, double t_max, int count);

}  // namespace indexforms::zeta
