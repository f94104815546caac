#pragma once

namespace quadpost {

/// log of psi(rho) = rho^(2-n) * exp(-rho^2/2 - c/(2 rho^2)), the inner
/// radial integrand after marginalizing the regression coefficients.
double log_rho_integrand(double rho, double c, double n);

/// Location of the maximum of psi: the positive root of
/// rho^4 + rho^2 (n - 2) - c = 0, evaluated in a cancellation-free form.
/// Returns 0 when c == 0 and n >= 2 (the integrand peaks at the origin).
double rho_peak(double c, double n);

struct RhoBounds {
    double lo = 0.0;
    double hi = 0.0;
};

/// Truncation bounds for the radial integral: psi(lo) and psi(hi) are below
/// the peak value by at least drop_factor. The upper bound is bisected from
/// a seed interval of 40 Laplace standard deviations (doubling the offset up
/// to 60 times if the seed does not bracket); the lower bound is bisected on
/// (0, rho_peak). For c == 0 with n >= 2 the integrand decreases from the
/// origin and lo = 0.
RhoBounds rho_bounds(double c, double n, double drop_factor);

/// log of the Gauss-Legendre value of
///   int rho^(2 + extra_power - n) exp(-rho^2/2 - c/(2 rho^2)) drho
/// over rho_bounds(c, n - extra_power, drop_factor). The integrand is
/// positive; the value is returned in log form to avoid under/overflow at
/// large n.
double integrate_rho_log(double c, double n, int extra_power, int rule_size,
                         double drop_factor = 1e20);

}  // namespace quadpost
