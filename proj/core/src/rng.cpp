#include "possmix/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "possmix/special.hpp"

namespace possmix {

int sample_index(Rng& rng, const double* probs, int n) {
    double u = rng.next_double();
    double acc = 0.0;
    for (int i = 0; i < n - 1; ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return n - 1;
}

double sample_normal(Rng& rng) { return norm_ppf(rng.next_open()); }

double sample_gamma(Rng& rng, double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::domain_error("sample_gamma requires positive shape and scale");
    if (shape < 1.0) {
        // Gamma(a) = Gamma(a+1) * U^(1/a)
        double u = rng.next_open();
        return sample_gamma(rng, shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
        double x = sample_normal(rng);
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        double u = rng.next_open();
        double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

double sample_trunc_normal(Rng& rng, double mean, double sd, double lo, double hi) {
    if (!(sd > 0.0)) throw std::domain_error("sample_trunc_normal requires sd > 0");
    if (!(lo < hi)) throw std::domain_error("sample_trunc_normal requires lo < hi");
    double a = (lo - mean) / sd;
    double b = (hi - mean) / sd;
    double cdf_a = norm_cdf(a);
    double sf_b = norm_sf(b);
    double mass = -(cdf_a + sf_b - 1.0);  // Phi(b) - Phi(a) without cancellation near 1
    if (!(mass > 0.0)) {
        // Entire mass below double resolution: fall back to the erf form.
        mass = std::exp(ln_norm_mass(a, b));
        if (!(mass > 0.0)) throw std::domain_error("sample_trunc_normal: zero truncation mass");
    }
    double v = rng.next_open();
    // Invert from whichever tail keeps p well away from 1.
    double p_lo = cdf_a + v * mass;
    double z;
    if (p_lo <= 0.5) {
        z = norm_ppf(p_lo);
    } else {
        double p_hi = sf_b + (1.0 - v) * mass;  // P(Z > z)
        z = -norm_ppf(p_hi);
    }
    // Guard against rounding just past the interval.
    if (z < a) z = a;
    if (z > b) z = b;
    return mean + sd * z;
}

}  // namespace possmix
