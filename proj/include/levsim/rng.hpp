#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace levsim {

namespace detail {

/// Rational initial estimate in the style of Wichura's AS 241: three branches
/// give ~1e-15 relative error for |x| < 5-ish and at least 7 digits far out.
inline double normal_icdf_estimate(double p) {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r +
                    4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r +
                  1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r +
                    2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r +
                  6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r +
                1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r +
                 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r +
               5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r +
             1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r +
               1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r +
             1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r +
                 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r +
               1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r +
             6.65790464350110377720e0) /
            ((((((1.42151175831644588870e-15 * r + 1.84631831751005468180e-6) * r +
                 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r +
               1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r +
             1.0);
    }
    return (q < 0.0) ? -x : x;
}

}  // namespace detail

/// Inverse of the standard normal CDF: rational estimate plus one Newton step
/// through erfc, giving ~1e-15 relative accuracy wherever the normal density
/// is representable (|x| < 37; beyond that the estimate is returned as is).
/// The engine uses it to turn counter-indexed uniforms into the shock
/// sequence, so implementations sharing a uniform stream agree on the shocks.
inline double normal_icdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("normal_icdf: p must lie strictly in (0,1)");
    }
    // Work on the lower tail, where 1-p is exact and erfc is fully accurate,
    // and mirror back.
    const bool upper = p > 0.5;
    const double pl = upper ? 1.0 - p : p;
    double x = detail::normal_icdf_estimate(pl);
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    static const double inv_sqrt2pi = 1.0 / std::sqrt(8.0 * std::atan(1.0));
    const double pdf = std::exp(-0.5 * x * x) * inv_sqrt2pi;
    if (pdf > 1e-300) {
        const double cdf = 0.5 * std::erfc(-x * inv_sqrt2);
        x -= (cdf - pl) / pdf;
    }
    return upper ? -x : x;
}

/// Counter-based deterministic generator: draw i of a run is a pure function
/// of (seed, i). The stream is the splitmix64 sequence started at `seed`
/// (Steele, Lea & Flood's mixer with the golden-gamma increment), which makes
/// the generator splittable and free of sequential state — any draw can be
/// recomputed independently, and adding agents never shifts the shock path.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t bits(std::uint64_t counter) const {
        std::uint64_t z = seed_ + (counter + 1) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in the open interval (0,1): top 53 bits, offset by half an ulp
    /// so the normal inverse CDF never sees 0 or 1.
    double uniform01(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw via the inverse CDF.
    double normal(std::uint64_t counter) const { return normal_icdf(uniform01(counter)); }

  private:
    std::uint64_t seed_;
};

}  // namespace levsim
