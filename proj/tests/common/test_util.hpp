#pragma once

// Shared test oracles: statistical tests and finite-difference checks.
// These stay independent of the implementation paths they verify.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

// regularized incomplete gamma Q(a, x) via series / continued fraction
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) return 1.0;
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // series for P(a,x)
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - gln);
        return 1.0 - p;
    }
    // continued fraction for Q(a,x)
    const double fpmin = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

// chi-square uniformity p-value for observed bin counts
inline double chi_square_uniform_p(const std::vector<int>& counts) {
    const int k = static_cast<int>(counts.size());
    long total = 0;
    for (int c : counts) total += c;
    const double expected = static_cast<double>(total) / k;
    double stat = 0.0;
    for (int c : counts) {
        const double d = c - expected;
        stat += d * d / expected;
    }
    return gamma_q(0.5 * (k - 1), 0.5 * stat);
}

// Kolmogorov-Smirnov p-value against a given CDF
inline double ks_p_value(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    const double sq = std::sqrt(n);
    const double lambda = (sq + 0.12 + 0.11 / sq) * d;
    double p = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        p += sign * term;
        sign = -sign;
        if (term < 1e-12) break;
    }
    return std::clamp(2.0 * p, 0.0, 1.0);
}

// central finite difference of f() with respect to a parameter slot
template <class F>
double central_diff(F&& f, double& slot, double h = 1e-5) {
    const double orig = slot;
    slot = orig + h;
    const double fp = f();
    slot = orig - h;
    const double fm = f();
    slot = orig;
    return (fp - fm) / (2.0 * h);
}

// relative agreement with a floor for near-zero gradients
inline bool grad_close(double analytic, double numeric, double rel_tol = 1e-4,
                       double abs_floor = 1e-7) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return std::abs(analytic - numeric) <= std::max(rel_tol * scale, abs_floor);
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
    return 0.5 * tv;
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace testutil
