#include "clfdr/loglinear.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "clfdr/math_util.hpp"

namespace clfdr {

namespace {

void check_dims(const TestRecord& rec, const CovariateVector& x) {
    if (rec.y.size() != x.size()) {
        throw DataError("count row length does not match covariate length");
    }
}

}  // namespace

std::vector<double> multinomial_probs(double beta, const CovariateVector& x) {
    const std::size_t n = x.size();
    std::vector<double> p(n);
    double max_e = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = beta * x[i];
        max_e = std::max(max_e, p[i]);
    }
    double total = 0.0;
    for (double& v : p) {
        v = std::exp(v - max_e);
        total += v;
    }
    for (double& v : p) v /= total;
    return p;
}

double log_normalizer(double beta, const CovariateVector& x) {
    std::vector<double> e(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) e[i] = beta * x[i];
    return log_sum_exp(e);
}

double covariate_mean(double beta, const CovariateVector& x) {
    const std::vector<double> p = multinomial_probs(beta, x);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m += p[i] * x[i];
    return m;
}

double covariate_variance(double beta, const CovariateVector& x) {
    const std::vector<double> p = multinomial_probs(beta, x);
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m += p[i] * x[i];
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - m;
        v += p[i] * d * d;
    }
    return v;
}

double log_pmf(const TestRecord& rec, double beta, const CovariateVector& x) {
    check_dims(rec, x);
    if (rec.n_total <= 0) {
        throw DataError("log_pmf requires a positive row total");
    }
    double log_coef = std::lgamma(static_cast<double>(rec.n_total) + 1.0);
    double t = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double yi = static_cast<double>(rec.y[i]);
        log_coef -= std::lgamma(yi + 1.0);
        t += x[i] * yi;
    }
    return log_coef + beta * t -
           static_cast<double>(rec.n_total) * log_normalizer(beta, x);
}

TestStatistics z_score(const TestRecord& rec, const CovariateVector& x) {
    check_dims(rec, x);
    if (rec.n_total <= 0) {
        throw DataError("z_score requires a positive row total");
    }
    TestStatistics s;
    s.n_total = rec.n_total;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s.t += x[i] * static_cast<double>(rec.y[i]);
    }
    const double n = static_cast<double>(rec.n_total);
    const double mean0 = covariate_mean(0.0, x);
    const double var0 = covariate_variance(0.0, x);
    s.z = (s.t - n * mean0) / std::sqrt(n * var0);
    s.p = p_value(s.z, NullDistribution::standard_normal());
    return s;
}

double p_value(double z, const NullDistribution& f0) {
    const double a = std::abs(z);
    double p = 1.0;
    if (f0.kind == NullDistribution::Kind::standard_normal) {
        p = norm_two_sided_p(z);
    } else {
        // add-one tail estimate keeps p strictly positive
        const auto& s = f0.samples;
        const auto it = std::lower_bound(s.begin(), s.end(), a);
        const auto ge = static_cast<double>(s.end() - it);
        const double tail = (1.0 + ge) / (1.0 + static_cast<double>(s.size()));
        p = 2.0 * tail;
    }
    return std::min(p, 1.0);
}

NullDistribution simulate_null(const CovariateVector& x, std::int64_t n,
                               std::size_t reps, std::uint64_t seed) {
    NullDistribution f0;
    f0.kind = NullDistribution::Kind::monte_carlo_empirical;
    f0.seed = seed;
    f0.samples.reserve(reps);

    const std::vector<double> p0 = multinomial_probs(0.0, x);
    const double mean0 = covariate_mean(0.0, x);
    const double var0 = covariate_variance(0.0, x);
    const double denom = std::sqrt(static_cast<double>(n) * var0);

    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(n));
    std::vector<std::int64_t> y(x.size());
    for (std::size_t r = 0; r < reps; ++r) {
        rng.multinomial(n, p0, y);
        double t = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            t += x[i] * static_cast<double>(y[i]);
        }
        f0.samples.push_back((t - static_cast<double>(n) * mean0) / denom);
    }
    std::sort(f0.samples.begin(), f0.samples.end());
    return f0;
}

double conditional_mean(std::int64_t n, double gamma, const CovariateVector& x) {
    const double shift = covariate_mean(gamma, x) - covariate_mean(0.0, x);
    return std::sqrt(static_cast<double>(n)) * shift /
           std::sqrt(covariate_variance(0.0, x));
}

double conditional_sd(double gamma, const CovariateVector& x) {
    return std::sqrt(covariate_variance(gamma, x) /
                     covariate_variance(0.0, x));
}

}  // namespace clfdr
