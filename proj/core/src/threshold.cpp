#include "clfdr/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clfdr/loglinear.hpp"
#include "clfdr/math_util.hpp"

namespace clfdr {

namespace {

double threshold_k(double pi0, double lambda) {
    return pi0 * (1.0 - lambda) / ((1.0 - pi0) * lambda);
}

void check_lambda(double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw DataError("lambda must lie in (0, 1)");
    }
}

}  // namespace

void validate_size_pmf(const SizePmf& pmf) {
    if (pmf.empty()) {
        throw DataError("size distribution must be non-empty");
    }
    double total = 0.0;
    for (const SizePmfEntry& e : pmf) {
        if (e.n < 1) {
            throw DataError("size distribution requires row totals >= 1");
        }
        if (!(e.prob >= 0.0) || !std::isfinite(e.prob)) {
            throw DataError("size distribution probabilities must be finite and >= 0");
        }
        total += e.prob;
    }
    if (std::abs(total - 1.0) > 1e-10) {
        throw DataError("size distribution probabilities must sum to 1");
    }
    std::vector<std::int64_t> ns;
    for (const SizePmfEntry& e : pmf) ns.push_back(e.n);
    std::sort(ns.begin(), ns.end());
    if (std::adjacent_find(ns.begin(), ns.end()) != ns.end()) {
        throw DataError("size distribution row totals must be distinct");
    }
}

SizePmf default_size_pmf() {
    return {{3, 0.20},  {5, 0.20},   {8, 0.19},  {15, 0.10}, {25, 0.08},
            {50, 0.07}, {100, 0.06}, {200, 0.05}, {400, 0.03}, {911, 0.02}};
}

void TwoGroupModel::validate() const {
    if (!(pi0 > 0.0 && pi0 < 1.0)) {
        throw DataError("null proportion must lie in (0, 1)");
    }
    if (!(gamma1 > 0.0) || !std::isfinite(gamma1)) {
        throw DataError("effect must be positive and finite");
    }
    covariate.validate();
    validate_size_pmf(size_pmf);
}

double clfdr_zn(double z, std::int64_t n, const TwoGroupModel& model) {
    const double mu = conditional_mean(n, model.gamma1, model.covariate);
    const double sd = conditional_sd(model.gamma1, model.covariate);
    // Log space: the densities underflow for |z| beyond ~38 but the ratio
    // stays well defined.
    const double l0 = std::log(model.pi0) + norm_log_pdf(z);
    const double l1 = std::log(1.0 - model.pi0) + norm_log_pdf(z, mu, sd * sd);
    return std::exp(l0 - log_add_exp(l0, l1));
}

double lfdr_z(double z, const TwoGroupModel& model) {
    const double sd = conditional_sd(model.gamma1, model.covariate);
    const double l0 = std::log(model.pi0) + norm_log_pdf(z);
    std::vector<double> terms;
    terms.reserve(model.size_pmf.size());
    for (const SizePmfEntry& e : model.size_pmf) {
        const double mu = conditional_mean(e.n, model.gamma1, model.covariate);
        terms.push_back(std::log(e.prob) + norm_log_pdf(z, mu, sd * sd));
    }
    const double l1 = std::log(1.0 - model.pi0) + log_sum_exp(terms);
    return std::exp(l0 - log_add_exp(l0, l1));
}

RejectionBoundary rejection_boundary(std::int64_t n, const TwoGroupModel& model,
                                     double lambda) {
    check_lambda(lambda);
    RejectionBoundary rb;
    rb.n = n;
    const double mu = conditional_mean(n, model.gamma1, model.covariate);
    const double sd = conditional_sd(model.gamma1, model.covariate);
    const double s2 = sd * sd;
    const double k = threshold_k(model.pi0, lambda);
    const double log_sk = std::log(sd * k);
    if (std::abs(s2 - 1.0) <= 1e-12) {
        if (mu == 0.0) {
            rb.a = rb.b = std::numeric_limits<double>::quiet_NaN();
            return rb;
        }
        rb.a = (2.0 * log_sk + mu * mu) / (2.0 * mu);
        rb.b = std::numeric_limits<double>::infinity();
        rb.exists = true;
        return rb;
    }
    const double disc = mu * mu * s2 - 2.0 * (1.0 - s2) * s2 * log_sk;
    if (disc < 0.0) {
        rb.a = rb.b = std::numeric_limits<double>::quiet_NaN();
        return rb;
    }
    const double root = std::sqrt(disc);
    const double r1 = (mu - root) / (1.0 - s2);
    const double r2 = (mu + root) / (1.0 - s2);
    rb.a = std::min(r1, r2);
    rb.b = std::max(r1, r2);
    rb.exists = true;
    return rb;
}

std::optional<std::int64_t> monotone_min_n(const TwoGroupModel& model,
                                           double lambda, std::int64_t n_max) {
    check_lambda(lambda);
    if (n_max < 1) throw DataError("n_max must be at least 1");
    const double sd = conditional_sd(model.gamma1, model.covariate);
    const double rhs =
        2.0 * std::log(sd * threshold_k(model.pi0, lambda));
    if (rhs <= 0.0) return 1;
    for (std::int64_t n = 1; n <= n_max; ++n) {
        const double mu = conditional_mean(n, model.gamma1, model.covariate);
        if (mu * mu > rhs) return n;
    }
    return std::nullopt;
}

double power_at_threshold(double threshold, std::int64_t n,
                          const TwoGroupModel& model) {
    const double mu = conditional_mean(n, model.gamma1, model.covariate);
    const double sd = conditional_sd(model.gamma1, model.covariate);
    return 1.0 - norm_cdf(threshold, mu, sd * sd);
}

int clfdr_derivative_sign(double z, std::int64_t n,
                          const TwoGroupModel& model) {
    const double mu = conditional_mean(n, model.gamma1, model.covariate);
    const double sd = conditional_sd(model.gamma1, model.covariate);
    const double s2 = sd * sd;
    const double v = z * (1.0 - s2) - mu;
    const double scale =
        std::max(1.0, std::abs(z) * std::abs(1.0 - s2) + std::abs(mu));
    if (std::abs(v) <= 1e-12 * scale) return 0;
    return v > 0.0 ? 1 : -1;
}

std::optional<double> lfdr_threshold(const TwoGroupModel& model,
                                     double lambda) {
    check_lambda(lambda);
    constexpr double kMaxZ = 50.0;
    constexpr double kStep = 0.01;
    if (lfdr_z(0.0, model) <= lambda) return 0.0;
    double lo = 0.0;
    bool bracketed = false;
    for (double z = kStep; z <= kMaxZ; z += kStep) {
        if (lfdr_z(z, model) <= lambda) {
            lo = z - kStep;
            bracketed = true;
            break;
        }
    }
    if (!bracketed) return std::nullopt;
    double hi = lo + kStep;
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        if (lfdr_z(mid, model) <= lambda) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

std::string boundary_table_csv(const TwoGroupModel& model, double lambda,
                               std::span<const std::int64_t> ns) {
    std::string out = "n,a,b,exists\n";
    for (std::int64_t n : ns) {
        const RejectionBoundary rb = rejection_boundary(n, model, lambda);
        out += std::to_string(n);
        out += ',';
        if (rb.exists) {
            out += format_double(rb.a);
            out += ',';
            out += std::isinf(rb.b) ? "inf" : format_double(rb.b);
        } else {
            out += ',';
        }
        out += ',';
        out += rb.exists ? "1" : "0";
        out += '\n';
    }
    return out;
}

std::string power_table_csv(const TwoGroupModel& model, double lambda,
                            std::span<const std::int64_t> ns) {
    const std::optional<double> marginal = lfdr_threshold(model, lambda);
    std::string out =
        "n,conditional_threshold,conditional_power,marginal_threshold,"
        "marginal_power,power_difference\n";
    for (std::int64_t n : ns) {
        const RejectionBoundary rb = rejection_boundary(n, model, lambda);
        out += std::to_string(n);
        out += ',';
        if (rb.exists && marginal) {
            const double pc = power_at_threshold(rb.a, n, model);
            const double pm = power_at_threshold(*marginal, n, model);
            out += format_double(rb.a);
            out += ',';
            out += format_double(pc);
            out += ',';
            out += format_double(*marginal);
            out += ',';
            out += format_double(pm);
            out += ',';
            out += format_double(pc - pm);
        } else {
            out += ",,,,";
        }
        out += '\n';
    }
    return out;
}

std::string monotone_frontier_csv(const TwoGroupModel& base,
                               std::span<const double> gammas,
                               std::span<const double> lambdas,
                               std::int64_t n_max) {
    std::string out = "gamma1,lambda,min_n\n";
    for (double g : gammas) {
        TwoGroupModel model = base;
        model.gamma1 = g;
        for (double lam : lambdas) {
            out += format_double(g);
            out += ',';
            out += format_double(lam);
            out += ',';
            const std::optional<std::int64_t> n =
                monotone_min_n(model, lam, n_max);
            if (n) out += std::to_string(*n);
            out += '\n';
        }
    }
    return out;
}

}  // namespace clfdr
