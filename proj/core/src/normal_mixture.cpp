#include "clfdr/normal_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clfdr/count_data.hpp"
#include "clfdr/math_util.hpp"
#include "clfdr/rng.hpp"
#include "json.hpp"

namespace clfdr {

namespace {

constexpr double kVarianceFloor = 1e-4;

// log f(z) by log-sum-exp, safe for z far in the tails where linear-space
// densities underflow.
double mixture_log_density(double z, const NormalMixtureParams& p) {
    std::vector<double> terms;
    terms.reserve(p.total_components());
    terms.push_back(std::log(p.pi0) + norm_log_pdf(z));
    for (const NormalComponent& c : p.components) {
        terms.push_back(std::log(c.pi) + norm_log_pdf(z, c.mu, c.sigma2));
    }
    return log_sum_exp(terms);
}

double mixture_loglik(std::span<const double> z,
                      const NormalMixtureParams& p) {
    std::vector<double> per_point(z.size());
    for (std::size_t m = 0; m < z.size(); ++m) {
        per_point[m] = mixture_log_density(z[m], p);
    }
    return pairwise_sum(per_point);
}

NormalMixtureParams quantile_init(std::vector<double> sorted,
                                  std::size_t k_total) {
    NormalMixtureParams p;
    const double share = 1.0 / static_cast<double>(k_total);
    p.pi0 = share;
    for (std::size_t k = 1; k < k_total; ++k) {
        const double q = static_cast<double>(k) / static_cast<double>(k_total);
        const double idx = q * static_cast<double>(sorted.size() - 1);
        const std::size_t i0 = static_cast<std::size_t>(idx);
        const std::size_t i1 = std::min(i0 + 1, sorted.size() - 1);
        const double w = idx - static_cast<double>(i0);
        NormalComponent c;
        c.pi = share;
        c.mu = (1.0 - w) * sorted[i0] + w * sorted[i1];
        c.sigma2 = 1.0;
        p.components.push_back(c);
    }
    return p;
}

NormalMixtureParams random_init(std::span<const double> z,
                                std::size_t k_total, Rng& rng) {
    NormalMixtureParams p;
    const double share = 1.0 / static_cast<double>(k_total);
    p.pi0 = share;
    for (std::size_t k = 1; k < k_total; ++k) {
        NormalComponent c;
        c.pi = share;
        c.mu = z[static_cast<std::size_t>(rng.uniform01() *
                                          static_cast<double>(z.size()))];
        c.sigma2 = 1.0;
        p.components.push_back(c);
    }
    return p;
}

NormalFitResult run_em(std::span<const double> z, NormalMixtureParams params,
                       double tol, std::size_t max_iter, Rng& rng) {
    const std::size_t kf = params.components.size();
    const std::size_t m_count = z.size();
    std::vector<bool> reseeded(kf, false);

    NormalFitResult fr;
    fr.loglik_trace.push_back(mixture_loglik(z, params));
    std::vector<std::vector<double>> w(kf + 1,
                                       std::vector<double>(m_count, 0.0));
    std::vector<double> terms(kf + 1);
    for (std::size_t it = 0; it < max_iter; ++it) {
        for (std::size_t m = 0; m < m_count; ++m) {
            terms[0] = std::log(params.pi0) + norm_log_pdf(z[m]);
            for (std::size_t k = 0; k < kf; ++k) {
                const NormalComponent& c = params.components[k];
                terms[k + 1] =
                    std::log(c.pi) + norm_log_pdf(z[m], c.mu, c.sigma2);
            }
            const double lse = log_sum_exp(terms);
            for (std::size_t k = 0; k <= kf; ++k) {
                w[k][m] = std::exp(terms[k] - lse);
            }
        }

        double w0 = 0.0;
        for (double v : w[0]) w0 += v;
        params.pi0 = w0 / static_cast<double>(m_count);
        for (std::size_t k = 0; k < kf; ++k) {
            double wk = 0.0;
            double wz = 0.0;
            for (std::size_t m = 0; m < m_count; ++m) {
                wk += w[k + 1][m];
                wz += w[k + 1][m] * z[m];
            }
            NormalComponent& c = params.components[k];
            c.pi = wk / static_cast<double>(m_count);
            if (wk <= 0.0) continue;
            c.mu = wz / wk;
            double wv = 0.0;
            for (std::size_t m = 0; m < m_count; ++m) {
                const double d = z[m] - c.mu;
                wv += w[k + 1][m] * d * d;
            }
            c.sigma2 = wv / wk;
            if (c.sigma2 < kVarianceFloor) {
                if (!reseeded[k]) {
                    reseeded[k] = true;
                    c.mu = z[static_cast<std::size_t>(
                        rng.uniform01() * static_cast<double>(m_count))];
                    c.sigma2 = 1.0;
                } else {
                    c.sigma2 = kVarianceFloor;
                    fr.variance_collapsed = true;
                }
            }
        }

        const double l = mixture_loglik(z, params);
        const double prev = fr.loglik_trace.back();
        fr.loglik_trace.push_back(l);
        fr.iterations = it + 1;
        if (l - prev < tol) {
            fr.converged = true;
            break;
        }
    }
    fr.params = std::move(params);
    return fr;
}

}  // namespace

void NormalMixtureParams::validate() const {
    double total = pi0;
    if (!(pi0 > 0.0 && pi0 < 1.0)) {
        throw DataError("null proportion must lie in (0, 1)");
    }
    for (const NormalComponent& c : components) {
        if (!(c.pi > 0.0 && c.pi < 1.0)) {
            throw DataError("component proportions must lie in (0, 1)");
        }
        if (!(c.sigma2 >= kVarianceFloor)) {
            throw DataError("component variance is below the floor");
        }
        total += c.pi;
    }
    if (std::abs(total - 1.0) > 1e-10) {
        throw DataError("mixture proportions must sum to 1");
    }
}

double normal_mixture_density(double z, const NormalMixtureParams& params) {
    double f = params.pi0 * norm_pdf(z);
    for (const NormalComponent& c : params.components) {
        f += c.pi * norm_pdf(z, c.mu, c.sigma2);
    }
    return f;
}

NormalFitResult fit_normal_mixture(std::span<const double> z,
                                   std::size_t k_total, double tol,
                                   std::size_t max_iter, std::uint64_t seed,
                                   std::size_t restarts) {
    if (k_total < 2) {
        throw DataError("fit requires the null plus at least one free component");
    }
    if (z.size() < k_total) {
        throw DataError("fit requires at least as many points as components");
    }
    if (!(tol > 0.0) || max_iter < 1) {
        throw DataError("tolerance must be positive and max_iter at least 1");
    }

    std::vector<double> sorted(z.begin(), z.end());
    std::sort(sorted.begin(), sorted.end());

    NormalFitResult best;
    const std::size_t runs = std::max<std::size_t>(restarts, 1);
    for (std::size_t r = 0; r < runs; ++r) {
        Rng rng = Rng::substream(seed, r);
        NormalMixtureParams init = r == 0 ? quantile_init(sorted, k_total)
                                          : random_init(z, k_total, rng);
        NormalFitResult fr = run_em(z, std::move(init), tol, max_iter, rng);
        fr.restart_index = r;
        if (r == 0 || fr.loglik() > best.loglik()) best = std::move(fr);
    }

    best.q = 4 * (k_total - 1);
    const double qd = static_cast<double>(best.q);
    best.aic = -2.0 * best.loglik() + 2.0 * qd;
    best.bic =
        -2.0 * best.loglik() + qd * std::log(static_cast<double>(z.size()));
    return best;
}

std::vector<double> lfdr_stats(std::span<const double> z,
                               const NormalMixtureParams& params) {
    std::vector<double> out(z.size());
    for (std::size_t m = 0; m < z.size(); ++m) {
        const double log_f0 = std::log(params.pi0) + norm_log_pdf(z[m]);
        const double log_f = mixture_log_density(z[m], params);
        out[m] = std::min(std::exp(log_f0 - log_f), 1.0);
    }
    return out;
}

std::string normal_fit_to_json(const NormalFitResult& fit) {
    nlohmann::json j;
    j["pi0"] = fit.params.pi0;
    j["components"] = nlohmann::json::array();
    for (const NormalComponent& c : fit.params.components) {
        j["components"].push_back(
            {{"pi", c.pi}, {"mu", c.mu}, {"sigma2", c.sigma2}});
    }
    j["aic"] = fit.aic;
    j["bic"] = fit.bic;
    return j.dump(2);
}

}  // namespace clfdr
