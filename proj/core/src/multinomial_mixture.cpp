#include "clfdr/multinomial_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "clfdr/loglinear.hpp"
#include "clfdr/math_util.hpp"
#include "clfdr/rng.hpp"
#include "json.hpp"

namespace clfdr {

namespace {

constexpr double kGammaBracket = 20.0;
constexpr double kEmptyWeight = 1e-12;
constexpr double kPiFloor = 1e-6;

// Sufficient statistics of the usable rows: t = x'y, the row total, and
// the log multinomial coefficient, so each component log-pmf is
// log_coef + gamma * t - n * logZ(gamma).
struct RowCache {
    std::vector<double> t;
    std::vector<double> n;
    std::vector<double> log_coef;
    std::vector<std::size_t> rows;
    std::size_t total_rows = 0;
};

RowCache build_cache(const CountDataset& ds) {
    const CovariateVector& x = ds.covariate;
    RowCache c;
    c.total_rows = ds.num_tests();
    for (std::size_t m = 0; m < ds.num_tests(); ++m) {
        const TestRecord rec = ds.record(m);
        if (rec.n_total <= 0) continue;
        double lc = std::lgamma(static_cast<double>(rec.n_total) + 1.0);
        double t = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double yi = static_cast<double>(rec.y[i]);
            lc -= std::lgamma(yi + 1.0);
            t += x[i] * yi;
        }
        c.t.push_back(t);
        c.n.push_back(static_cast<double>(rec.n_total));
        c.log_coef.push_back(lc);
        c.rows.push_back(m);
    }
    return c;
}

struct ComponentTerms {
    std::vector<double> log_pi;
    std::vector<double> log_z;
};

ComponentTerms component_terms(const MixtureParams& p, const CovariateVector& x) {
    ComponentTerms ct;
    ct.log_pi.resize(p.components());
    ct.log_z.resize(p.components());
    for (std::size_t k = 0; k < p.components(); ++k) {
        ct.log_pi[k] = std::log(p.pis[k]);
        ct.log_z[k] = log_normalizer(p.gammas[k], x);
    }
    return ct;
}

double loglik_cache(const RowCache& c, const MixtureParams& p,
                    const CovariateVector& x) {
    const ComponentTerms ct = component_terms(p, x);
    std::vector<double> per_row(c.rows.size());
    std::vector<double> terms(p.components());
    for (std::size_t u = 0; u < c.rows.size(); ++u) {
        for (std::size_t k = 0; k < p.components(); ++k) {
            terms[k] = ct.log_pi[k] + (c.log_coef[u] + p.gammas[k] * c.t[u] -
                                       c.n[u] * ct.log_z[k]);
        }
        per_row[u] = log_sum_exp(terms);
    }
    return pairwise_sum(per_row);
}

Responsibilities e_step_cache(const RowCache& c, const MixtureParams& p,
                              const CovariateVector& x) {
    const std::size_t kc = p.components();
    Responsibilities r;
    r.z_hat.assign(kc, std::vector<double>(
                           c.total_rows,
                           std::numeric_limits<double>::quiet_NaN()));
    const ComponentTerms ct = component_terms(p, x);
    std::vector<double> terms(kc);
    for (std::size_t u = 0; u < c.rows.size(); ++u) {
        for (std::size_t k = 0; k < kc; ++k) {
            terms[k] = ct.log_pi[k] + (c.log_coef[u] + p.gammas[k] * c.t[u] -
                                       c.n[u] * ct.log_z[k]);
        }
        const double lse = log_sum_exp(terms);
        for (std::size_t k = 0; k < kc; ++k) {
            r.z_hat[k][c.rows[u]] = std::exp(terms[k] - lse);
        }
    }
    return r;
}

// Root of x_bar(gamma) = target on [-20, 20]: Newton with bracket
// maintenance and bisection fallback; x_bar is strictly increasing.
// Returns the iterate with the smallest residual seen, or the clamped
// endpoint when the target is outside the attainable range.
double solve_mean_equation(const CovariateVector& x, double target) {
    double lo = -kGammaBracket;
    double hi = kGammaBracket;
    if (covariate_mean(lo, x) >= target) return lo;
    if (covariate_mean(hi, x) <= target) return hi;
    double g = 0.0;
    double best = g;
    double best_abs = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
        const double f = covariate_mean(g, x) - target;
        const double af = std::abs(f);
        if (af < best_abs) {
            best_abs = af;
            best = g;
        }
        if (f == 0.0) break;
        (f > 0.0 ? hi : lo) = g;
        const double deriv = covariate_variance(g, x);
        double next = deriv > 0.0 ? g - f / deriv : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == g) break;
        g = next;
        if (hi - lo <=
            4.0 * std::numeric_limits<double>::epsilon() *
                std::max(1.0, std::abs(g))) {
            const double ff = covariate_mean(g, x) - target;
            if (std::abs(ff) < best_abs) best = g;
            break;
        }
    }
    return best;
}

std::vector<double> m_step_gamma_cache(const RowCache& c,
                                       const Responsibilities& resp,
                                       const CovariateVector& x,
                                       const std::vector<double>& current,
                                       std::vector<bool>* empty) {
    const std::size_t kc = resp.components();
    if (current.size() != kc) {
        throw DataError("current gamma list does not match component count");
    }
    std::vector<double> out = current;
    if (empty) empty->assign(kc, false);
    for (std::size_t k = 1; k < kc; ++k) {
        double a = 0.0;
        double b = 0.0;
        for (std::size_t u = 0; u < c.rows.size(); ++u) {
            const double w = resp.z_hat[k][c.rows[u]];
            a += w * c.t[u];
            b += w * c.n[u];
        }
        if (b < kEmptyWeight) {
            if (empty) (*empty)[k] = true;
            continue;
        }
        out[k] = solve_mean_equation(x, a / b);
    }
    return out;
}

// Sorted, pairwise gaps >= 1e-3, and nothing inside (-1e-3, 1e-3), so the
// values are valid distinct non-null effects.
std::vector<double> sanitize_gammas(std::vector<double> g) {
    std::sort(g.begin(), g.end());
    double prev = -std::numeric_limits<double>::infinity();
    for (double& v : g) {
        if (v < prev + 1e-3) v = prev + 1e-3;
        if (v > -1e-3 && v < 1e-3) v = 1e-3;
        prev = v;
    }
    return g;
}

double linear_quantile(const std::vector<double>& sorted, double q) {
    const double idx = q * static_cast<double>(sorted.size() - 1);
    const std::size_t i0 = static_cast<std::size_t>(idx);
    const std::size_t i1 = std::min(i0 + 1, sorted.size() - 1);
    const double w = idx - static_cast<double>(i0);
    return (1.0 - w) * sorted[i0] + w * sorted[i1];
}

std::vector<double> spaced_fallback(std::size_t k_alt) {
    std::vector<double> g;
    for (std::size_t j = 0; g.size() < k_alt; ++j) {
        const double v = 0.5 * static_cast<double>(j / 2 + 1);
        g.push_back(j % 2 == 0 ? v : -v);
    }
    std::sort(g.begin(), g.end());
    return g;
}

MixtureParams with_uniform_pis(std::vector<double> non_null_gammas) {
    MixtureParams p;
    p.gammas.push_back(0.0);
    for (double g : non_null_gammas) p.gammas.push_back(g);
    p.pis.assign(p.gammas.size(), 1.0 / static_cast<double>(p.gammas.size()));
    return p;
}

std::vector<MixtureParams> build_inits(const RowCache& cache,
                                       const CovariateVector& x,
                                       std::size_t k_alt,
                                       const EmOptions& opts) {
    // per-row effect MLEs over rows with n >= 5, excluding a band around 0
    std::vector<double> pool;
    for (std::size_t u = 0; u < cache.rows.size(); ++u) {
        if (cache.n[u] < 5.0) continue;
        pool.push_back(solve_mean_equation(x, cache.t[u] / cache.n[u]));
    }
    std::vector<double> filtered;
    for (double b : pool) {
        if (std::abs(b) >= 0.1) filtered.push_back(b);
    }
    std::sort(filtered.begin(), filtered.end());

    std::vector<MixtureParams> inits;
    std::vector<double> g(k_alt);
    if (filtered.empty()) {
        g = spaced_fallback(k_alt);
    } else {
        for (std::size_t k = 1; k <= k_alt; ++k) {
            g[k - 1] = linear_quantile(
                filtered,
                static_cast<double>(k) / static_cast<double>(k_alt + 1));
        }
        g = sanitize_gammas(g);
    }
    inits.push_back(with_uniform_pis(g));

    const double lo = filtered.empty() ? -2.0 : filtered.front();
    const double hi = filtered.empty() ? 2.0 : filtered.back();
    const std::size_t restarts = std::max<std::size_t>(opts.restarts, 1);
    for (std::size_t r = 1; r < restarts; ++r) {
        Rng rng = Rng::substream(opts.seed, r);
        std::vector<double> rg(k_alt);
        for (double& v : rg) v = rng.uniform(lo, hi);
        inits.push_back(with_uniform_pis(sanitize_gammas(rg)));
    }
    return inits;
}

void floor_pis(std::vector<double>& pis) {
    double total = 0.0;
    for (double& p : pis) {
        p = std::max(p, kPiFloor);
        total += p;
    }
    for (double& p : pis) p /= total;
}

FitResult run_em(const RowCache& cache, const CovariateVector& x,
                 MixtureParams params, const EmOptions& opts) {
    FitResult fr;
    fr.loglik_trace.push_back(loglik_cache(cache, params, x));
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        const Responsibilities resp = e_step_cache(cache, params, x);
        std::vector<double> pis = m_step_pi(resp);
        floor_pis(pis);
        params.pis = std::move(pis);
        std::vector<bool> empty;
        params.gammas =
            m_step_gamma_cache(cache, resp, x, params.gammas, &empty);
        fr.empty_component =
            std::any_of(empty.begin(), empty.end(), [](bool e) { return e; });
        const double l = loglik_cache(cache, params, x);
        const double prev = fr.loglik_trace.back();
        fr.loglik_trace.push_back(l);
        fr.iterations = it + 1;
        if (l - prev < opts.tol) {
            fr.converged = true;
            break;
        }
    }
    fr.params = std::move(params);
    return fr;
}

void canonical_order(MixtureParams& p) {
    std::vector<std::size_t> idx(p.components() - 1);
    std::iota(idx.begin(), idx.end(), 1);
    std::sort(idx.begin(), idx.end(), [&p](std::size_t a, std::size_t b) {
        return p.gammas[a] < p.gammas[b];
    });
    MixtureParams sorted;
    sorted.gammas.push_back(p.gammas[0]);
    sorted.pis.push_back(p.pis[0]);
    for (std::size_t i : idx) {
        sorted.gammas.push_back(p.gammas[i]);
        sorted.pis.push_back(p.pis[i]);
    }
    p = std::move(sorted);
}

}  // namespace

void MixtureParams::validate() const {
    if (gammas.empty() || gammas.size() != pis.size()) {
        throw DataError("gamma and pi lists must be non-empty and equal length");
    }
    if (gammas[0] != 0.0) {
        throw DataError("null component effect must be exactly 0");
    }
    std::vector<double> sorted = gammas;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (!std::isfinite(sorted[k])) {
            throw DataError("effect values must be finite");
        }
        if (k > 0 && sorted[k] == sorted[k - 1]) {
            throw DataError("effect values must be distinct");
        }
    }
    for (std::size_t k = 2; k < gammas.size(); ++k) {
        if (gammas[k] <= gammas[k - 1]) {
            throw DataError("non-null effects must be sorted ascending");
        }
    }
    double total = 0.0;
    for (double p : pis) {
        if (!(p > 0.0 && p < 1.0)) {
            throw DataError("mixture proportions must lie in (0, 1)");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-10) {
        throw DataError("mixture proportions must sum to 1");
    }
}

double mixture_log_pmf(const TestRecord& rec, const MixtureParams& params,
                       const CovariateVector& x) {
    std::vector<double> terms(params.components());
    for (std::size_t k = 0; k < params.components(); ++k) {
        terms[k] =
            std::log(params.pis[k]) + log_pmf(rec, params.gammas[k], x);
    }
    return log_sum_exp(terms);
}

double log_likelihood(const CountDataset& ds, const MixtureParams& params) {
    const RowCache cache = build_cache(ds);
    if (cache.rows.empty()) {
        throw DataError("log likelihood requires at least one usable row");
    }
    return loglik_cache(cache, params, ds.covariate);
}

Responsibilities e_step(const CountDataset& ds, const MixtureParams& params) {
    return e_step_cache(build_cache(ds), params, ds.covariate);
}

std::vector<double> m_step_pi(const Responsibilities& resp) {
    std::vector<double> pis(resp.components(), 0.0);
    std::size_t usable = 0;
    for (std::size_t m = 0; m < resp.tests(); ++m) {
        if (std::isnan(resp.z_hat[0][m])) continue;
        ++usable;
        for (std::size_t k = 0; k < resp.components(); ++k) {
            pis[k] += resp.z_hat[k][m];
        }
    }
    if (usable > 0) {
        for (double& p : pis) p /= static_cast<double>(usable);
    }
    return pis;
}

std::vector<double> m_step_gamma(const CountDataset& ds,
                                 const Responsibilities& resp,
                                 const CovariateVector& x,
                                 const std::vector<double>& current,
                                 std::vector<bool>* empty) {
    return m_step_gamma_cache(build_cache(ds), resp, x, current, empty);
}

FitResult fit_em(const CountDataset& ds, std::size_t k_alt,
                 const EmOptions& opts) {
    if (k_alt < 1) {
        throw DataError("fit requires at least one non-null component");
    }
    if (!(opts.tol > 0.0) || opts.max_iter < 1) {
        throw DataError("tolerance must be positive and max_iter at least 1");
    }
    const RowCache cache = build_cache(ds);
    if (cache.rows.empty()) {
        throw DataError("fit requires at least one usable row");
    }

    std::vector<MixtureParams> inits;
    if (opts.init) {
        MixtureParams p = *opts.init;
        p.validate();
        if (p.components() != k_alt + 1) {
            throw DataError("explicit init has the wrong component count");
        }
        inits.push_back(std::move(p));
    } else {
        inits = build_inits(cache, ds.covariate, k_alt, opts);
    }

    FitResult best;
    for (std::size_t r = 0; r < inits.size(); ++r) {
        FitResult fr = run_em(cache, ds.covariate, inits[r], opts);
        fr.restart_index = r;
        if (r == 0 || fr.loglik() > best.loglik()) best = std::move(fr);
    }
    canonical_order(best.params);

    const double q = 2.0 * static_cast<double>(k_alt);
    const double m = static_cast<double>(cache.rows.size());
    best.aic = -2.0 * best.loglik() + 2.0 * q;
    best.bic = -2.0 * best.loglik() + q * std::log(m);
    return best;
}

std::vector<double> clfdr_stats(const CountDataset& ds,
                                const MixtureParams& params) {
    return e_step(ds, params).z_hat[0];
}

double row_mle(const TestRecord& rec, const CovariateVector& x) {
    if (rec.n_total <= 0) {
        throw DataError("row MLE requires a positive row total");
    }
    double t = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        t += x[i] * static_cast<double>(rec.y[i]);
    }
    return solve_mean_equation(x, t / static_cast<double>(rec.n_total));
}

std::string fit_result_to_json(const FitResult& fit) {
    nlohmann::json j;
    j["gammas"] = fit.params.gammas;
    j["pis"] = fit.params.pis;
    j["loglik"] = fit.loglik();
    j["aic"] = fit.aic;
    j["bic"] = fit.bic;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    return j.dump(2);
}

}  // namespace clfdr
