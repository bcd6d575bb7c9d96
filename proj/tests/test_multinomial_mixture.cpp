#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "clfdr/count_data.hpp"
#include "clfdr/loglinear.hpp"
#include "clfdr/multinomial_mixture.hpp"
#include "clfdr/rng.hpp"

namespace {

const clfdr::CovariateVector kBiomass{{0.86, 1.34, 1.81, 2.37, 3.00}};

clfdr::TestRecord make_record(std::vector<std::int64_t> y) {
  clfdr::TestRecord rec;
  rec.y = std::move(y);
  rec.n_total = std::accumulate(rec.y.begin(), rec.y.end(), std::int64_t{0});
  return rec;
}

clfdr::CountDataset make_dataset(std::vector<std::vector<std::int64_t>> rows,
                                 clfdr::CovariateVector x = kBiomass) {
  clfdr::CountDataset ds;
  ds.covariate = std::move(x);
  ds.counts = std::move(rows);
  return ds;
}

clfdr::MixtureParams make_params(std::vector<double> gammas,
                                 std::vector<double> pis) {
  clfdr::MixtureParams p;
  p.gammas = std::move(gammas);
  p.pis = std::move(pis);
  return p;
}

// Truth used in several fits below.
const clfdr::MixtureParams kTruth =
    make_params({0.0, -1.13, 0.78}, {0.69, 0.16, 0.15});

clfdr::CountDataset sample_from(const clfdr::MixtureParams& params,
                                std::size_t m, std::uint64_t seed,
                                std::int64_t n_lo = 5, std::int64_t n_hi = 100,
                                std::vector<int>* truth = nullptr) {
  clfdr::CountDataset ds;
  ds.covariate = kBiomass;
  std::vector<std::vector<double>> comp_probs;
  for (double g : params.gammas)
    comp_probs.push_back(clfdr::multinomial_probs(g, kBiomass));
  for (std::size_t i = 0; i < m; ++i) {
    clfdr::Rng rng = clfdr::Rng::substream(seed, i);
    const std::size_t k = rng.categorical(params.pis);
    const std::int64_t n =
        n_lo + static_cast<std::int64_t>(rng.uniform01() *
                                         static_cast<double>(n_hi - n_lo + 1));
    ds.counts.push_back(rng.multinomial(n, comp_probs[k]));
    if (truth) truth->push_back(k != 0 ? 1 : 0);
  }
  return ds;
}

void compositions(std::int64_t n, std::size_t k, std::vector<std::int64_t>& cur,
                  std::vector<std::vector<std::int64_t>>& out) {
  if (cur.size() == k - 1) {
    cur.push_back(n);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (std::int64_t c = 0; c <= n; ++c) {
    cur.push_back(c);
    compositions(n - c, k, cur, out);
    cur.pop_back();
  }
}

}  // namespace

TEST_CASE("mixture parameter validation") {
  CHECK_NOTHROW(kTruth.validate());
  CHECK_THROWS_AS(make_params({0.1, 1.0}, {0.5, 0.5}).validate(),
                  clfdr::DataError);  // null gamma not 0
  CHECK_THROWS_AS(make_params({0.0, 1.0, 0.5}, {0.4, 0.3, 0.3}).validate(),
                  clfdr::DataError);  // non-null gammas unsorted
  CHECK_THROWS_AS(make_params({0.0, 1.0, 1.0}, {0.4, 0.3, 0.3}).validate(),
                  clfdr::DataError);  // duplicate gamma
  CHECK_THROWS_AS(make_params({0.0, 1.0}, {0.7, 0.2}).validate(),
                  clfdr::DataError);  // pis do not sum to 1
  CHECK_THROWS_AS(make_params({0.0, 1.0}, {1.0, 0.0}).validate(),
                  clfdr::DataError);  // boundary pi
  CHECK_THROWS_AS(make_params({0.0}, {0.5, 0.5}).validate(), clfdr::DataError);
}

TEST_CASE("mixture pmf reduces to a single component") {
  const auto rec = make_record({0, 1, 1, 0, 5});
  const auto params = make_params({0.0, 0.78}, {0.5, 0.5});
  const double lp = clfdr::mixture_log_pmf(rec, params, kBiomass);
  const double direct = std::log(
      0.5 * std::exp(clfdr::log_pmf(rec, 0.0, kBiomass)) +
      0.5 * std::exp(clfdr::log_pmf(rec, 0.78, kBiomass)));
  CHECK(lp == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("mixture pmf normalizes over all compositions") {
  std::vector<std::vector<std::int64_t>> comps;
  std::vector<std::int64_t> cur;
  compositions(3, 5, cur, comps);
  double total = 0.0;
  for (const auto& y : comps) {
    auto rec = make_record(std::vector<std::int64_t>(y));
    total += std::exp(clfdr::mixture_log_pmf(rec, kTruth, kBiomass));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mixture pmf rejects empty rows") {
  const auto rec = make_record({0, 0, 0, 0, 0});
  CHECK_THROWS_AS(clfdr::mixture_log_pmf(rec, kTruth, kBiomass),
                  clfdr::DataError);
}

TEST_CASE("log likelihood is additive over rows and skips empty ones") {
  const auto ds = make_dataset({{0, 1, 1, 0, 5}, {2, 2, 2, 2, 2}});
  const double l = clfdr::log_likelihood(ds, kTruth);
  const double manual =
      clfdr::mixture_log_pmf(ds.record(0), kTruth, kBiomass) +
      clfdr::mixture_log_pmf(ds.record(1), kTruth, kBiomass);
  CHECK(l == doctest::Approx(manual).epsilon(1e-13));

  const auto with_empty =
      make_dataset({{0, 1, 1, 0, 5}, {0, 0, 0, 0, 0}, {2, 2, 2, 2, 2}});
  CHECK(clfdr::log_likelihood(with_empty, kTruth) ==
        doctest::Approx(l).epsilon(1e-13));

  const auto all_empty = make_dataset({{0, 0, 0, 0, 0}});
  CHECK_THROWS_AS(clfdr::log_likelihood(all_empty, kTruth), clfdr::DataError);
}

TEST_CASE("responsibilities sum to one across components") {
  const auto ds = sample_from(kTruth, 40, 7);
  const auto resp = clfdr::e_step(ds, kTruth);
  REQUIRE(resp.components() == 3);
  REQUIRE(resp.tests() == 40);
  for (std::size_t m = 0; m < 40; ++m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      REQUIRE(resp.z_hat[k][m] >= 0.0);
      REQUIRE(resp.z_hat[k][m] <= 1.0);
      sum += resp.z_hat[k][m];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mirrored components get equal responsibility on uniform rows") {
  // With a covariate symmetric about 0, Z(g) = Z(-g), so a uniform count
  // row (t = 0) weighs the -g and +g components identically. The null keeps
  // strictly more mass: Z(0) is the minimum of the normalizer.
  const clfdr::CovariateVector sym{{-2.0, -1.0, 0.0, 1.0, 2.0}};
  const auto ds = make_dataset({{3, 3, 3, 3, 3}}, sym);
  const auto params = make_params({0.0, -0.9, 0.9},
                                  {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  const auto resp = clfdr::e_step(ds, params);
  CHECK(resp.z_hat[1][0] == doctest::Approx(resp.z_hat[2][0]).epsilon(1e-12));
  CHECK(resp.z_hat[0][0] > resp.z_hat[1][0]);
  CHECK(resp.z_hat[0][0] + resp.z_hat[1][0] + resp.z_hat[2][0] ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("responsibilities favor the matching component") {
  const auto increasing = make_dataset({{0, 1, 2, 8, 20}});
  const auto params = make_params({0.0, 1.5}, {0.5, 0.5});
  const auto resp = clfdr::e_step(increasing, params);
  CHECK(resp.z_hat[1][0] > resp.z_hat[0][0]);

  const auto uniform = make_dataset({{4, 4, 4, 4, 4}});
  const auto resp2 = clfdr::e_step(uniform, params);
  CHECK(resp2.z_hat[0][0] > resp2.z_hat[1][0]);
}

TEST_CASE("empty rows get NaN responsibility columns") {
  const auto ds = make_dataset({{1, 1, 1, 1, 1}, {0, 0, 0, 0, 0}});
  const auto resp = clfdr::e_step(ds, kTruth);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK_FALSE(std::isnan(resp.z_hat[k][0]));
    CHECK(std::isnan(resp.z_hat[k][1]));
  }
}

TEST_CASE("proportion update averages responsibilities") {
  clfdr::Responsibilities resp;
  resp.z_hat = {{0.9, 0.5, 0.1}, {0.1, 0.5, 0.9}};
  const auto pis = clfdr::m_step_pi(resp);
  REQUIRE(pis.size() == 2);
  CHECK(pis[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(pis[1] == doctest::Approx(0.5).epsilon(1e-14));

  clfdr::Responsibilities skewed;
  skewed.z_hat = {{1.0, 0.5}, {0.0, 0.5}};
  const auto pis2 = clfdr::m_step_pi(skewed);
  CHECK(pis2[0] == doctest::Approx(0.75));
  CHECK(pis2[1] == doctest::Approx(0.25));

  const double nan = std::numeric_limits<double>::quiet_NaN();
  clfdr::Responsibilities with_skip;
  with_skip.z_hat = {{1.0, nan, 0.5}, {0.0, nan, 0.5}};
  const auto pis3 = clfdr::m_step_pi(with_skip);
  CHECK(pis3[0] == doctest::Approx(0.75));
  CHECK(pis3[1] == doctest::Approx(0.25));
}

TEST_CASE("effect update solves the weighted score equation") {
  // All mass on one component, uniform rows: t/n equals x_bar(0), so the
  // update returns 0 for any covariate.
  const auto ds = make_dataset({{2, 2, 2, 2, 2}, {5, 5, 5, 5, 5}});
  clfdr::Responsibilities resp;
  resp.z_hat = {{0.0, 0.0}, {1.0, 1.0}};
  const auto gammas =
      clfdr::m_step_gamma(ds, resp, kBiomass, {0.0, 0.5});
  REQUIRE(gammas.size() == 2);
  CHECK(gammas[0] == 0.0);
  CHECK(std::abs(gammas[1]) < 1e-9);
}

TEST_CASE("effect update hits the stationarity condition on sampled data") {
  clfdr::MixtureParams truth = make_params({0.0, 0.78}, {0.3, 0.7});
  const auto ds = sample_from(truth, 300, 11, 5, 60);
  const auto resp = clfdr::e_step(ds, truth);
  const auto gammas = clfdr::m_step_gamma(ds, resp, kBiomass, truth.gammas);

  // Verify x_bar(gamma) = A/B directly for the non-null component.
  double a = 0.0;
  double b = 0.0;
  for (std::size_t m = 0; m < ds.num_tests(); ++m) {
    const auto rec = ds.record(m);
    double t = 0.0;
    for (std::size_t i = 0; i < rec.y.size(); ++i)
      t += static_cast<double>(rec.y[i]) * kBiomass[i];
    a += resp.z_hat[1][m] * t;
    b += resp.z_hat[1][m] * static_cast<double>(rec.n_total);
  }
  const double residual = clfdr::covariate_mean(gammas[1], kBiomass) - a / b;
  CHECK(std::abs(residual) <= 1e-10);

  // The maximized objective is concave: finite differences of
  // g(v) = A v - B log Z(v) are decreasing around the solution.
  auto objective = [&](double v) {
    return a * v - b * clfdr::log_normalizer(v, kBiomass);
  };
  const double h = 1e-4;
  const double g0 = objective(gammas[1]);
  CHECK(objective(gammas[1] + h) < g0);
  CHECK(objective(gammas[1] - h) < g0);
}

TEST_CASE("effect update recovers a known gamma from hard assignments") {
  clfdr::MixtureParams truth = make_params({0.0, 0.78}, {0.5, 0.5});
  clfdr::CountDataset ds;
  ds.covariate = kBiomass;
  clfdr::Rng rng(4242);
  const auto probs = clfdr::multinomial_probs(0.78, kBiomass);
  for (int i = 0; i < 400; ++i) ds.counts.push_back(rng.multinomial(50, probs));
  clfdr::Responsibilities resp;
  resp.z_hat.assign(2, std::vector<double>(400, 0.0));
  std::fill(resp.z_hat[1].begin(), resp.z_hat[1].end(), 1.0);
  const auto gammas = clfdr::m_step_gamma(ds, resp, kBiomass, {0.0, 0.1});
  CHECK(gammas[1] == doctest::Approx(0.78).epsilon(0.05));
}

TEST_CASE("empty components are flagged and keep their current value") {
  const auto ds = make_dataset({{1, 2, 3, 4, 5}});
  clfdr::Responsibilities resp;
  resp.z_hat = {{1.0}, {0.0}};
  std::vector<bool> empty;
  const auto gammas = clfdr::m_step_gamma(ds, resp, kBiomass, {0.0, 1.25}, &empty);
  REQUIRE(empty.size() == 2);
  CHECK_FALSE(empty[0]);
  CHECK(empty[1]);
  CHECK(gammas[1] == 1.25);
}

TEST_CASE("EM raises the log likelihood monotonically") {
  const auto ds = sample_from(kTruth, 250, 99);
  clfdr::EmOptions opts;
  opts.seed = 5;
  opts.restarts = 3;
  const auto fit = clfdr::fit_em(ds, 2, opts);
  REQUIRE(fit.loglik_trace.size() >= 2);
  for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i)
    CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-8);
}

TEST_CASE("EM recovers the generating parameters") {
  const auto ds = sample_from(kTruth, 1200, 31337);
  clfdr::EmOptions opts;
  opts.seed = 17;
  const auto fit = clfdr::fit_em(ds, 2, opts);
  CHECK(fit.converged);
  REQUIRE(fit.params.components() == 3);
  CHECK(fit.params.gammas[0] == 0.0);
  CHECK(fit.params.gammas[1] == doctest::Approx(-1.13).epsilon(0.2));
  CHECK(fit.params.gammas[2] == doctest::Approx(0.78).epsilon(0.2));
  CHECK(fit.params.pis[0] == doctest::Approx(0.69).epsilon(0.12));
  CHECK(std::is_sorted(fit.params.gammas.begin() + 1, fit.params.gammas.end()));
  CHECK_NOTHROW(fit.params.validate());
}

TEST_CASE("EM respects iteration caps and reports non-convergence") {
  const auto ds = sample_from(kTruth, 150, 1);
  clfdr::EmOptions opts;
  opts.tol = 1e-16;
  opts.max_iter = 2;
  opts.restarts = 1;
  const auto fit = clfdr::fit_em(ds, 2, opts);
  CHECK_FALSE(fit.converged);
  CHECK(fit.iterations == 2);
}

TEST_CASE("model scores follow the fitted likelihood") {
  const auto ds = sample_from(kTruth, 200, 3);
  clfdr::EmOptions opts;
  opts.seed = 2;
  opts.restarts = 2;
  const auto fit = clfdr::fit_em(ds, 2, opts);
  const double l = fit.loglik();
  const double q = 2.0 * 2.0;
  std::size_t usable = 0;
  for (std::size_t m = 0; m < ds.num_tests(); ++m)
    usable += ds.record(m).n_total > 0;
  CHECK(fit.aic == doctest::Approx(-2.0 * l + 2.0 * q).epsilon(1e-12));
  CHECK(fit.bic ==
        doctest::Approx(-2.0 * l + q * std::log(static_cast<double>(usable)))
            .epsilon(1e-12));
}

TEST_CASE("explicit initialization is validated") {
  const auto ds = sample_from(kTruth, 50, 4);
  clfdr::EmOptions opts;
  opts.init = make_params({0.0, 1.0}, {0.7, 0.2});  // bad pi sum
  CHECK_THROWS_AS(clfdr::fit_em(ds, 1, opts), clfdr::DataError);

  clfdr::EmOptions wrong_k;
  wrong_k.init = make_params({0.0, 1.0}, {0.5, 0.5});
  CHECK_THROWS_AS(clfdr::fit_em(ds, 2, wrong_k), clfdr::DataError);

  clfdr::EmOptions ok;
  ok.init = make_params({0.0, 1.0}, {0.5, 0.5});
  CHECK_NOTHROW(clfdr::fit_em(ds, 1, ok));
}

TEST_CASE("degenerate datasets are rejected") {
  const auto all_empty = make_dataset({{0, 0, 0, 0, 0}});
  CHECK_THROWS_AS(clfdr::fit_em(all_empty, 1), clfdr::DataError);
  const auto ds = sample_from(kTruth, 20, 8);
  CHECK_THROWS_AS(clfdr::fit_em(ds, 0), clfdr::DataError);
  clfdr::EmOptions bad_tol;
  bad_tol.tol = 0.0;
  CHECK_THROWS_AS(clfdr::fit_em(ds, 1, bad_tol), clfdr::DataError);
}

TEST_CASE("statistics equal the null responsibilities bit for bit") {
  const auto ds = sample_from(kTruth, 120, 21);
  const auto stats = clfdr::clfdr_stats(ds, kTruth);
  const auto resp = clfdr::e_step(ds, kTruth);
  REQUIRE(stats.size() == 120);
  for (std::size_t m = 0; m < stats.size(); ++m) {
    CHECK(stats[m] == resp.z_hat[0][m]);
    CHECK(stats[m] >= 0.0);
    CHECK(stats[m] <= 1.0);
  }
}

TEST_CASE("statistics approach one as the null proportion grows") {
  // Rows capped at n = 5 keep every per-row likelihood ratio below ~62, so
  // prior odds of 10^6 pin the null responsibility near 1.
  const auto ds = sample_from(kTruth, 30, 13, 1, 5);
  const auto nearly_null =
      make_params({0.0, -1.13, 0.78}, {0.999998, 1e-6, 1e-6});
  const auto stats = clfdr::clfdr_stats(ds, nearly_null);
  for (double s : stats) CHECK(s > 0.99);
}

TEST_CASE("a concentrated small row can beat a diffuse large row") {
  // Strong right-shifted counts at n = 14 versus a nearly uniform row at
  // n = 911: the small row is the stronger evidence against the null.
  const auto ds = make_dataset({{5, 7, 0, 1, 1}, {180, 185, 190, 180, 176}});
  const auto params = make_params({0.0, -1.13, 0.78}, {0.8, 0.1, 0.1});
  const auto stats = clfdr::clfdr_stats(ds, params);
  CHECK(stats[0] < stats[1]);
  CHECK(stats[1] > 0.9);
}

TEST_CASE("statistics are NaN on empty rows") {
  const auto ds = make_dataset({{1, 1, 1, 1, 1}, {0, 0, 0, 0, 0}});
  const auto stats = clfdr::clfdr_stats(ds, kTruth);
  CHECK_FALSE(std::isnan(stats[0]));
  CHECK(std::isnan(stats[1]));
}

TEST_CASE("statistics are invariant to row order") {
  auto ds = sample_from(kTruth, 50, 66);
  auto reversed = ds;
  std::reverse(reversed.counts.begin(), reversed.counts.end());
  const auto s1 = clfdr::clfdr_stats(ds, kTruth);
  auto s2 = clfdr::clfdr_stats(reversed, kTruth);
  std::reverse(s2.begin(), s2.end());
  CHECK(s1 == s2);
}

TEST_CASE("per-row MLE solves the moment equation") {
  const auto uniform = make_record({3, 3, 3, 3, 3});
  CHECK(std::abs(clfdr::row_mle(uniform, kBiomass)) < 1e-9);

  const auto right = make_record({0, 0, 0, 0, 25});
  CHECK(clfdr::row_mle(right, kBiomass) == doctest::Approx(20.0));

  const auto left = make_record({25, 0, 0, 0, 0});
  CHECK(clfdr::row_mle(left, kBiomass) == doctest::Approx(-20.0));

  const auto mixed = make_record({1, 2, 5, 9, 13});
  const double g = clfdr::row_mle(mixed, kBiomass);
  const double target = (0.86 + 2 * 1.34 + 5 * 1.81 + 9 * 2.37 + 13 * 3.00) / 30.0;
  CHECK(clfdr::covariate_mean(g, kBiomass) == doctest::Approx(target).epsilon(1e-9));
}

TEST_CASE("fit JSON carries the expected keys") {
  const auto ds = sample_from(kTruth, 60, 5);
  clfdr::EmOptions opts;
  opts.restarts = 1;
  const auto fit = clfdr::fit_em(ds, 1, opts);
  const std::string json = clfdr::fit_result_to_json(fit);
  for (const char* key :
       {"\"gammas\"", "\"pis\"", "\"loglik\"", "\"aic\"", "\"bic\"",
        "\"iterations\"", "\"converged\""})
    CHECK(json.find(key) != std::string::npos);
}
