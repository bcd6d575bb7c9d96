#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "clfdr/count_data.hpp"
#include "clfdr/loglinear.hpp"
#include "clfdr/math_util.hpp"

namespace {

const clfdr::CovariateVector kBiomass{{0.86, 1.34, 1.81, 2.37, 3.00}};

clfdr::TestRecord make_record(std::vector<std::int64_t> y) {
  clfdr::TestRecord rec;
  rec.y = std::move(y);
  rec.n_total = std::accumulate(rec.y.begin(), rec.y.end(), std::int64_t{0});
  return rec;
}

// All compositions of n into k non-negative cells.
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

TEST_CASE("probabilities at beta = 0 are uniform") {
  const auto p = clfdr::multinomial_probs(0.0, kBiomass);
  REQUIRE(p.size() == 5);
  for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("probability vectors match independent evaluation") {
  const auto p1 = clfdr::multinomial_probs(0.1, kBiomass);
  const std::vector<double> expect1{0.180165610355, 0.189024471483, 0.198120708816,
                                    0.209532002744, 0.223157206601};
  const auto p5 = clfdr::multinomial_probs(0.5, kBiomass);
  const std::vector<double> expect5{0.112079297272, 0.142480711426, 0.180225101258,
                                    0.238461204406, 0.326753685639};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(p1[i] == doctest::Approx(expect1[i]).epsilon(1e-10));
    CHECK(p5[i] == doctest::Approx(expect5[i]).epsilon(1e-10));
  }
}

TEST_CASE("probabilities sum to one even for extreme beta") {
  for (double beta : {-700.0, -50.0, -1.0, 0.0, 3.0, 50.0, 700.0}) {
    const auto p = clfdr::multinomial_probs(beta, kBiomass);
    double sum = 0.0;
    for (double v : p) {
      REQUIRE(std::isfinite(v));
      REQUIRE(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("log_normalizer is consistent with the probabilities") {
  const double beta = 0.7;
  const auto p = clfdr::multinomial_probs(beta, kBiomass);
  const double lz = clfdr::log_normalizer(beta, kBiomass);
  for (std::size_t i = 0; i < kBiomass.size(); ++i)
    CHECK(std::log(p[i]) == doctest::Approx(beta * kBiomass[i] - lz).epsilon(1e-12));
}

TEST_CASE("covariate mean and variance against direct sums") {
  const double beta = 0.5;
  const auto p = clfdr::multinomial_probs(beta, kBiomass);
  double mean = 0.0;
  for (std::size_t i = 0; i < 5; ++i) mean += p[i] * kBiomass[i];
  double var = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double d = kBiomass[i] - mean;
    var += p[i] * d * d;
  }
  CHECK(clfdr::covariate_mean(beta, kBiomass) == doctest::Approx(mean).epsilon(1e-13));
  CHECK(clfdr::covariate_variance(beta, kBiomass) == doctest::Approx(var).epsilon(1e-13));
  CHECK(clfdr::covariate_variance(0.0, kBiomass) ==
        doctest::Approx(0.566264).epsilon(1e-12));
}

TEST_CASE("log_pmf hand cases") {
  const auto single = make_record({1, 0, 0, 0, 0});
  CHECK(clfdr::log_pmf(single, 0.0, kBiomass) ==
        doctest::Approx(std::log(0.2)).epsilon(1e-14));

  const auto species1 = make_record({0, 1, 1, 0, 5});
  CHECK(clfdr::log_pmf(species1, 0.0, kBiomass) ==
        doctest::Approx(-7.5283957687553343).epsilon(1e-13));

  const auto empty = make_record({0, 0, 0, 0, 0});
  CHECK_THROWS_AS(clfdr::log_pmf(empty, 0.0, kBiomass), clfdr::DataError);

  clfdr::TestRecord short_rec = make_record({1, 2});
  CHECK_THROWS_AS(clfdr::log_pmf(short_rec, 0.0, kBiomass), clfdr::DataError);
}

TEST_CASE("pmf sums to one over all compositions of n = 3") {
  std::vector<std::vector<std::int64_t>> comps;
  std::vector<std::int64_t> cur;
  compositions(3, 5, cur, comps);
  CHECK(comps.size() == 35);
  for (double beta : {-1.0, 0.0, 0.78, 2.0}) {
    double total = 0.0;
    for (const auto& y : comps) {
      auto rec = make_record(std::vector<std::int64_t>(y));
      total += std::exp(clfdr::log_pmf(rec, beta, kBiomass));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("z_score on the reference rows") {
  const auto r1 = clfdr::z_score(make_record({0, 1, 1, 0, 5}), kBiomass);
  CHECK(r1.t == doctest::Approx(18.15).epsilon(1e-13));
  CHECK(r1.z == doctest::Approx(2.5204156102595862).epsilon(1e-12));
  CHECK(r1.n_total == 7);
  CHECK(r1.p == doctest::Approx(0.011721634154892571).epsilon(1e-11));

  const auto r778 = clfdr::z_score(make_record({134, 117, 252, 231, 177}), kBiomass);
  CHECK(r778.z == doctest::Approx(4.2960115900445506).epsilon(1e-12));
  CHECK(r778.z > 0.0);

  for (std::int64_t c : {1, 3, 10}) {
    const auto ru = clfdr::z_score(
        make_record({c, c, c, c, c}), kBiomass);
    CHECK(ru.z == doctest::Approx(0.0));
    CHECK(std::abs(ru.z) < 1e-12);
    CHECK(ru.p == doctest::Approx(1.0));
  }

  CHECK_THROWS_AS(clfdr::z_score(make_record({0, 0, 0, 0, 0}), kBiomass),
                  clfdr::DataError);
}

TEST_CASE("standard-normal p-values") {
  const auto f0 = clfdr::NullDistribution::standard_normal();
  CHECK(clfdr::p_value(0.0, f0) == doctest::Approx(1.0));
  CHECK(clfdr::p_value(1.96, f0) ==
        doctest::Approx(2.0 * (1.0 - 0.97500210485177957)).epsilon(1e-12));
  CHECK(clfdr::p_value(-1.96, f0) == doctest::Approx(clfdr::p_value(1.96, f0)));
  CHECK(clfdr::p_value(50.0, f0) >= 0.0);
}

TEST_CASE("empirical p-values use the add-one tail estimator") {
  clfdr::NullDistribution f0;
  f0.kind = clfdr::NullDistribution::Kind::monte_carlo_empirical;
  f0.samples = {-2.0, -1.0, 0.0, 1.5, 3.0};  // |z| tail counts over 5 samples

  // |z| = 1.2: samples with value >= 1.2 are {1.5, 3.0} -> (1+2)/(1+5) = 0.5.
  CHECK(clfdr::p_value(1.2, f0) == doctest::Approx(2.0 * 3.0 / 6.0).epsilon(1e-15));
  CHECK(clfdr::p_value(-1.2, f0) == doctest::Approx(clfdr::p_value(1.2, f0)));
  // |z| = 10: no samples in the tail -> (1+0)/6, still positive.
  CHECK(clfdr::p_value(10.0, f0) == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
  // |z| = 0: all five count (>= 0 keeps 0.0, 1.5, 3.0) -> capped at 1.
  CHECK(clfdr::p_value(0.0, f0) <= 1.0);
}

TEST_CASE("simulated null is deterministic, sorted, and roughly standard") {
  const auto f0a = clfdr::simulate_null(kBiomass, 25, 2000, 99);
  const auto f0b = clfdr::simulate_null(kBiomass, 25, 2000, 99);
  const auto f0c = clfdr::simulate_null(kBiomass, 25, 2000, 100);
  CHECK(f0a.kind == clfdr::NullDistribution::Kind::monte_carlo_empirical);
  REQUIRE(f0a.samples.size() == 2000);
  CHECK(f0a.samples == f0b.samples);
  CHECK(f0a.samples != f0c.samples);
  CHECK(std::is_sorted(f0a.samples.begin(), f0a.samples.end()));
  const double mean = clfdr::pairwise_sum(f0a.samples) / 2000.0;
  CHECK(std::abs(mean) < 0.1);
  double var = 0.0;
  for (double z : f0a.samples) var += (z - mean) * (z - mean);
  var /= 2000.0;
  CHECK(var == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("conditional moments match independent evaluation") {
  CHECK(clfdr::conditional_mean(911, 0.1, kBiomass) ==
        doctest::Approx(2.2820897166733451).epsilon(1e-12));
  CHECK(clfdr::conditional_mean(911, 0.3, kBiomass) ==
        doctest::Approx(6.8610388986252264).epsilon(1e-12));
  CHECK(clfdr::conditional_mean(5, 1.0, kBiomass) ==
        doctest::Approx(1.5872649843878846).epsilon(1e-12));
  CHECK(clfdr::conditional_mean(25, 1.0, kBiomass) ==
        doctest::Approx(3.5492324033964524).epsilon(1e-12));
  CHECK(clfdr::conditional_mean(10, 0.0, kBiomass) == doctest::Approx(0.0));

  CHECK(clfdr::conditional_sd(1.0, kBiomass) ==
        doctest::Approx(0.88856037928448154).epsilon(1e-12));
  CHECK(clfdr::conditional_sd(0.5, kBiomass) ==
        doctest::Approx(0.98407134042533695).epsilon(1e-12));
  CHECK(clfdr::conditional_sd(2.0, kBiomass) ==
        doctest::Approx(0.61577107136366213).epsilon(1e-12));
  CHECK(clfdr::conditional_sd(0.0, kBiomass) == doctest::Approx(1.0).epsilon(1e-14));
  for (double g : {0.5, 1.0, 2.0}) CHECK(clfdr::conditional_sd(g, kBiomass) < 1.0);
}

TEST_CASE("conditional mean scales with sqrt(n)") {
  const double m1 = clfdr::conditional_mean(1, 0.7, kBiomass);
  const double m9 = clfdr::conditional_mean(9, 0.7, kBiomass);
  CHECK(m9 == doctest::Approx(3.0 * m1).epsilon(1e-13));
}
