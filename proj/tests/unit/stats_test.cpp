#include <catch2/catch.hpp>

#include "gpnas/rng.hpp"
#include "gpnas/stats.hpp"

using namespace gpnas;

TEST_CASE("chi-square survival function matches tabulated values", "[stats]") {
  CHECK(stats::chi_square_sf(0.0, 8) == Approx(1.0));
  // 0.01 upper quantile of chi2(8) is 20.090
  CHECK(stats::chi_square_sf(20.090, 8) == Approx(0.01).margin(5e-4));
  // 0.05 upper quantile of chi2(8) is 15.507
  CHECK(stats::chi_square_sf(15.507, 8) == Approx(0.05).margin(1e-3));
  CHECK(stats::chi_square_sf(3.0, 3) > stats::chi_square_sf(4.0, 3));
}

TEST_CASE("normal cdf", "[stats]") {
  CHECK(stats::normal_cdf(0.0) == Approx(0.5));
  CHECK(stats::normal_cdf(1.959964) == Approx(0.975).margin(1e-5));
  CHECK(stats::normal_cdf(-3.0) == Approx(0.00135).margin(1e-4));
}

TEST_CASE("chi-square uniformity test separates uniform from skewed", "[stats]") {
  std::vector<long long> uniform(9, 1111);
  CHECK(stats::chi_square_uniform_pvalue(uniform) > 0.9);

  std::vector<long long> skewed(9, 500);
  skewed[0] = 6000;
  CHECK(stats::chi_square_uniform_pvalue(skewed) < 1e-6);

  Rng rng(41);
  std::vector<long long> sampled(9, 0);
  for (int i = 0; i < 10000; ++i) ++sampled[rng.uniform_index(9)];
  CHECK(stats::chi_square_uniform_pvalue(sampled) > 0.01);
}

TEST_CASE("one-sided Mann-Whitney", "[stats]") {
  std::vector<double> low, high, same_a, same_b;
  Rng rng(7);
  for (int i = 0; i < 80; ++i) {
    low.push_back(rng.uniform());
    high.push_back(rng.uniform() + 2.0);
    same_a.push_back(rng.uniform());
    same_b.push_back(rng.uniform());
  }
  CHECK(stats::mann_whitney_less_pvalue(low, high) < 1e-6);
  CHECK(stats::mann_whitney_less_pvalue(high, low) > 0.999);
  CHECK(stats::mann_whitney_less_pvalue(same_a, same_b) > 0.05);

  // heavy ties must not blow up the variance correction
  std::vector<double> tied_a(50, 1.0), tied_b(50, 1.0);
  CHECK(stats::mann_whitney_less_pvalue(tied_a, tied_b) == Approx(1.0));
}

TEST_CASE("kendall tau", "[stats]") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y = {2, 4, 6, 8, 10};
  std::vector<double> y_rev = {10, 8, 6, 4, 2};
  CHECK(stats::kendall_tau(x, y) == Approx(1.0));
  CHECK(stats::kendall_tau(x, y_rev) == Approx(-1.0));

  Rng rng(11);
  std::vector<double> a, b;
  for (int i = 0; i < 400; ++i) {
    a.push_back(rng.uniform());
    b.push_back(rng.uniform());
  }
  CHECK(std::abs(stats::kendall_tau(a, b)) < 0.1);
}

TEST_CASE("quantiles and moments", "[stats]") {
  std::vector<double> v = {4.0, 1.0, 3.0, 2.0};
  CHECK(stats::median(v) == Approx(2.5));
  CHECK(stats::quantile(v, 0.0) == Approx(1.0));
  CHECK(stats::quantile(v, 1.0) == Approx(4.0));
  CHECK(stats::quantile(v, 0.25) == Approx(1.75));
  CHECK(stats::mean(v) == Approx(2.5));
  CHECK(stats::variance(v) == Approx(1.25));
  CHECK_THROWS_AS(stats::median(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("rng basics", "[stats]") {
  Rng a(123), b(123), c(124);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  CHECK(a.next_u64() != c.next_u64());

  Rng rng(5);
  double acc = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    acc += u;
  }
  CHECK(acc / 20000.0 == Approx(0.5).margin(0.01));

  double m = 0.0, s2 = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double z = rng.normal();
    m += z;
    s2 += z * z;
  }
  CHECK(m / 20000.0 == Approx(0.0).margin(0.03));
  CHECK(s2 / 20000.0 == Approx(1.0).margin(0.05));
}
