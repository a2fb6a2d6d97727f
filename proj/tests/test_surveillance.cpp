#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/negative_binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "epistat/surveillance/endemic_epidemic.hpp"
#include "epistat/surveillance/farrington.hpp"
#include "epistat/surveillance/negbin.hpp"
#include "epistat/surveillance/scoring.hpp"
#include "support/stats.hpp"

using namespace epistat;
using Catch::Approx;

namespace {

// Mass function written out directly: Gamma(y + k) / (Gamma(k) y!) p^k (1-p)^y
// with k = 1/phi and p = k / (k + mu).
double hand_negbin_pmf(long y, double mu, double phi) {
  const double k = 1.0 / phi;
  const double p = k / (k + mu);
  return std::exp(std::lgamma(y + k) - std::lgamma(k) - std::lgamma(y + 1.0) + k * std::log(p) +
                  y * std::log1p(-p));
}

std::vector<long> negbin_series(std::size_t T, double mu, double phi, Rng& rng) {
  std::vector<long> y(T);
  for (auto& v : y) v = NegBin{mu, phi}.sample(rng);
  return y;
}

EEModelSpec plain_spec() {
  EEModelSpec s;
  s.harmonics = 0;
  return s;
}

}  // namespace

TEST_CASE("negative binomial mass function") {
  for (double mu : {0.3, 3.5, 40.0})
    for (double phi : {0.01, 0.1, 2.0})
      for (long y : {0L, 1L, 4L, 17L, 120L}) {
        const boost::math::negative_binomial_distribution<double> ref(1.0 / phi, 1.0 / (1.0 + phi * mu));
        CHECK(NegBin{mu, phi}.pmf(y) == Approx(boost::math::pdf(ref, static_cast<double>(y))).epsilon(1e-10));
        CHECK(NegBin{mu, phi}.pmf(y) == Approx(hand_negbin_pmf(y, mu, phi)).epsilon(1e-9));
      }
  CHECK(NegBin{3.0, 0.0}.pmf(2) == Approx(boost::math::pdf(boost::math::poisson_distribution<double>(3.0), 2.0)).epsilon(1e-13));
  CHECK(std::isinf(NegBin{3.0, 0.1}.log_pmf(-1)));
  CHECK(NegBin{2.0, 0.5}.variance() == 2.0 * (1.0 + 0.5 * 2.0));
}

TEST_CASE("negative binomial normalization, cdf and quantile") {
  for (double mu : {0.5, 7.0, 60.0})
    for (double phi : {0.0, 0.05, 1.5}) {
      const NegBin nb{mu, phi};
      double total = 0.0, running = 0.0;
      long y = 0;
      for (; total < 1.0 - 1e-10 && y < 100000; ++y) {
        total += nb.pmf(y);
        running = total;
        if (y % 7 == 0) CHECK(nb.cdf(y) == Approx(running).epsilon(1e-10));
      }
      CHECK(std::abs(total - 1.0) < 1e-8);
      for (double q : {0.5, 0.9, 0.995}) {
        long brute = 0;
        double c = nb.pmf(0);
        while (c < q) c += nb.pmf(++brute);
        CHECK(nb.quantile(q) == brute);
      }
    }
}

TEST_CASE("negative binomial is the Poisson limit as phi tends to zero") {
  const boost::math::poisson_distribution<double> pois(4.2);
  for (long y : {0L, 3L, 9L})
    CHECK(NegBin{4.2, 1e-12}.log_pmf(y) == Approx(std::log(boost::math::pdf(pois, double(y)))).margin(1e-6));
}

TEST_CASE("negative binomial draws have the stated variance") {
  Rng rng(42);
  const NegBin nb{6.0, 0.3};
  std::vector<double> x(1000000);
  for (auto& v : x) v = static_cast<double>(nb.sample(rng));
  CHECK(oracle::mean(x) == Approx(6.0).epsilon(0.005));
  CHECK(oracle::variance(x) == Approx(nb.variance()).epsilon(0.01));
}

TEST_CASE("endemic-epidemic log-likelihood hand example") {
  CountPanel panel;
  panel.y = {{3, 4}};
  const auto spec = plain_spec();
  EEParams p;
  p.lambda_ar = 0.5;
  p.alpha = {std::log(2.0)};
  p.phi = 0.1;
  CHECK(ee_loglik(panel, spec, p) == Approx(std::log(hand_negbin_pmf(4, 3.5, 0.1))).epsilon(1e-12));
}

TEST_CASE("endemic-epidemic Poisson limit") {
  Rng rng(3);
  CountPanel panel;
  panel.y = {negbin_series(60, 5.0, 0.0, rng), negbin_series(60, 5.0, 0.0, rng)};
  auto spec = plain_spec();
  spec.include_ar = false;
  spec.shared_alpha = true;
  EEParams p;
  p.alpha = {std::log(5.0)};
  p.phi = 1e-12;
  const boost::math::poisson_distribution<double> pois(5.0);
  double expected = 0.0;
  for (const auto& row : panel.y)
    for (std::size_t t = 1; t < row.size(); ++t) expected += std::log(boost::math::pdf(pois, double(row[t])));
  CHECK(std::abs(ee_loglik(panel, spec, p) - expected) < 1e-6);
}

TEST_CASE("endemic-epidemic log-likelihood with seasonality and neighbours") {
  Rng rng(9);
  CountPanel panel;
  for (int i = 0; i < 3; ++i) panel.y.push_back(negbin_series(30, 4.0 + i, 0.2, rng));
  Eigen::MatrixXd w(3, 3);
  w << 0, 1, 0.5, 1, 0, 1, 0.5, 1, 0;
  panel.weights = w;
  panel.lag = 2;
  EEModelSpec spec;
  spec.harmonics = 1;
  spec.period = 12;
  spec.include_neighbor = true;
  spec.shared_nu = false;
  EEParams p;
  p.lambda_ar = 0.3;
  p.alpha = {1.0, 1.2, 0.8};
  p.beta = {0.4};
  p.delta = {-0.2};
  p.nu = {0.05, 0.1, 0.02};
  p.phi = 0.15;
  // Direct evaluation, t 1-based in the seasonal terms.
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t t = 2; t < 30; ++t) {
      const double tt = static_cast<double>(t + 1);
      const double w1 = 2 * std::numbers::pi / 12;
      double mu = std::exp(p.alpha[i] + 0.4 * std::sin(w1 * tt) - 0.2 * std::cos(w1 * tt));
      mu += 0.3 * panel.y[i][t - 1];
      for (std::size_t j = 0; j < 3; ++j)
        if (j != i) mu += p.nu[i] * w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * panel.y[j][t - 2];
      expected += std::log(hand_negbin_pmf(panel.y[i][t], mu, 0.15));
    }
  CHECK(ee_loglik(panel, spec, p) == Approx(expected).epsilon(1e-10));

  // Analytic gradient against central differences.
  const EELayout lay(3, spec);
  const Eigen::VectorXd v = lay.pack(p);
  const Eigen::VectorXd g = ee_loglik_gradient(panel, spec, p);
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    Eigen::VectorXd up = v, dn = v;
    const double h = 1e-6;
    up(k) += h;
    dn(k) -= h;
    const double fd = (ee_loglik(panel, spec, lay.unpack(up)) - ee_loglik(panel, spec, lay.unpack(dn))) / (2 * h);
    CHECK(g(k) == Approx(fd).epsilon(1e-5).margin(1e-5));
  }

  SECTION("relabeling units leaves the likelihood unchanged") {
    const std::vector<std::size_t> perm{2, 0, 1};
    CountPanel q = panel;
    EEParams pp = p;
    Eigen::MatrixXd wq(3, 3);
    for (std::size_t a = 0; a < 3; ++a) {
      q.y[a] = panel.y[perm[a]];
      pp.alpha[a] = p.alpha[perm[a]];
      pp.nu[a] = p.nu[perm[a]];
      for (std::size_t b = 0; b < 3; ++b)
        wq(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            w(static_cast<Eigen::Index>(perm[a]), static_cast<Eigen::Index>(perm[b]));
    }
    q.weights = wq;
    CHECK(ee_loglik(q, spec, pp) == Approx(ee_loglik(panel, spec, p)).epsilon(1e-13));
  }
}

TEST_CASE("endemic-epidemic fit recovers simulated parameters") {
  const auto spec = plain_spec();
  EEParams truth;
  truth.lambda_ar = 0.4;
  truth.alpha.assign(4, std::log(5.0));
  truth.phi = 0.2;
  int covered = 0, total = 0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    const auto panel = simulate_ee_panel(spec, truth, 4, 300, stream_seed(500, r));
    const auto fit = ee_fit(panel, spec);
    const EELayout lay(4, spec);
    const Eigen::VectorXd v = lay.pack(truth);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const auto [lo, hi] = fit.wald_interval(static_cast<std::size_t>(k));
      covered += lo <= v(k) && v(k) <= hi;
      ++total;
    }
    // Local maximum in phi along the fitted profile.
    EEParams up = fit.params, dn = fit.params;
    up.phi *= 1.05;
    dn.phi *= 0.95;
    CHECK(ee_loglik(panel, spec, up) < fit.loglik);
    CHECK(ee_loglik(panel, spec, dn) < fit.loglik);
  }
  CHECK(covered >= 0.9 * total);
}

TEST_CASE("endemic-epidemic fit is deterministic") {
  const auto spec = plain_spec();
  EEParams truth;
  truth.lambda_ar = 0.3;
  truth.alpha.assign(2, std::log(3.0));
  truth.phi = 0.1;
  const auto panel = simulate_ee_panel(spec, truth, 2, 150, 4);
  const auto a = ee_fit(panel, spec);
  const auto b = ee_fit(panel, spec);
  CHECK(a.estimate == b.estimate);
  CHECK(a.se == b.se);
  CHECK(a.names == std::vector<std::string>{"lambda_ar", "alpha[1]", "alpha[2]", "phi"});
}

TEST_CASE("endemic-epidemic fit near the autoregressive boundary") {
  const auto spec = plain_spec();
  EEParams truth;
  truth.lambda_ar = 0.0;
  truth.alpha.assign(3, std::log(5.0));
  truth.phi = 0.2;
  int near_zero = 0;
  const int reps = 15;
  for (int r = 0; r < reps; ++r) {
    const auto fit = ee_fit(simulate_ee_panel(spec, truth, 3, 200, stream_seed(77, r)), spec);
    CHECK(fit.params.lambda_ar < 0.15);
    if (fit.boundary_ar || fit.wald_interval(0).first <= 0.0) ++near_zero;
  }
  CHECK(2 * near_zero > reps);
}

TEST_CASE("endemic-epidemic guards") {
  CountPanel tiny;
  tiny.y = {{1, 2, 3}};
  CHECK_THROWS_AS(ee_fit(tiny, plain_spec()), DomainError);
  CountPanel panel;
  panel.y.assign(2, std::vector<long>(10, 3));
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(2, 2) - Eigen::MatrixXd::Identity(2, 2);
  panel.weights = w;
  EEModelSpec spec = plain_spec();
  spec.include_neighbor = true;
  spec.shared_nu = false;
  CHECK_THROWS_AS(ee_fit(panel, spec), DomainError);
  panel.y[0][3] = -1;
  CHECK_THROWS_AS(panel.validate(), DomainError);
}

TEST_CASE("one-step predictive") {
  auto spec = plain_spec();
  spec.include_ar = false;
  EEParams truth;
  truth.alpha.assign(2, std::log(4.0));
  truth.phi = 0.1;
  const auto panel = simulate_ee_panel(spec, truth, 2, 120, 6);
  const auto fit = ee_fit(panel, spec);
  const auto a = ee_predict_one_step(fit, panel, 10);
  const auto b = ee_predict_one_step(fit, panel, 90);
  CHECK(a[0].mu == b[0].mu);
  CHECK(a[1].mu == b[1].mu);

  EEModelSpec full;
  full.harmonics = 1;
  full.include_neighbor = true;
  EEParams p;
  p.lambda_ar = 0.3;
  p.alpha = {1.0, 1.5};
  p.beta = {0.2};
  p.delta = {0.1};
  p.nu = {0.05};
  p.phi = 0.2;
  Eigen::MatrixXd w(2, 2);
  w << 0, 1, 1, 0;
  auto pan = simulate_ee_panel(full, p, 2, 200, 8, w);
  const auto f = ee_fit(pan, full);
  const std::size_t t = 150;
  const auto pred = ee_predict_one_step(f, pan, t);
  for (std::size_t i = 0; i < 2; ++i) {
    const double w1 = 2 * std::numbers::pi / 52;
    const double eta = f.params.alpha[i] + f.params.beta[0] * std::sin(w1 * (t + 1)) +
                       f.params.delta[0] * std::cos(w1 * (t + 1));
    const double mu = f.params.lambda_ar * pan.y[i][t - 1] + f.params.nu[0] * pan.y[1 - i][t - 1] + std::exp(eta);
    CHECK(pred[i].mu == Approx(mu).epsilon(1e-14));
    CHECK(pred[i].phi == f.params.phi);
  }
  // One step beyond the panel is allowed.
  CHECK(ee_predict_one_step(f, pan, 200).size() == 2);
  CHECK_THROWS_AS(ee_predict_one_step(f, pan, 201), DomainError);
}

TEST_CASE("one-step predictions are calibrated") {
  const auto spec = plain_spec();
  EEParams truth;
  truth.lambda_ar = 0.4;
  truth.alpha.assign(4, std::log(5.0));
  truth.phi = 0.2;
  const auto panel = simulate_ee_panel(spec, truth, 4, 400, 19);
  const auto fit = ee_fit(panel, spec);
  Rng rng(1);
  std::vector<double> hist(10, 0.0);
  double n = 0;
  for (std::size_t t = 1; t < 400; ++t) {
    const auto pred = ee_predict_one_step(fit, panel, t);
    for (std::size_t i = 0; i < 4; ++i) {
      const double u = randomized_pit(pred[i], panel.y[i][t], rng);
      hist[std::min<std::size_t>(9, static_cast<std::size_t>(u * 10))] += 1;
      ++n;
    }
  }
  CHECK(oracle::chi_square_pvalue(hist, std::vector<double>(10, n / 10)) > 0.05);
}

TEST_CASE("logarithmic score") {
  CHECK(log_score(PoissonPredictive{1.0}, 0).value == Approx(1.0).epsilon(1e-14));
  CHECK(log_score(DegeneratePredictive{4}, 4).value == 0.0);
  const auto miss = log_score(DegeneratePredictive{4}, 5);
  CHECK(miss.zero_mass);
  CHECK(std::isinf(miss.value));
  CHECK(log_score(NegBin{3.0, 0.2}, 2).value == Approx(-std::log(hand_negbin_pmf(2, 3.0, 0.2))).epsilon(1e-10));
  const std::vector<Predictive> preds{PoissonPredictive{1.0}, DegeneratePredictive{2}};
  const std::vector<long> ys{0, 2};
  CHECK(mean_log_score(preds, ys).value == Approx(0.5).epsilon(1e-14));
}

TEST_CASE("the true model has the lower mean log score") {
  const auto spec = plain_spec();
  EEParams truth;
  truth.lambda_ar = 0.4;
  truth.alpha.assign(4, std::log(5.0));
  truth.phi = 0.2;
  int wins = 0;
  const int reps = 100;
  const EELayout lay(4, spec);
  for (int r = 0; r < reps; ++r) {
    const auto panel = simulate_ee_panel(spec, truth, 4, 100, stream_seed(31, r));
    double right = 0.0, shifted = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t t = 1; t < 100; ++t) {
        const double mu = detail::ee_mean(panel, lay, truth, i, t).mu;
        right += log_score(NegBin{mu, 0.2}, panel.y[i][t]).value;
        shifted += log_score(NegBin{mu * 1.5, 0.2}, panel.y[i][t]).value;
      }
    wins += right < shifted;
  }
  CHECK(wins >= 95);
}

TEST_CASE("farrington thresholds on fixed histories") {
  FarringtonConfig cfg;
  const std::size_t s = 5 * 52 + 10;
  std::vector<long> flat(s + 1, 10);
  const auto r = farrington_threshold(flat, s, cfg);
  CHECK(r.assessable());
  CHECK(r.mu_s == Approx(10.0).epsilon(1e-9));
  CHECK_FALSE(r.alarm);

  // Fixed synthetic history of Poisson(10) draws.
  Rng rng(17);
  std::vector<long> pois(s + 1);
  for (auto& v : pois) v = rng.poisson(10.0);
  pois[s] = 100;
  const auto hit = farrington_threshold(pois, s, cfg);
  CHECK(hit.alarm);
  CHECK(hit.g_s < 100);
  CHECK(hit.g_s == NegBin{hit.mu_s, hit.phi}.quantile(cfg.q));
  CHECK(std::string(farrington_formula_id).find("negbin") != std::string::npos);
}

TEST_CASE("farrington reference values") {
  FarringtonConfig cfg;
  cfg.b = 2;
  cfg.w_half = 1;
  const auto idx = farrington_reference_indices(200, cfg);
  REQUIRE(idx);
  std::vector<std::size_t> expected{95, 96, 97, 147, 148, 149};
  std::vector<std::size_t> got = *idx;
  std::sort(got.begin(), got.end());
  CHECK(got == expected);
  CHECK_FALSE(farrington_reference_indices(104, cfg));
}

TEST_CASE("farrington status for short or empty histories") {
  FarringtonConfig cfg;
  std::vector<long> shortish(100, 5);
  const auto r = farrington_threshold(shortish, 50, cfg);
  CHECK(r.status == FarringtonStatus::insufficient_history);
  CHECK_FALSE(r.alarm);

  std::vector<long> zeros(400, 0);
  zeros[399] = 3;
  const auto det = run_detector(zeros, cfg);
  for (const auto& w : det.weeks) CHECK_FALSE(w.assessable());
  CHECK_FALSE(det.alarm_time);
}

TEST_CASE("raising the current count never removes an alarm") {
  FarringtonConfig cfg;
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    auto y = negbin_series(5 * 52 + 20, 8.0, 0.3, rng);
    const std::size_t s = y.size() - 1;
    bool alarmed = false;
    for (long v = 0; v < 60; ++v) {
      y[s] = v;
      const bool a = farrington_threshold(y, s, cfg).alarm;
      CHECK((!alarmed || a));
      alarmed = a;
    }
    CHECK(alarmed);
  }
}

TEST_CASE("farrington false-alarm rate in control") {
  FarringtonConfig cfg;
  Rng rng(99);
  const auto y = negbin_series(5 * 52 + 3 + 1000, 10.0, 0.1, rng);
  const auto det = run_detector(y, cfg, 5 * 52 + 3);
  int assessed = 0, alarms = 0;
  for (const auto& w : det.weeks) {
    assessed += w.assessable();
    alarms += w.assessable() && w.alarm;
  }
  REQUIRE(assessed == 1000);
  CHECK(alarms <= 2 * (1 - cfg.q) * assessed);
}

TEST_CASE("injected step is detected quickly") {
  FarringtonConfig cfg;
  int quick = 0;
  const int reps = 50;
  const std::size_t s0 = 5 * 52 + 20;
  for (int r = 0; r < reps; ++r) {
    Rng rng(stream_seed(404, r));
    auto y = negbin_series(s0 + 20, 10.0, 0.1, rng);
    for (std::size_t t = s0; t < y.size(); ++t) y[t] *= 5;
    const auto det = run_detector(y, cfg, s0 - 4);
    if (det.alarm_time && *det.alarm_time >= s0 && *det.alarm_time <= s0 + 3) ++quick;
  }
  CHECK(quick >= 0.9 * reps);
}
