#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"

using namespace nlsmod;
using testutil::sample;

namespace {

AsymptoticProfile make_profile(const GridSpec& g, Complex lambda, double b, double f0_value = 0.1) {
  AsymptoticProfile prof;
  prof.params = PhysParams::make(1, lambda, b);
  prof.phi0 = sample(g, [](const Point& x) { return Complex(1.0 / std::sqrt(1.0 + x[0] * x[0])); });
  prof.f0 = ScalarField(g, 0.0);
  for_each_point(g, [&](std::size_t i, const Point& x) {
    prof.f0[i] = f0_value * std::exp(-x[0] * x[0] / 9.0);
  });
  prof.w0 = sample(g, [](const Point& x) { return std::exp(Complex(-0.25 * x[0] * x[0], 0.1 * x[0])); });
  return prof;
}

// Closed-form psi at a single point, from the definition.
double psi_point(double phi_abs, double f0, double tau, const PhysParams& p) {
  const double ell = std::abs(std::log(1.0 - p.b * tau));
  const double one_f = 1.0 + f0;
  return std::pow(one_f / (one_f + p.alpha * std::abs(p.lambda.imag()) / p.b *
                                        std::pow(phi_abs, p.alpha) * ell),
                  1.0 / p.alpha);
}

}  // namespace

TEST(ComputeL, RealAndConstantFieldsVanish) {
  GridSpec g(1, 10.0, 128);
  auto real = sample(g, [](const Point& x) { return Complex(std::exp(-x[0] * x[0]) + 0.5); });
  for (double v : compute_L(real).L.values) EXPECT_NEAR(v, 0.0, 1e-12);
  Field c(g, Frame::V, 0.0);
  for (auto& v : c.values) v = Complex(0.3, -2.0);
  for (double v : compute_L(c).L.values) EXPECT_NEAR(v, 0.0, 1e-13);
}

TEST(ComputeL, ChirpedGaussian) {
  // k = 1 has to be a grid wavenumber, which needs L to be a multiple of pi.
  GridSpec g(1, 8.0 * std::numbers::pi, 1024);
  const double k = 1.0;
  auto v = sample(g, [&](const Point& x) { return std::exp(Complex(-x[0] * x[0], k * x[0])); });
  auto L = compute_L(v);
  EXPECT_EQ(L.masked, 0u);
  for (int i = 0; i < g.points; ++i) {
    const double x = g.coordinate(i);
    EXPECT_NEAR(L.L[i], 4.0 * k * x * std::exp(-x * x), 1e-10) << x;
  }
  EXPECT_NEAR(4.0 * 0.5 * std::exp(-0.25), 1.5576, 1e-4);
}

TEST(ComputeL, ZerosAreMaskedAndFlagged) {
  GridSpec g(1, 10.0, 64);
  Field v(g, Frame::V, 0.0);
  v[3] = 1.0;
  auto L = compute_L(v);
  EXPECT_EQ(L.masked, 63u);
  EXPECT_TRUE(L.flagged);
}

TEST(AccumulateF, RealTrajectoryGivesZero) {
  GridSpec g(1, 10.0, 128);
  auto p = PhysParams::make(1, Complex(0.0, -1.0), 2.0);
  Trajectory tr;
  tr.params = p;
  for (double tau : {0.0, 0.1, 0.3, 0.45}) {
    auto v = sample(g, [&](const Point& x) { return Complex((1.0 + tau) / (1.0 + x[0] * x[0])); }, Frame::V, tau);
    tr.snapshots.push_back(v);
  }
  auto acc = accumulate_f(tr, tr.snapshots.front(), p);
  for (const auto& f : acc.f_t)
    for (double v : f.values) EXPECT_NEAR(v, 0.0, 1e-10);
  for (double v : acc.f0.values) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(AccumulateF, ConstantIntegrandIsExact) {
  // v = e^{ikx} g with g = e^{-x^2/8} and phi0 = v, alpha = 2: the integrand is L / g = k x / 2,
  // so f(tau) = -k x tau and f0 = -k x / b.
  GridSpec g(1, 8.0 * std::numbers::pi, 1024);
  const double k = 1.0, b = 4.0;
  auto p = PhysParams::make(1, Complex(0.0, -1.0), b);
  auto v0 = sample(g, [&](const Point& x) { return std::exp(Complex(-x[0] * x[0] / 8.0, k * x[0])); });
  Trajectory tr;
  tr.params = p;
  for (double tau : {0.0, 0.05, 0.1, 0.2, 0.24}) {
    Field v = v0;
    v.time = tau;
    tr.snapshots.push_back(v);
  }
  auto acc = accumulate_f(tr, v0, p);
  for (int i = 0; i < g.points; ++i) {
    const double x = g.coordinate(i);
    if (std::abs(x) > 8.0) continue;
    for (std::size_t s = 0; s < acc.times.size(); ++s)
      EXPECT_NEAR(acc.f_t[s][i], -k * x * acc.times[s], 1e-8) << x;
    EXPECT_NEAR(acc.f0[i], -k * x / b, 1e-8) << x;
  }
}

TEST(ProfileEval, ConservativePsiIsOne) {
  GridSpec g(1, 10.0, 64);
  auto prof = make_profile(g, Complex(1.0, 0.0), 5.0);
  for (double tau : {0.0, 0.1, 0.19999})
    for (double v : profile_eval(prof, tau, ProfileQuantity::Psi).values) EXPECT_EQ(v, 1.0);
}

TEST(ProfileEval, InitialTime) {
  GridSpec g(1, 10.0, 64);
  auto prof = make_profile(g, Complex(1.0, -1.0), 5.0);
  for (double v : profile_eval(prof, 0.0, ProfileQuantity::Psi).values) EXPECT_EQ(v, 1.0);
  for (double v : profile_eval(prof, 0.0, ProfileQuantity::Theta).values) EXPECT_EQ(v, 0.0);
}

TEST(ProfileEval, ThetaMatchesQuadrature) {
  GridSpec g(1, 10.0, 64);
  for (Complex lambda : {Complex(1.0, -1.0), Complex(-2.0, -0.5)}) {
    auto prof = make_profile(g, lambda, 20.0);
    const double tau = (1.0 - std::exp(-5.0)) / 20.0;
    auto theta = profile_eval(prof, tau, ProfileQuantity::Theta);
    auto psi = profile_eval(prof, tau, ProfileQuantity::Psi);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double q = oracles::theta_by_quadrature(std::abs(prof.phi0[i]), prof.f0[i], tau, prof.params);
      worst = std::max(worst, std::abs(theta[i] - q));
      EXPECT_NEAR(psi[i], psi_point(std::abs(prof.phi0[i]), prof.f0[i], tau, prof.params), 1e-14);
      EXPECT_GE(psi[i], 0.0);
      EXPECT_LE(psi[i], 1.0);
    }
    EXPECT_LE(worst, 1e-12);
  }
}

TEST(ProfileEval, VTildeIsPsiTimesModulus) {
  GridSpec g(1, 10.0, 64);
  auto prof = make_profile(g, Complex(0.0, -1.0), 20.0);
  const double tau = 0.049;
  auto psi = profile_eval(prof, tau, ProfileQuantity::Psi);
  auto vt = profile_eval(prof, tau, ProfileQuantity::VTilde);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_NEAR(vt[i], psi[i] * std::abs(prof.phi0[i]) / std::sqrt(1.0 + prof.f0[i]), 1e-13);
}

TEST(ProfileEval, BelowThresholdRejected) {
  GridSpec g(1, 10.0, 64);
  auto prof = make_profile(g, Complex(0.0, -1.0), 20.0, -1.5);
  EXPECT_THROW(profile_eval(prof, 0.01, ProfileQuantity::Psi), Error);
  EXPECT_THROW(profile_eval(prof, 1.0 / 20.0, ProfileQuantity::Psi), Error);
}

TEST(ExtractW0, RecoversConstructedProfile) {
  GridSpec g(1, 10.0, 128);
  auto prof = make_profile(g, Complex(1.0, -1.0), 20.0);
  const Field w_true = prof.w0;
  auto h = sample(g, [](const Point& x) { return Complex(0.3 / (1.0 + x[0] * x[0]), 0.1); });
  Trajectory tr;
  tr.params = prof.params;
  for (double e : {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    const double tau = (1.0 - e) / 20.0;
    auto psi = profile_eval(prof, tau, ProfileQuantity::Psi);
    auto theta = profile_eval(prof, tau, ProfileQuantity::Theta);
    Field v(g, Frame::V, tau);
    for (std::size_t i = 0; i < g.size(); ++i)
      v[i] = psi[i] * (w_true[i] + e * h[i]) * std::polar(1.0, -theta[i]);
    tr.snapshots.push_back(v);
  }
  prof.w0 = Field{};
  extract_w0(tr, prof, 1.0, 1.0);
  EXPECT_LE(sup_distance(prof.w0, w_true), 1e-10);
  EXPECT_TRUE(prof.w_convergent);
  for (const auto& v : tr.snapshots) {
    auto w = form_w(v, prof);
    const double e = 1.0 - 20.0 * v.time;
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(w[i] - w_true[i] - e * h[i]), 0.0, 1e-10);
  }
}

TEST(ExtractW0, ConservativeModulusUnchanged) {
  GridSpec g(1, 10.0, 64);
  auto prof = make_profile(g, Complex(2.0, 0.0), 5.0);
  auto v = sample(g, [](const Point& x) { return std::exp(Complex(-x[0] * x[0], x[0])); }, Frame::V, 0.15);
  auto w = form_w(v, prof);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(std::abs(w[i]), std::abs(v[i]), 1e-15);
}

TEST(ExtractW0, GrowingIncrementsFlagged) {
  GridSpec g(1, 10.0, 64);
  auto prof = make_profile(g, Complex(0.0, -1.0), 20.0);
  Trajectory tr;
  tr.params = prof.params;
  int k = 0;
  for (double e : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double tau = (1.0 - e) / 20.0;
    auto psi = profile_eval(prof, tau, ProfileQuantity::Psi);
    Field v(g, Frame::V, tau);
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = psi[i] * prof.w0[i] * (1.0 + k * k);
    tr.snapshots.push_back(v);
    ++k;
  }
  extract_w0(tr, prof, 1.0, 1.0);
  EXPECT_FALSE(prof.w_convergent);
  EXPECT_FALSE(prof.flags.empty());
}

TEST(ZProfile, InitialTimeConservative) {
  GridSpec g(1, 10.0, 128);
  auto prof = make_profile(g, Complex(1.0, 0.0), 3.0);
  auto z = z_profile(0.0, prof);
  for (int i = 0; i < g.points; ++i) {
    const double x = z.grid.coordinate(i);
    EXPECT_NEAR(std::abs(z[i] - std::polar(1.0, 3.0 * x * x / 4.0) * prof.w0[i]), 0.0, 1e-14);
  }
}

TEST(ZProfile, InitialTimeDissipative) {
  GridSpec g(1, 10.0, 128);
  auto prof = make_profile(g, Complex(1.0, -1.0), 3.0);
  auto z = z_profile(0.0, prof);
  for (int i = 0; i < g.points; ++i) {
    const double x = z.grid.coordinate(i);
    EXPECT_NEAR(std::abs(z[i] - std::polar(1.0, 3.0 * x * x / 4.0) * prof.w0[i]), 0.0, 1e-14);
  }
}

TEST(ZProfile, MatchesDisplayedForm) {
  GridSpec g(1, 10.0, 128);
  const double t = 0.7;
  for (Complex lambda : {Complex(1.5, 0.0), Complex(1.0, -1.0)}) {
    auto prof = make_profile(g, lambda, 3.0);
    const auto& p = prof.params;
    auto z = z_profile(t, prof);
    const double a = 1.0 + p.b * t, tau = t / a;
    for (int i = 0; i < g.points; ++i) {
      const double x = z.grid.coordinate(i);
      EXPECT_NEAR(x / a, g.coordinate(i), 1e-12);
      const Complex w = prof.w0[i];
      double Theta;
      double Psi = 1.0;
      if (p.dissipative()) {
        Psi = psi_point(std::abs(prof.phi0[i]), prof.f0[i], tau, p);
        Theta = -lambda.real() / lambda.imag() * std::log(Psi);
      } else {
        Theta = -lambda.real() / p.b * std::pow(std::abs(w), p.alpha) * std::log(a);
      }
      const Complex ref = std::pow(a, -0.5) * std::polar(1.0, p.b * x * x / (4.0 * a) + Theta) * Psi * w;
      EXPECT_NEAR(std::abs(z[i] - ref), 0.0, 1e-10) << x;
    }
  }
}

TEST(Fits, LogLogSlope) {
  std::vector<double> t, r;
  for (int k = 0; k < 12; ++k) {
    t.push_back(std::pow(10.0, 0.5 * k));
    r.push_back(3.0 * std::pow(1.0 + t.back(), -0.9));
  }
  std::vector<double> one_plus_t;
  for (double v : t) one_plus_t.push_back(1.0 + v);
  EXPECT_NEAR(-loglog_fit(one_plus_t, r).slope, 0.9, 1e-3);
  EXPECT_THROW(loglog_fit({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}), Error);
  EXPECT_THROW(loglog_fit({1.0, 2.0, 3.0, -1.0}, {1.0, 2.0, 3.0, 4.0}), Error);
}

TEST(Fits, RichardsonWeight) {
  for (double p : {1.0, 0.9}) {
    auto q = [&](double e) { return 2.5 + 0.7 * std::pow(e, p); };
    const double ea = 1e-4, eb = 1e-5;
    const double c = detail::richardson_weight(ea, eb, p);
    EXPECT_NEAR(q(eb) + c * (q(eb) - q(ea)), 2.5, 1e-14);
  }
}
