#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"

using namespace nlsmod;
namespace fs = std::filesystem;

namespace {

// Small and quick; enough snapshots for every fit window.
const char* kSmall = R"(
physics.dimension = 1
physics.lambda = 0,-1
physics.b = 20
grid.half_width = 20
grid.points = 256
schedule.dt_max = 1e-3
schedule.endpoint_factor = 0.05
schedule.eps_end = 1e-4
schedule.per_decade = 4
schedule.early = 4
fit.lower_factor = 1
)";

std::map<std::string, std::string> small_map(const std::string& extra = "") {
  return parse_key_values(std::string(kSmall) + extra);
}

RunConfig small(const std::string& extra = "") { return config_from_map(small_map(extra)); }

fs::path scratch(const std::string& name) {
  fs::path p = fs::path(::testing::TempDir()) / ("nlsmod_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> check_names(const RunReport& r) {
  std::vector<std::string> out;
  for (const auto& c : r.checks) out.push_back(c.name);
  return out;
}

}  // namespace

TEST(Config, Defaults) {
  auto c = config_from_map(parse_key_values("physics.dimension = 2\n"));
  EXPECT_EQ(c.indices.k, 2);
  EXPECT_EQ(c.indices.m, 3);
  EXPECT_EQ(c.indices.n, 3);
  EXPECT_DOUBLE_EQ(c.initial.rho, 2.0);
  EXPECT_EQ(c.params.lambda, Complex(0.0, -1.0));
  EXPECT_DOUBLE_EQ(c.params.b, 20.0);
  EXPECT_EQ(c.grid.points, 256);
  EXPECT_FALSE(c.scattering_check);
}

TEST(Config, Rejections) {
  EXPECT_THROW(config_from_map(parse_key_values("physics.dimenson = 1\n")), Error);
  EXPECT_THROW(parse_key_values("physics.b = 1\nphysics.b = 2\n"), Error);
  EXPECT_THROW(parse_key_values("physics.b 1\n"), Error);
  try {
    config_from_map(parse_key_values("physics.lambda = 0,1\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("Im lambda"), std::string::npos);
  }
  EXPECT_THROW(config_from_map(parse_key_values("physics.b = -1\n")), Error);
  EXPECT_THROW(config_from_map(parse_key_values("cascade.sigma_bar = 0.5\n")), Error);
  EXPECT_THROW(config_from_map(parse_key_values("indices.n = 1\n")), Error);
  EXPECT_THROW(config_from_map(parse_key_values("initial.rho = 3\n")), Error);
  EXPECT_THROW(config_from_map(parse_key_values("physics.b = abc\n")), Error);
}

TEST(Config, HashIgnoresOutputAndRunControl) {
  const auto a = small("output.dir = x\n").hash();
  EXPECT_EQ(a, small("output.dir = y\nrun.halt_after_steps = 5\n").hash());
  EXPECT_NE(a, small("output.dir = x\ntol.theta = 1e-11\n").hash());
  auto kv = small_map();
  kv["physics.b"] = "10";
  EXPECT_NE(a, config_from_map(kv).hash());
}

TEST(Config, ShippedConfigsLoad) {
  const fs::path dir = fs::path(NLSMOD_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(load_config(e.path())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 4);
}

TEST(Io, SnapshotRoundTripIsBitExact) {
  const auto dir = scratch("io");
  GridSpec g(2, 5.0, 16);
  auto f = testutil::sample(g, [](const Point& x) { return Complex(std::sin(x[0]) / 3.0, x[1] * 1e-300); }, Frame::U, 0.125);
  io::write_snapshot(dir / "s", f, 7.0);
  auto s = io::read_snapshot(dir / "s");
  EXPECT_EQ(s.field.values, f.values);
  EXPECT_EQ(s.field.frame, Frame::U);
  EXPECT_EQ(s.field.time, 0.125);
  EXPECT_EQ(s.b, 7.0);
  EXPECT_TRUE(s.field.grid == g);
  // Truncated payload is rejected with the byte counts.
  auto bytes = slurp(dir / "s.bin");
  std::ofstream(dir / "s.bin", std::ios::binary | std::ios::trunc).write(bytes.data(), 100);
  EXPECT_THROW(io::read_snapshot(dir / "s"), Error);
}

TEST(InitialData, AlgebraicTail) {
  auto c = small();
  auto phi = make_initial_data(c);
  for (int i = 0; i < c.grid.points; ++i) {
    const double x = c.grid.coordinate(i);
    if (std::abs(x) <= 0.9 * c.grid.half_width) {
      EXPECT_NEAR(std::abs(phi[i] - 1.0 / std::sqrt(1.0 + x * x)), 0.0, 1e-15);
    }
  }
  EXPECT_EQ(phi[0], Complex(0.0));
}

TEST(InitialData, GaussianPerturbation) {
  auto ok = small("initial.family = ALG_TAIL_PLUS_GAUSSIAN\ninitial.gauss_amplitude = 0.3\ninitial.gauss_width = 0.5\n");
  auto phi = make_initial_data(ok);
  const int mid = ok.grid.points / 2;
  EXPECT_NEAR(phi[mid].real(), 1.3, 1e-14);
  auto bad = small("initial.family = ALG_TAIL_PLUS_GAUSSIAN\ninitial.gauss_amplitude = 1.0\n");
  EXPECT_THROW(make_initial_data(bad), Error);
  EXPECT_THROW(small("initial.family = ALG_TAIL_PLUS_GAUSSIAN\ninitial.eps = 2\n"), Error);
}

TEST(InitialData, CustomFile) {
  const auto dir = scratch("custom");
  auto base = small();
  auto phi = make_initial_data(base);
  for (auto& z : phi.values) z *= Complex(0.5, 0.5);
  io::write_snapshot(dir / "phi", phi, 20.0);
  auto c = small("initial.family = CUSTOM_FILE\ninitial.file = " + (dir / "phi").string() + "\n");
  EXPECT_EQ(make_initial_data(c).values, phi.values);
  io::write_snapshot(dir / "other", Field(GridSpec(1, 20.0, 128), Frame::V, 0.0), 20.0);
  auto wrong = small("initial.family = CUSTOM_FILE\ninitial.file = " + (dir / "other").string() + "\n");
  EXPECT_THROW(make_initial_data(wrong), Error);
  EXPECT_THROW(small("initial.family = CUSTOM_FILE\n"), Error);
}

TEST(MeasureK, ConfiguredKBelowMeasuredIsRejected) {
  auto c = small();
  auto phi = make_initial_data(c);
  auto m = measure_K(phi, c);
  EXPECT_GT(m.inf, 0.0);
  EXPECT_NEAR(m.measured, m.proxy + 1.0 / m.inf, 1e-12);
  EXPECT_NEAR(m.K, 1.2 * m.measured, 1e-12);
  EXPECT_THROW(measure_K(phi, small("norms.K = 1e-3\n")), Error);
  EXPECT_DOUBLE_EQ(measure_K(phi, small("norms.K = 1e6\n")).K, 1e6);
}

TEST(Run, FreeEvolutionHasOnlyLinearChecks) {
  RunOptions o;
  o.write_outputs = false;
  auto kv = small_map();
  kv["physics.lambda"] = "0";
  auto r = run_simulation(config_from_map(kv), o);
  EXPECT_EQ(check_names(r), (std::vector<std::string>{"mass_conserved", "free_flow_match"}));
  EXPECT_TRUE(r.pass) << r.verdict.dump(2);
}

TEST(Run, VerdictIsByteIdentical) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  RunOptions oa, ob;
  oa.out_dir = a.string();
  ob.out_dir = b.string();
  auto c = small();
  auto ra = run_simulation(c, oa);
  auto rb = run_simulation(c, ob);
  ASSERT_TRUE(fs::exists(a / "verdict.json"));
  EXPECT_EQ(slurp(a / "verdict.json"), slurp(b / "verdict.json"));
  EXPECT_EQ(slurp(a / "norms.csv"), slurp(b / "norms.csv"));
  EXPECT_EQ(slurp(a / "profile" / "w0.bin"), slurp(b / "profile" / "w0.bin"));
  const auto names = check_names(ra);
  EXPECT_NE(std::find(names.begin(), names.end(), "mass_non_increasing"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "theta_log_psi_identity"), names.end());
}

TEST(Run, CheckpointResumeMatchesUninterrupted) {
  const auto ck = scratch("ckpt");
  RunOptions o;
  o.write_outputs = false;
  auto full = run_simulation(small(), o);
  ASSERT_TRUE(full.complete);

  RunOptions oc = o;
  oc.checkpoint = ck.string();
  auto halted = run_simulation(small("run.halt_after_steps = 150\nrun.checkpoint_every = 40\n"), oc);
  EXPECT_FALSE(halted.complete);
  EXPECT_FALSE(halted.pass);
  ASSERT_TRUE(io::checkpoint_exists(ck));
  EXPECT_THROW(io::read_checkpoint(ck, "0000000000000000"), Error);

  auto resumed = run_simulation(small(), oc);
  ASSERT_TRUE(resumed.complete);
  EXPECT_EQ(resumed.trajectory.steps_taken, full.trajectory.steps_taken);
  ASSERT_EQ(resumed.trajectory.snapshots.size(), full.trajectory.snapshots.size());
  for (std::size_t k = 0; k < full.trajectory.snapshots.size(); ++k)
    EXPECT_EQ(resumed.trajectory.snapshots[k].values, full.trajectory.snapshots[k].values) << k;
  EXPECT_EQ(resumed.verdict["checks"].dump(), full.verdict["checks"].dump());
}

TEST(Sweep, DuplicatesAndThresholdFlags) {
  auto base = small();
  EXPECT_THROW(sweep_b(base, {20.0}), Error);
  EXPECT_THROW(sweep_b(base, {20.0, 10.0}), Error);
  auto t = sweep_b(base, {20.0, 20.0}, 2);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].verdict.dump(), t.rows[1].verdict.dump());
  EXPECT_EQ(t.rows[0].psi_max, t.rows[1].psi_max);
  EXPECT_TRUE(t.rows[0].error.empty()) << t.rows[0].error;

  // An unreachable f0 bound leaves no threshold in range.
  auto strict = small("tol.f0_bound = 1e-12\n");
  auto s = sweep_b(strict, {10.0, 20.0}, 1);
  EXPECT_FALSE(s.b1_hat.has_value());
  const auto j = s.to_json();
  EXPECT_EQ(j["threshold"], "no threshold in range");
  EXPECT_TRUE(j["b1_hat"].is_null());
  for (const auto& r : s.rows) EXPECT_FALSE(r.f0_flag);
}

TEST(Verify, SuitePasses) {
  for (const auto& c : verify_suite(small())) EXPECT_TRUE(c.pass) << c.name << " " << c.estimate;
}
