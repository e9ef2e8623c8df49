#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "multifunc/ctrnn.hpp"
#include "support.hpp"

using namespace multifunc;
using Catch::Approx;

TEST_CASE("sigmoid closed-form values") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(std::log(3.0)) == Approx(1.0 / (1.0 + 1.0 / 3.0)).epsilon(1e-15));
  CHECK(sigmoid(-50.0) < 1e-20);
  CHECK(sigmoid(-50.0) > 0.0);
  double prev = 0.0;
  for (double x = -30.0; x <= 30.0; x += 0.25) {
    CHECK(sigmoid(x) > prev);
    prev = sigmoid(x);
  }
}

TEST_CASE("sensory Euler step") {
  SensorVector zero{};
  CHECK(step_sensory(zero, zero, 1.0) == zero);

  SensorVector ones;
  ones.fill(1.0);
  auto s = step_sensory(zero, ones, 1.0, 0.1);
  for (double v : s) CHECK(v == Approx(0.1).margin(1e-15));
}

TEST_CASE("sensory state converges after 10 tau") {
  for (double tau : {1.0, 1.37, 2.0}) {
    for (double input : {-7.0, 0.5, 1.0, 10.0}) {
      SensorVector s{}, in;
      in.fill(input);
      const auto steps = static_cast<int>(std::llround(10.0 * tau / 0.1));
      for (int k = 0; k < steps; ++k) s = step_sensory(s, in, tau, 0.1);
      for (double v : s) CHECK(std::abs(v - input) <= 1e-4 * std::max(1.0, std::abs(input)));
    }
  }
}

TEST_CASE("sensory output is a negated sigmoid") {
  const double g = 7.0, th = 1.5;
  SensorVector s;
  s.fill(-th);
  for (double v : sensory_output(s, g, th)) CHECK(v == 0.5);
  s.fill(-th - std::log(3.0) / g);
  for (double v : sensory_output(s, g, th)) CHECK(v == Approx(0.75).epsilon(1e-14));
  s.fill(1e6);
  for (double v : sensory_output(s, g, th)) CHECK(v < 1e-300);
}

TEST_CASE("interneuron step examples") {
  AgentParams p = AgentParams::zeros(1);
  SensorVector o{};
  std::vector<double> s{0.0};
  CHECK(step_interneurons(p, s, o)[0] == 0.0);

  // Zero self-weight, constant drive c through ray 0 with output 1.
  const double c = 2.75;
  p.w_sensor_to_inter[0] = c;
  o[0] = 1.0;
  s = {0.0};
  for (int k = 0; k < 400; ++k) s = step_interneurons(p, s, o);
  const auto drive = sensor_drive(p, o);
  const auto out = inter_output(p, s);
  CHECK(std::abs(kernel::inter_rhs(p, s, out, drive[0], 0)) < 1e-6);
  CHECK(s[0] == Approx(c).margin(1e-6));

  CHECK_THROWS_AS(step_interneurons(p, std::vector<double>{0.0, 0.0}, o), std::invalid_argument);
}

TEST_CASE("production stepper agrees with independent transcription") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(-12.0, 12.0), inp(0.0, 10.0);
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + c % 4;
    const AgentParams p = testsupport::random_params(n, rng);
    Network net(p);
    testsupport::ref::State rs;
    rs.inter.assign(n, 0.0);
    for (std::size_t k = 0; k < 7; ++k) net.state().sensor[k] = rs.sensor[k] = u(rng);
    for (std::size_t i = 0; i < n; ++i) net.state().inter[i] = rs.inter[i] = u(rng);
    for (std::size_t m = 0; m < 2; ++m) net.state().motor[m] = rs.motor[m] = u(rng);
    SensorVector in;
    std::vector<double> vin(7);
    for (std::size_t k = 0; k < 7; ++k) in[k] = vin[k] = inp(rng);

    const double a = net.step(in, 0.1);
    const double ra = testsupport::ref::step(p, rs, vin, 0.1);
    worst = std::max(worst, std::abs(a - ra));
    for (std::size_t k = 0; k < 7; ++k) worst = std::max(worst, std::abs(net.state().sensor[k] - rs.sensor[k]));
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(net.state().inter[i] - rs.inter[i]));
    for (std::size_t m = 0; m < 2; ++m) worst = std::max(worst, std::abs(net.state().motor[m] - rs.motor[m]));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("motor step examples") {
  AgentParams p = AgentParams::zeros(2);
  std::array<double, 2> m{};
  std::vector<double> y{0.3, 0.8};
  CHECK(step_motors(p, m, y) == std::array<double, 2>{0.0, 0.0});

  // Symmetric weights: left and right stay equal.
  p.w_inter_to_motor = {1.5, 1.5, -2.0, -2.0};
  for (int k = 0; k < 100; ++k) {
    m = step_motors(p, m, y);
    REQUIRE(m[0] == m[1]);
  }

  // Hand computation.
  p.motor_tau = 1.25;
  p.w_inter_to_motor = {0.5, -1.0, 2.0, 0.25};
  m = {0.2, -0.4};
  const auto next = step_motors(p, m, y, 0.1);
  const double dl = -0.2 + 0.5 * 0.3 + 2.0 * 0.8;
  const double dr = 0.4 + -1.0 * 0.3 + 0.25 * 0.8;
  CHECK(std::abs(next[0] - (0.2 + 0.1 / 1.25 * dl)) <= 1e-12);
  CHECK(std::abs(next[1] - (-0.4 + 0.1 / 1.25 * dr)) <= 1e-12);
}

TEST_CASE("motor acceleration") {
  CHECK(motor_acceleration(1.3, 1.3, 12.0, 0.7) == 0.0);
  CHECK(motor_acceleration(-1e6, 1e6, 12.0, 0.7) == Approx(12.0));
  const double th = -1.1;
  CHECK(motor_acceleration(-th - std::log(3.0), -th, 10.0, th) == Approx(2.5).epsilon(1e-14));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = motor_acceleration(u(rng), u(rng), 20.0, 3.0);
    CHECK(std::abs(a) <= 20.0);
  }
}

TEST_CASE("genotype decoding") {
  CHECK(genome_dimension(2) == 32);
  CHECK(genome_dimension(1) == 1 + 11 + 6);
  for (std::size_t n = 1; n < 8; ++n) CHECK(genome_dimension(n) == n * n + 11 * n + 6);

  CHECK(kGainRange.from_gene(0.0) == 10.5);
  CHECK(kWeightRange.from_gene(-1.0) == -5.0);
  CHECK(kWeightRange.from_gene(1.0) == 5.0);
  CHECK(kTauRange.from_gene(-1.0) == 1.0);

  Genotype g;
  g.genes.assign(31, 0.0);
  CHECK_THROWS_AS(decode_genotype(g, 2), std::invalid_argument);

  // Layout: each gene moves exactly the parameter it is documented to.
  g.genes.assign(32, 0.0);
  g.genes[0] = 1.0;  // sensory tau
  g.genes[1] = 1.0;  // sensory gain
  g.genes[3 + 7 * 2 - 1] = 1.0;  // last sensor->inter weight: ray 7 to inter 2
  g.genes[3 + 14 + 1] = -1.0;    // recurrent w from 1 to 2
  g.genes[32 - 3] = -1.0;        // motor gain
  const AgentParams p = decode_genotype(g, 2);
  CHECK(p.sensory_tau == 2.0);
  CHECK(p.sensory_gain == 20.0);
  CHECK(p.sensor_weight(6, 1) == 5.0);
  CHECK(p.inter_weight(0, 1) == -5.0);
  CHECK(p.motor_gain == 1.0);
  CHECK(p.motor_bias == 0.0);
  CHECK(p.motor_tau == 1.5);
}

TEST_CASE("decode round-trip, ranges and monotonicity") {
  std::mt19937_64 rng(99);
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = 1 + c % 5;
    const Genotype g = testsupport::random_genotype(n, rng);
    const AgentParams p = decode_genotype(g, n);
    REQUIRE(p.in_range());
    const Genotype back = encode_params(p);
    REQUIRE(back.size() == g.size());
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(back.genes[i] == Approx(g.genes[i]).margin(1e-12));
  }
  // Raising one gene raises exactly one decoded value.
  const std::size_t n = 2;
  Genotype g = testsupport::random_genotype(n, rng);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Genotype h = g;
    h.genes[i] = std::min(1.0, h.genes[i] + 0.1);
    if (h.genes[i] == g.genes[i]) continue;
    const Genotype a = encode_params(decode_genotype(g, n));
    const Genotype b = encode_params(decode_genotype(h, n));
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (j == i) CHECK(b.genes[j] > a.genes[j]);
      else CHECK(b.genes[j] == a.genes[j]);
    }
  }
}

TEST_CASE("network determinism and reset") {
  std::mt19937_64 rng(3);
  const AgentParams p = testsupport::random_params(3, rng);
  SensorVector in{1, 2, 3, 4, 5, 6, 7};
  Network a(p), b(p);
  for (int k = 0; k < 500; ++k) {
    REQUIRE(a.step(in, 0.1) == b.step(in, 0.1));
    REQUIRE(a.state() == b.state());
  }
  a.reset();
  CHECK(a.state() == NetworkState(3));
}

TEST_CASE("outputs stay in (0,1) and acceleration within gain") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> inp(0.0, 10.0);
  for (int c = 0; c < 50; ++c) {
    const AgentParams p = testsupport::random_params(2, rng);
    Network net(p);
    for (int k = 0; k < 300; ++k) {
      SensorVector in;
      for (auto& v : in) v = inp(rng);
      const double a = net.step(in, 0.1);
      REQUIRE(std::abs(a) <= p.motor_gain);
      for (double y : inter_output(p, net.state().inter)) REQUIRE((y > 0.0 && y <= 1.0));  // 1.0 is reachable in double precision
    }
  }
}
