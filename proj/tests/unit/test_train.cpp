#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "../support/fd.hpp"
#include "common/error.hpp"
#include "common/files.hpp"
#include "trainer/train.hpp"

using namespace eidc;
using namespace eidc::trainer;
namespace fs = std::filesystem;

namespace {

const world::IntersectionMap& shared_map() {
  static const world::IntersectionMap map;
  return map;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eidc_test_train_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

NetworkShape tiny_shape(Representation r = Representation::kDynamic) {
  NetworkShape s;
  s.hidden = 6;
  s.hidden_layers = 2;
  s.representation = r;
  return s;
}

TrainSetup small_setup() {
  TrainSetup s;
  s.train.shape = tiny_shape();
  s.train.batch = 8;
  s.train.env_steps = 3;
  s.train.warmup_samples = 24;
  s.train.iterations = 4;
  s.train.checkpoint_interval = 2;
  s.model.horizon = 5;
  s.sampler.world.warmup = 5.0;
  s.sampler.world.flow.scale = 0.5;
  return s;
}

Experience tagged(double value) {
  Experience e;
  e.light_clock = value;
  return e;
}

}  // namespace

TEST_CASE("penalty schedule steps by the amplifier every interval") {
  PenaltySchedule p;
  CHECK(p.rho(0) == 1.0);
  CHECK(p.rho(99) == 1.0);
  CHECK(p.rho(100) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(p.rho(250) == doctest::Approx(1.21).epsilon(1e-15));
  CHECK(p.rho(1000000) == p.max);
}

TEST_CASE("value loss example and gradient") {
  nn::MlpParams v = nn::MlpParams::zeros(std::vector<int>{1, 1});
  v.biases[0][0] = 3.0;
  nn::Matrix s(1, 1);
  s(0, 0) = 0.0;
  const std::vector<double> target{1.0};
  nn::MlpGradient g = nn::MlpGradient::zeros_like(v);
  CHECK(value_loss(v, s, target, &g) == 4.0);
  CHECK(g.biases[0][0] == 4.0);
}

TEST_CASE("value loss gradient matches finite differences") {
  std::mt19937_64 rng(5);
  nn::MlpParams v = nn::MlpParams::create(std::vector<int>{4, 5, 5, 1}, 9);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& b : v.biases) for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = n(rng);
  nn::Matrix s(6, 4);
  std::vector<double> target(6);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.cols(); ++c) s(r, c) = n(rng) * 3.0;
    target[static_cast<std::size_t>(r)] = n(rng) * 10.0;
  }
  nn::MlpGradient g = nn::MlpGradient::zeros_like(v);
  value_loss(v, s, target, &g);
  const std::vector<double> analytic = g.flatten();
  std::vector<double> flat = v.flatten();
  double worst = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double numeric = test::central_diff(flat, i, [&] {
      nn::MlpParams copy = v;
      copy.assign_flat(flat);
      return value_loss(copy, s, target);
    });
    worst = std::max(worst, test::grad_rel_error(analytic[i], numeric));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("initial policy emits the zero action") {
  const vehicle::ActionBounds bounds;
  const Networks n = initial_networks(tiny_shape(), bounds, 3);
  // Bias only sets the centre; the random layers add a small offset around it.
  nn::MlpParams flat_policy = n.policy;
  for (auto& w : flat_policy.weights) w.setZero();
  nn::Vector s = nn::Vector::Zero(flat_policy.input_width());
  const nn::Vector raw = nn::forward(flat_policy, s);
  const vehicle::Action u = vehicle::squash_action({raw[0], raw[1]}, bounds);
  CHECK(std::abs(u.steer) < 1e-12);
  CHECK(std::abs(u.accel) < 1e-12);
}

TEST_CASE("buffer keeps the newest items up to capacity") {
  ReplayBuffer b(3);
  CHECK_THROWS_AS(b.at(0), UsageError);
  for (int i = 0; i < 5; ++i) b.add(tagged(i));
  CHECK(b.size() == 3);
  CHECK(b.total_added() == 5);
  std::vector<double> kept;
  for (std::size_t i = 0; i < b.size(); ++i) kept.push_back(b.at(i).light_clock);
  std::sort(kept.begin(), kept.end());
  CHECK(kept == std::vector<double>{2, 3, 4});
  CHECK_THROWS_AS(ReplayBuffer(0), ConfigError);
}

TEST_CASE("buffer sampling is uniform") {
  ReplayBuffer b(100);
  for (int i = 0; i < 100; ++i) b.add(tagged(i));
  std::mt19937_64 rng(11);
  std::vector<int> counts(100, 0);
  const auto idx = b.sample_indices(100000, rng);
  for (std::size_t i : idx) ++counts[i];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  // 99 degrees of freedom, upper 1% point.
  CHECK(chi2 < 134.64);
}

TEST_CASE("checkpoint round trip is exact") {
  const fs::path dir = scratch("ckpt");
  for (Representation r : {Representation::kDynamic, Representation::kFixed}) {
    Checkpoint c{initial_networks(tiny_shape(r), {}, 17), 42, 17, 1.21};
    save_checkpoint(dir / representation_name(r), c);
    const Checkpoint back = load_checkpoint(dir / representation_name(r));
    CHECK(back.iteration == 42);
    CHECK(back.seed == 17);
    CHECK(back.rho == 1.21);
    CHECK(back.nets.representation == r);
    CHECK(back.nets.policy.flatten() == c.nets.policy.flatten());
    CHECK(back.nets.value.flatten() == c.nets.value.flatten());
    CHECK(back.nets.encoder.flatten() == c.nets.encoder.flatten());
    CHECK(back.nets.policy.input_scale == c.nets.policy.input_scale);
    CHECK(back.nets.value.output_scale == c.nets.value.output_scale);
  }
}

TEST_CASE("checkpoint mismatches are config errors") {
  const fs::path dir = scratch("bad");
  Checkpoint c{initial_networks(tiny_shape(), {}, 1), 0, 1, 1.0};
  save_checkpoint(dir, c);
  std::string manifest = read_text_file(dir / "manifest.txt");

  const auto with = [&](const std::string& from, const std::string& to) {
    std::string m = manifest;
    const auto at = m.find(from);
    REQUIRE(at != std::string::npos);
    m.replace(at, from.size(), to);
    write_file_atomic(dir / "manifest.txt", m);
  };
  with("d3=155", "d3=154");
  CHECK_THROWS_AS(load_checkpoint(dir), ConfigError);
  with("policy_widths=179,6,6,2", "policy_widths=179,7,6,2");
  CHECK_THROWS_AS(load_checkpoint(dir), ConfigError);
  with("format_version=1", "format_version=9");
  CHECK_THROWS_AS(load_checkpoint(dir), ConfigError);
  write_file_atomic(dir / "manifest.txt", manifest);
  CHECK_NOTHROW(load_checkpoint(dir));
  fs::remove(dir / "value.bin");
  CHECK_THROWS(load_checkpoint(dir));
}

TEST_CASE("zero iterations writes the initialization") {
  TrainSetup s = small_setup();
  s.train.iterations = 0;
  const fs::path out = scratch("zero");
  const TrainResult r = train(shared_map(), s, 5, out);
  CHECK(r.iterations == 0);
  const Checkpoint c = load_checkpoint(r.last_checkpoint);
  const Networks init = initial_networks(s.train.shape, s.model.bounds, 5);
  CHECK(c.iteration == 0);
  CHECK(c.nets.policy.flatten() == init.policy.flatten());
  CHECK(c.nets.encoder.flatten() == init.encoder.flatten());
  const std::string metrics = read_text_file(out / "metrics.csv");
  CHECK(metrics.rfind("# eidc", 0) == 0);
  CHECK(metrics.find("seed=5") != std::string::npos);
}

TEST_CASE("identical seeds give identical metrics") {
  TrainSetup s = small_setup();
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  train(shared_map(), s, 9, a);
  train(shared_map(), s, 9, b);
  const std::string ma = read_text_file(a / "metrics.csv");
  CHECK(ma == read_text_file(b / "metrics.csv"));
  CHECK(std::count(ma.begin(), ma.end(), '\n') == 2 + s.train.iterations);
  const fs::path c = scratch("det_c");
  train(shared_map(), s, 10, c);
  CHECK(ma != read_text_file(c / "metrics.csv"));
}

TEST_CASE("more learners give the same updates") {
  TrainSetup s = small_setup();
  Trainer one(shared_map(), s, 4);
  s.train.learners = 3;
  Trainer three(shared_map(), s, 4);
  for (int k = 0; k < 2; ++k) {
    const Metrics m1 = one.iterate();
    const Metrics m3 = three.iterate();
    CHECK(m1.j_pi == doctest::Approx(m3.j_pi).epsilon(1e-12));
  }
  const auto p1 = one.networks().policy.flatten();
  const auto p3 = three.networks().policy.flatten();
  double diff = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) diff = std::max(diff, std::abs(p1[i] - p3[i]));
  CHECK(diff < 1e-9);
}

TEST_CASE("total cost is tracking plus weighted penalty") {
  TrainSetup s = small_setup();
  Trainer t(shared_map(), s, 2);
  for (int k = 0; k < 3; ++k) {
    const Metrics m = t.iterate();
    CHECK(m.j_pi == doctest::Approx(m.j_track + m.rho * m.j_safe).epsilon(1e-12));
    CHECK(m.j_track >= 0.0);
    CHECK(m.j_safe >= 0.0);
    CHECK_FALSE(m.skipped);
  }
  CHECK(t.iteration() == 3);
  CHECK(t.buffer().size() == 24 + 3 * 3);
}
