#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "../support/fd.hpp"
#include "../support/random_obs.hpp"
#include "common/error.hpp"
#include "encoding/encoder.hpp"

using namespace eidc;

namespace {

nn::MlpParams make_encoder(int hidden, std::uint64_t seed) {
  const std::vector<int> widths{kFeatureDim, hidden, hidden, kSetDim};
  nn::MlpParams p = nn::MlpParams::create(widths, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> n01;
  for (auto& b : p.biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.1 * n01(rng);
  p.input_scale = nn::Vector::Constant(kFeatureDim, 0.1);
  return p;
}

// Sum of full per-participant forward passes.
nn::Vector literal_set_sum(const Observation& obs, const nn::MlpParams& enc) {
  nn::Vector sum = nn::Vector::Zero(enc.output_width());
  for (const auto& f : obs.canonical_participants()) {
    const auto a = f.as_array();
    sum += nn::forward(enc, nn::Vector(Eigen::Map<const nn::Vector>(a.data(), kFeatureDim)));
  }
  return sum;
}

}  // namespace

TEST_CASE("dimension constants") {
  CHECK(min_set_dim(10, 6, 6, 7) == 155);
  CHECK(kSetDim == 155);
  CHECK(kStateDim == 179);
  CHECK(kFpStateDim == 136);
}

TEST_CASE("empty sets give a zero set encoding") {
  const nn::MlpParams enc = make_encoder(8, 1);
  std::mt19937_64 rng(1);
  Observation obs = test::random_observation(rng, 0, 0, 0);
  const DrivingState s = encode_dp(obs, enc);
  REQUIRE(s.values.size() == kStateDim);
  CHECK(s.values.head(kSetDim).isZero(0.0));
  for (int i = 0; i < kElseDim; ++i) CHECK(s.values[kSetDim + i] == obs.x_else[i]);
}

TEST_CASE("pooled encoding equals the literal per-participant sum") {
  const nn::MlpParams enc = make_encoder(16, 2);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Observation obs = test::random_observation(rng);
    const DrivingState s = encode_dp(obs, enc);
    const nn::Vector want = literal_set_sum(obs, enc);
    CHECK((s.values.head(kSetDim) - want).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, want.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("within-type permutations leave the state unchanged") {
  const nn::MlpParams enc = make_encoder(32, 3);
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Observation obs = test::random_observation(rng);
    const DrivingState base = encode_dp(obs, enc);
    std::shuffle(obs.vehicles.begin(), obs.vehicles.end(), rng);
    std::shuffle(obs.bicycles.begin(), obs.bicycles.end(), rng);
    std::shuffle(obs.pedestrians.begin(), obs.pedestrians.end(), rng);
    worst = std::max(worst, (encode_dp(obs, enc).values - base.values).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("state width is fixed for every cardinality") {
  const nn::MlpParams enc = make_encoder(8, 4);
  std::mt19937_64 rng(4);
  for (int l = 0; l <= kMaxVehicles; ++l)
    for (int m = 0; m <= kMaxBicycles; ++m)
      for (int n = 0; n <= kMaxPedestrians; ++n) {
        CHECK(encode_dp(test::random_observation(rng, l, m, n), enc).values.size() == kStateDim);
      }
}

TEST_CASE("encoder output below the minimum width is rejected") {
  const std::vector<int> widths{kFeatureDim, 8, 154};
  const nn::MlpParams small = nn::MlpParams::create(widths, 1);
  std::mt19937_64 rng(5);
  CHECK_THROWS_AS(encode_dp(test::random_observation(rng, 1, 0, 0), small), ConfigError);
}

TEST_CASE("over-cap sets keep the nearest participants") {
  std::mt19937_64 rng(6);
  Observation obs = test::random_observation(rng, 12, 0, 0);
  std::vector<double> d;
  for (const auto& v : obs.vehicles) d.push_back(v.distance());
  std::vector<double> sorted = d;
  std::sort(sorted.begin(), sorted.end());
  const Observation kept = truncate_to_caps(obs);
  REQUIRE(kept.vehicles.size() == kMaxVehicles);
  for (const auto& v : kept.vehicles) CHECK(v.distance() <= sorted[kMaxVehicles - 1]);
  const nn::MlpParams enc = make_encoder(8, 6);
  CHECK(encode_dp(obs, enc).values == encode_dp(kept, enc).values);
}

TEST_CASE("encoder gradient: empty sets, duplicates, finite differences") {
  nn::MlpParams enc = make_encoder(6, 7);
  std::mt19937_64 rng(7);
  nn::Vector adj(kStateDim);
  std::normal_distribution<double> n01;
  for (Eigen::Index i = 0; i < adj.size(); ++i) adj[i] = n01(rng);

  SUBCASE("empty sets") {
    const Observation obs = test::random_observation(rng, 0, 0, 0);
    const DpGradient g = encode_dp_backward(obs, enc, adj);
    for (double v : g.encoder.flatten()) CHECK(v == 0.0);
    for (int i = 0; i < kElseDim; ++i) CHECK(g.x_else[i] == adj[kSetDim + i]);
  }
  SUBCASE("duplicate participant doubles the gradient") {
    Observation one = test::random_observation(rng, 0, 0, 0);
    one.bicycles.push_back(test::random_participant(rng, ParticipantKind::kBicycle));
    Observation two = one;
    two.bicycles.push_back(one.bicycles[0]);
    const auto g1 = encode_dp_backward(one, enc, adj).encoder.flatten();
    const auto g2 = encode_dp_backward(two, enc, adj).encoder.flatten();
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g2[i] - 2.0 * g1[i]) <= 1e-12 * std::max(1.0, std::abs(g1[i])));
  }
  SUBCASE("finite differences") {
    const Observation obs = test::random_observation(rng, 3, 2, 2);
    const DpGradient g = encode_dp_backward(obs, enc, adj);
    auto loss = [&] { return encode_dp(obs, enc).values.dot(adj); };
    std::vector<double> flat = enc.flatten();
    const std::vector<double> analytic = g.encoder.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double num = test::central_diff(flat, i, [&] {
        enc.assign_flat(flat);
        return loss();
      });
      worst = std::max(worst, test::grad_rel_error(analytic[i], num));
    }
    enc.assign_flat(flat);
    CHECK(worst < 1e-4);

    Observation moving = obs;
    auto feature_loss = [&] { return encode_dp(moving, enc).values.dot(adj); };
    double worst_feature = 0.0;
    const auto all = obs.canonical_participants();
    for (std::size_t p = 0; p < 3; ++p) {
      double* fields[2] = {&moving.vehicles[p].rel_x, &moving.vehicles[p].speed};
      const int columns[2] = {0, 2};
      for (int k = 0; k < 2; ++k) {
        const double saved = *fields[k];
        *fields[k] = saved + 1e-6;
        const double up = feature_loss();
        *fields[k] = saved - 1e-6;
        const double down = feature_loss();
        *fields[k] = saved;
        worst_feature = std::max(worst_feature, test::grad_rel_error(g.participants[p][columns[k]], (up - down) / 2e-6));
      }
    }
    CHECK(worst_feature < 1e-4);
  }
}

TEST_CASE("distinct observations give distinct states") {
  const nn::MlpParams enc = make_encoder(32, 8);
  std::mt19937_64 rng(8);
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 2000; ++i) {
    const DrivingState s = encode_dp(test::random_observation(rng), enc);
    seen.insert(std::vector<double>(s.values.data(), s.values.data() + s.values.size()));
  }
  CHECK(seen.size() == 2000);
}

TEST_CASE("fp representation") {
  std::mt19937_64 rng(9);
  SUBCASE("slots in increasing distance") {
    const Observation obs = test::random_observation(rng, 8, 4, 4);
    const nn::Vector v = encode_fp(obs);
    REQUIRE(v.size() == kFpStateDim);
    auto slot_distance = [&](int s) { return std::hypot(v[s * kFeatureDim], v[s * kFeatureDim + 1]); };
    for (int s = 1; s < kFpVehicles; ++s) CHECK(slot_distance(s - 1) < slot_distance(s));
    for (int s = kFpVehicles + 1; s < kFpVehicles + kFpBicycles; ++s) CHECK(slot_distance(s - 1) < slot_distance(s));
    for (int s = kFpVehicles + kFpBicycles + 1; s < kFpSlots; ++s) CHECK(slot_distance(s - 1) < slot_distance(s));
  }
  SUBCASE("empty observation is all padding") {
    const Observation obs = test::random_observation(rng, 0, 0, 0);
    const nn::Vector v = encode_fp(obs);
    for (int s = 0; s < kFpSlots; ++s) {
      for (int c = 0; c < 6; ++c) CHECK(v[s * kFeatureDim + c] == 0.0);
      const double kind = s < kFpVehicles ? 0.0 : s < kFpVehicles + kFpBicycles ? 1.0 : 2.0;
      CHECK(v[s * kFeatureDim + 6] == kind);
    }
    for (int i = 0; i < kElseDim; ++i) CHECK(v[kFpSlots * kFeatureDim + i] == obs.x_else[i]);
  }
  SUBCASE("the two farthest of ten vehicles are excluded") {
    const Observation obs = test::random_observation(rng, 10, 0, 0);
    std::vector<double> d;
    for (const auto& f : obs.vehicles) d.push_back(f.distance());
    std::vector<double> sorted = d;
    std::sort(sorted.begin(), sorted.end());
    const nn::Vector v = encode_fp(obs);
    for (int s = 0; s < kFpVehicles; ++s) {
      CHECK(std::hypot(v[s * kFeatureDim], v[s * kFeatureDim + 1]) == doctest::Approx(sorted[s]).epsilon(1e-15));
    }
  }
  SUBCASE("rank swap reorders fp slots while dp moves continuously") {
    const nn::MlpParams enc = make_encoder(16, 10);
    Observation obs = test::random_observation(rng, 0, 0, 2);
    obs.pedestrians[0].rel_x = 10.0;
    obs.pedestrians[0].rel_y = 0.0;
    obs.pedestrians[1].rel_x = 0.0;
    obs.pedestrians[1].rel_y = 10.0 + 1e-7;
    const auto before_fp = fp_slot_sources(obs);
    const DrivingState before_dp = encode_dp(obs, enc);
    obs.pedestrians[0].rel_x = 10.0 + 2e-7;
    const auto after_fp = fp_slot_sources(obs);
    const DrivingState after_dp = encode_dp(obs, enc);
    CHECK(before_fp != after_fp);
    CHECK((after_dp.values - before_dp.values).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("observation serialization round trip and validation") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const Observation obs = test::random_observation(rng);
    const auto bytes = serialize(obs);
    CHECK(bytes.size() == 12 + obs.participant_count() * 56 + 24 * 8);
    CHECK(deserialize_observation(bytes) == obs);
  }
  Observation bad = test::random_observation(rng, 1, 0, 0);
  bad.vehicles[0].kind = ParticipantKind::kPedestrian;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  auto bytes = serialize(test::random_observation(rng, 1, 0, 0));
  bytes.pop_back();
  CHECK_THROWS_AS(deserialize_observation(bytes), ConfigError);
}
