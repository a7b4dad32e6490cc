#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "support/networks.hpp"
#include "support/test_support.hpp"
#include "tmpnn/training.hpp"

using namespace tmpnn;
using namespace tmpnn::testing;

namespace {

LatticeDoc fodo_doc() { return parse_lattice(read_file(std::string(TMPNN_SAMPLES_DIR) + "/fodo.lat")); }

void check_fd(Network net, std::vector<TrainSample> data, const TrainConfig& cfg, int directions, double h) {
  EXPECT_LE(tmpnn::testing::fd_worst(std::move(net), std::move(data), cfg, directions, h), 1e-6);
}

}  // namespace

TEST(Loss, SelfGeneratedDataHasZeroError) {
  const auto net = build_network(fodo_doc(), 2, MergePolicy::per_element);
  const auto data = self_data(net, 4, 1e-3, 1);
  TrainConfig cfg;
  cfg.trainable_labels = {"qf", "qd", "b", "d"};
  const auto v = loss(net, data, cfg);
  EXPECT_EQ(v.me, 0.0);
  EXPECT_LE(v.loss, 1e-20);
  EXPECT_EQ(v.readings, 8u);
}

TEST(Loss, SingleReadingOffset) {
  Network net(2, 1);
  net.add_layer({drift_map(1.0, 2, 1), true, true, "m", {}, {}});
  TrainSample s{vec({0.0, 0.0}), TrackRecord({"m"}, 1), {}};
  s.observed.x[0] = 1e-3;
  const auto v = loss(net, {s}, 1.0);
  EXPECT_NEAR(v.me, 1e-6, 1e-22);
  EXPECT_NEAR(v.penalty, 0.0, 1e-30);
}

TEST(Loss, MaskDropsCorruptedReadings) {
  const auto net = build_network(fodo_doc(), 2, MergePolicy::per_element);
  auto clean = self_data(net, 3, 1e-3, 2);
  for (auto& s : clean) s.observed.x[0] += 1e-5;
  auto corrupted = clean;
  for (auto& s : clean) s.observed.valid[1] = 0;
  for (auto& s : corrupted) {
    s.observed.x[1] = 5.0;
    s.observed.y[1] = -7.0;
    s.observed.valid[1] = 0;
  }
  EXPECT_EQ(loss(net, corrupted, 1.0).loss, loss(net, clean, 1.0).loss);
  for (auto& s : corrupted) s.observed.valid[0] = 0;
  EXPECT_THROW(loss(net, corrupted, 1.0), BuildError);
}

TEST(Gradients, LinearLayerIsLeastSquares) {
  Network net(2, 1);
  TaylorMap m(2, 2, 1);
  m.coefficients() << 0.1, 0.9, 0.2, -0.3, -0.4, 1.1;
  net.add_layer({m, true, true, "m", {}, {}});
  TrainSample s{vec({0.3, -0.2}), TrackRecord({"m"}, 1), {}};
  s.observed.x[0] = 0.05;
  TrainConfig cfg;
  cfg.sym_weight = 0.0;
  const auto g = gradients(net, {s}, cfg);
  const double pred = evaluate(m, s.x0)[0];
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(2, 3);
  expect.row(0) << 2 * (pred - 0.05), 2 * (pred - 0.05) * 0.3, 2 * (pred - 0.05) * -0.2;
  EXPECT_LT((g.layers[0] - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gradients, FrozenLayersHaveNoGradient) {
  auto net = random_net(4, 3);
  net.layer(1).trainable = false;
  const auto g = gradients(net, noisy_data(net, 2, 4), TrainConfig{});
  EXPECT_EQ(g.layers[1].size(), 0);
  EXPECT_GT(g.layers[0].size(), 0);
  net.layer(0).trainable = net.layer(2).trainable = false;
  EXPECT_THROW(gradients(net, noisy_data(net, 2, 4), TrainConfig{}), BuildError);
}

TEST(Gradients, FiniteDifferences4D) {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    const auto net = random_net(4, seed);
    TrainConfig cfg;
    cfg.sym_weight = 1.0;
    check_fd(net, noisy_data(net, 3, seed + 10), cfg, 40, 1e-5);
  }
}

TEST(Gradients, FiniteDifferences2DWithMaskAndParameters) {
  const auto net = random_net(2, 8, 1);
  auto data = noisy_data(net, 3, 9);
  data[1].observed.valid[0] = 0;
  TrainConfig cfg;
  cfg.sym_weight = 0.5;
  cfg.trainable_parameters = {"p"};
  cfg.fit_initial_condition = true;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(2, 6);
  mask(0, 3) = 0;
  cfg.weight_masks["L2"] = mask;
  check_fd(net, data, cfg, 40, 1e-5);
  EXPECT_EQ(gradients(net, data, cfg).layers[2](0, 3), 0.0);
}

TEST(Gradients, FiniteDifferencesMultiTurnRing) {
  auto net = random_net(2, 10);
  for (std::size_t i = 0; i < net.size(); ++i) net.layer(i).map.coefficients() *= 0.8;
  net.set_ring(true);
  auto data = self_data(net, 2, 0.3, 11, 4);
  for (auto& s : data) s.observed.x[3] += 0.05;
  check_fd(net, data, TrainConfig{}, 30, 1e-5);
}

TEST(Train, ZeroEpochsLeavesWeightsUntouched) {
  auto net = random_net(4, 12);
  const auto before = net;
  auto data = noisy_data(net, 2, 13);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto rep = train(net, data, cfg);
  EXPECT_EQ(net, before);
  EXPECT_TRUE(rep.loss.empty());
}

TEST(Train, RecoversDetunedParametricQuadrupole) {
  const auto doc = parse_lattice(
      "d: drift, l=1;\nq: quadrupole, l=0.4, k1=1.0, parametric=true;\nm1: monitor;\nm2: monitor;\nm3: monitor;\n"
      "s: sequence, dim=2 = (d, m1, q, d, m2, d, m3);");
  auto net = build_network(doc, 3, MergePolicy::per_element);
  const ParamValues truth{{"q", 1.2}};
  auto data = self_data(net, 6, 2e-3, 14, 1, &truth);
  TrainConfig cfg;
  cfg.trainable_labels = {"q"};
  cfg.weight_masks["q"] = Eigen::MatrixXd::Zero(2, static_cast<Eigen::Index>(net.layer(1).map.basis().size()));
  cfg.trainable_parameters = {"q"};
  cfg.learning_rate = 5e-3;
  cfg.epochs = 400;
  const auto rep = train(net, data, cfg);
  EXPECT_NEAR(net.parameters().at("q"), 1.2, 0.012);
  EXPECT_LT(rep.final.loss, rep.loss.front());
}

TEST(Train, LossDecreasesAndStaysSymplectic) {
  auto doc = fodo_doc();
  const auto ideal = build_network(doc, 2, MergePolicy::per_element);
  for (auto& e : doc.definitions)
    if (e.name == "qf") e.strength *= 1.05;
  const auto perturbed = build_network(doc, 2, MergePolicy::per_element);
  auto data = self_data(perturbed, 8, 1e-2, 15);
  auto net = ideal;
  TrainConfig cfg;
  cfg.trainable_labels = {"qf"};
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(4, 15);
  mask.block(0, 1, 4, 4).setOnes();
  cfg.weight_masks["qf"] = mask;
  cfg.learning_rate = 1e-4;
  cfg.epochs = 3000;
  auto total_penalty = [](const Network& n) {
    double s = 0;
    for (const auto& l : n.layers()) s += symplectic_penalty(l.map);
    return s;
  };
  const double s0 = total_penalty(net);
  auto slow = net;
  const auto rep = train(net, data, cfg);
  EXPECT_LT(rep.final.me, 1e-3 * rep.me.front());
  EXPECT_LE(total_penalty(net), 10 * s0);
  EXPECT_LE(rep.final.penalty, 1e-6);

  cfg.learning_rate = 1e-5;
  cfg.epochs = 1000;
  const auto slow_rep = train(slow, data, cfg);
  std::size_t non_increasing = 0;
  for (std::size_t e = 1; e < slow_rep.loss.size(); ++e) non_increasing += slow_rep.loss[e] <= slow_rep.loss[e - 1];
  EXPECT_GE(non_increasing, 9 * (slow_rep.loss.size() - 1) / 10);
  EXPECT_LT(slow_rep.final.loss, slow_rep.loss.front());
  const Eigen::MatrixXd w1 = one_turn_map(net).weights(1);
  EXPECT_NEAR(w1.block(0, 0, 2, 2).determinant(), 1.0, 1e-3);
  EXPECT_NEAR(w1.block(2, 2, 2, 2).determinant(), 1.0, 1e-3);
}

TEST(Train, FitsInitialCondition) {
  const auto net0 = build_network(fodo_doc(), 2, MergePolicy::per_element);
  auto data = self_data(net0, 1, 1e-3, 16);
  const PhaseVector truth = data[0].x0;
  data[0].x0 += vec({1e-4, -5e-5, 5e-5, 2e-5});
  auto net = net0;
  TrainConfig cfg;
  cfg.fit_initial_condition = true;
  cfg.learning_rate = 1e-5;
  cfg.epochs = 1500;
  train(net, data, cfg);
  EXPECT_EQ(net, net0);
  EXPECT_LT((data[0].x0 - truth).cwiseAbs().maxCoeff(), 2e-6);
}

TEST(Train, DeterministicReport) {
  auto run = [] {
    auto net = random_net(4, 18);
    auto data = noisy_data(net, 5, 19);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 2;
    cfg.seed = 3;
    return report_to_json(train(net, data, cfg)).dump();
  };
  set_max_threads(1);
  const auto a = run();
  set_max_threads(4);
  const auto b = run();
  set_max_threads(0);
  EXPECT_EQ(a, b);
}

TEST(Train, DivergenceReportsEpoch) {
  auto net = random_net(4, 20);
  auto data = noisy_data(net, 2, 21);
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.epochs = 10;
  try {
    train(net, data, cfg);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_LE(e.step(), 3u);
  }
}

TEST(Train, ConfigErrors) {
  auto net = random_net(4, 22);
  auto data = noisy_data(net, 1, 23);
  TrainConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_THROW(train(net, data, cfg), BuildError);
  cfg = {};
  cfg.sym_weight = -1;
  EXPECT_THROW(train(net, data, cfg), BuildError);
  cfg = {};
  cfg.trainable_labels = {"nope"};
  EXPECT_THROW(train(net, data, cfg), BuildError);
  cfg = {};
  cfg.weight_masks["L0"] = Eigen::MatrixXd::Ones(1, 1);
  EXPECT_THROW(train(net, data, cfg), ShapeError);
  data[0].observed.taps[0] = "L1";
  EXPECT_THROW(train(net, data, TrainConfig{}), ShapeError);
}

TEST(TrainingData, RoundTrip) {
  const auto net = build_network(fodo_doc(), 2, MergePolicy::per_element);
  auto data = self_data(net, 3, 1e-3, 24, 1);
  data[1].observed.valid[0] = 0;
  data[2].params["k"] = 0.25;
  const auto back = parse_training_data(training_data_csv(data), training_sidecar_json(data));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(back[s].x0, data[s].x0);
    EXPECT_EQ(back[s].observed, data[s].observed);
    EXPECT_EQ(back[s].params, data[s].params);
  }
  EXPECT_THROW(parse_training_data("sample,turn,tap,x,y,valid\n5,0,a,1,2,1\n", training_sidecar_json(data)),
               ParseError);
  EXPECT_THROW(parse_training_data(training_data_csv(data), "{\"samples\": ["), ParseError);
}
