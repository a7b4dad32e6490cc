#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "support/test_support.hpp"
#include "tmpnn/network.hpp"

using namespace tmpnn;
using tmpnn::testing::random_vector;
using tmpnn::testing::vec;

namespace {

LatticeDoc fodo_doc() { return parse_lattice(read_file(std::string(TMPNN_SAMPLES_DIR) + "/fodo.lat")); }

Network two_drifts() {
  Network net(2, 2);
  net.add_layer({drift_map(1.0, 2, 2), true, false, "d1", {}, {}});
  net.add_layer({drift_map(1.0, 2, 2), false, false, "d2", {}, {}});
  return net;
}

Eigen::Matrix2d plane(double L, double k) {
  Eigen::Matrix2d m;
  if (k > 0) {
    const double w = std::sqrt(k);
    m << std::cos(w * L), std::sin(w * L) / w, -w * std::sin(w * L), std::cos(w * L);
  } else if (k < 0) {
    const double w = std::sqrt(-k);
    m << std::cosh(w * L), std::sinh(w * L) / w, w * std::sinh(w * L), std::cosh(w * L);
  } else {
    m << 1, L, 0, 1;
  }
  return m;
}

struct ThreadGuard {
  ~ThreadGuard() { set_max_threads(0); }
};

}  // namespace

TEST(Network, ForwardTwoDrifts) {
  const auto r = forward(two_drifts(), vec({1e-3, 0.0}));
  ASSERT_EQ(r.taps.size(), 1u);
  EXPECT_EQ(r.taps[0][0], 1e-3);
  EXPECT_EQ(r.final_state, vec({1e-3, 0.0}));
  const auto s = forward(two_drifts(), vec({0.0, 1e-3}));
  EXPECT_EQ(s.taps[0][0], 1e-3);
  EXPECT_EQ(s.final_state[0], 2e-3);
  EXPECT_THROW(forward(two_drifts(), vec({1, 2, 3, 4})), ShapeError);
}

TEST(Network, AddLayerChecksShapes) {
  Network net(4, 2);
  EXPECT_THROW(net.add_layer({drift_map(1.0, 2, 2), false, false, "x", {}, {}}), ShapeError);
  EXPECT_THROW(net.add_layer({drift_map(1.0, 4, 3), false, false, "x", {}, {}}), ShapeError);
  EXPECT_THROW(net.add_layer({parametric_quad_map(1.0, 4, 2), false, false, "x", {}, {}}), ShapeError);
  EXPECT_THROW(Network(3, 2), ShapeError);
}

TEST(Network, BuildFodoPerElement) {
  const auto net = build_network(fodo_doc(), 2, MergePolicy::per_element);
  EXPECT_EQ(net.size(), 12u);
  EXPECT_EQ(net.state_dim(), 4);
  EXPECT_TRUE(net.ring());
  EXPECT_EQ(net.tap_labels(), (std::vector<std::string>{"bpm1", "bpm2"}));
  EXPECT_EQ(net.layer(0).label, "qf");
  EXPECT_EQ(net.layer(2).label, "d#1");
  const auto r = forward(net, vec({0, 0, 0, 0}));
  for (const auto& t : r.taps) EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Network, SingleDriftWithMonitor) {
  const auto net = build_network(parse_lattice("d: drift, l=1;\nm: monitor;\ns: sequence = (d, m);"), 1,
                                 MergePolicy::per_element);
  ASSERT_EQ(net.size(), 1u);
  EXPECT_TRUE(net.layer(0).tap);
  EXPECT_EQ(net.layer(0).label, "m");
}

TEST(Network, ForwardMatchesOneTurnMap) {
  const auto net = build_network(fodo_doc(), 3, MergePolicy::per_element);
  const auto m = one_turn_map(net);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd x = random_vector(4, rng, 1e-4);
    EXPECT_LT((forward(net, x).final_state - evaluate(m, x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Network, PerElementAndMinimalAgree) {
  const auto doc = fodo_doc();
  const auto a = build_network(doc, 3, MergePolicy::per_element);
  const auto b = build_network(doc, 3, MergePolicy::minimal);
  ASSERT_EQ(b.size(), 2u);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd x = random_vector(4, rng, 1e-4);
    const auto ra = forward(a, x), rb = forward(b, x);
    ASSERT_EQ(ra.taps.size(), rb.taps.size());
    for (std::size_t k = 0; k < ra.taps.size(); ++k)
      EXPECT_LT((ra.taps[k] - rb.taps[k]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Network, LinearPerElementAndMinimalAgreeAtAnyAmplitude) {
  const auto doc = parse_lattice(
      "q: quadrupole, l=0.3, k1=1.1, dx=1e-4;\nd: drift, l=1;\nm: monitor;\nc: hcorrector, kick=1e-4;\n"
      "s: sequence = (q, d, m, d, c, q, d, m, d);");
  const auto a = build_network(doc, 1, MergePolicy::per_element);
  const auto b = build_network(doc, 1, MergePolicy::minimal);
  EXPECT_EQ(b.size(), 5u);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd x = random_vector(4, rng, 1e-2);
    const auto ra = forward(a, x), rb = forward(b, x);
    for (std::size_t k = 0; k < ra.taps.size(); ++k)
      EXPECT_LT((ra.taps[k] - rb.taps[k]).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((ra.final_state - rb.final_state).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(OneTurnMap, TwoDriftsAndInverse) {
  EXPECT_EQ(one_turn_map(two_drifts()), drift_map(2.0, 2, 2));
  Network net(2, 1);
  const auto q = quad_map(0.4, 1.7, 2, 1);
  net.add_layer({q, false, false, "q", {}, {}});
  TaylorMap inv(2, 2, 1);
  inv.weights(1) = Eigen::MatrixXd(q.weights(1)).inverse();
  net.add_layer({inv, false, false, "inv", {}, {}});
  EXPECT_LT((one_turn_map(net).coefficients() - TaylorMap::identity(2, 1).coefficients()).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(OneTurnMap, FodoLinearPartAgainstMatrixProduct) {
  const auto net = build_network(fodo_doc(), 2, MergePolicy::per_element);
  const Eigen::MatrixXd w1 = one_turn_map(net).weights(1);
  const double kb = 0.01;
  const std::vector<std::pair<double, double>> seq = {{0.2, 2.913}, {0.1, 0}, {0.25, 0}, {1.0, kb}, {1.0, kb},
                                                      {0.25, 0},    {0.2, -2.454}, {0.1, 0}, {0.25, 0},
                                                      {1.0, kb},    {1.0, kb},    {0.25, 0}};
  Eigen::Matrix2d mx = Eigen::Matrix2d::Identity(), my = Eigen::Matrix2d::Identity();
  for (const auto& [L, k] : seq) {
    mx = plane(L, k) * mx;
    my = plane(L, k == kb ? 0.0 : -k) * my;
  }
  EXPECT_LT((w1.block(0, 0, 2, 2) - mx).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((w1.block(2, 2, 2, 2) - my).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE(std::abs(mx.trace()) / 2, 1.0);
  EXPECT_LE(std::abs(my.trace()) / 2, 1.0);
}

TEST(Network, ParametricLayers) {
  const auto doc = parse_lattice(
      "q: quadrupole, l=0.5, k1=0.8, parametric=true;\nd: drift, l=1;\nm: monitor;\n"
      "s: sequence = (q, d, m, q, d);");
  const auto net = build_network(doc, 3, MergePolicy::minimal);
  ASSERT_EQ(net.size(), 4u);
  EXPECT_EQ(net.layer(0).params, (std::vector<std::string>{"q"}));
  EXPECT_EQ(net.parameter_names(), (std::vector<std::string>{"q"}));
  EXPECT_EQ(net.parameters().at("q"), 0.8);
  const auto fixed = build_network(parse_lattice("q: quadrupole, l=0.5, k1=0.9;\nd: drift, l=1;\nm: monitor;\n"
                                                 "s: sequence = (q, d, m, q, d);"),
                                   3, MergePolicy::minimal);
  const Eigen::VectorXd x = vec({1e-4, -2e-5, 3e-5, 1e-5});
  const ParamValues p{{"q", 0.9}};
  // series in k truncated at total degree 3: leading gap k^3 L^5 |x| / 120 per quadrupole
  EXPECT_LT((forward(net, x, p).final_state - forward(fixed, x).final_state).cwiseAbs().maxCoeff(), 1e-7);
  const auto net4 = build_network(doc, 4, MergePolicy::minimal);
  const auto fixed4 = build_network(parse_lattice("q: quadrupole, l=0.5, k1=0.9;\nd: drift, l=1;\nm: monitor;\n"
                                                  "s: sequence = (q, d, m, q, d);"),
                                    4, MergePolicy::minimal);
  EXPECT_LT((forward(net4, x, p).final_state - forward(fixed4, x).final_state).cwiseAbs().maxCoeff(), 2e-9);
  EXPECT_NE(forward(net, x).final_state, forward(net, x, p).final_state);
  EXPECT_LT((evaluate(one_turn_map(net, &p), x) - forward(net, x, p).final_state).cwiseAbs().maxCoeff(), 1e-12);

  Network bare(2, 2);
  bare.add_layer({parametric_quad_map(1.0, 2, 2), false, false, "pq", {"k"}, {}});
  EXPECT_THROW(forward(bare, vec({0, 0})), BuildError);
  EXPECT_THROW(one_turn_map(bare), BuildError);
  EXPECT_NO_THROW(forward(bare, vec({0, 0}), ParamValues{{"k", 1.0}}));
}

TEST(Network, MisalignedQuadrupoleKicksOrbit) {
  const auto net = build_network(parse_lattice("q: quadrupole, l=1, k1=1, dx=1e-4;\nm: monitor;\n"
                                               "s: sequence = (q, m);"),
                                 1, MergePolicy::per_element);
  const auto r = forward(net, vec({0, 0, 0, 0}));
  EXPECT_NEAR(r.final_state[1], std::sin(1.0) * 1e-4, 1e-18);
  EXPECT_NEAR(r.final_state[0], (1 - std::cos(1.0)) * 1e-4, 1e-18);
}

TEST(Network, BatchMatchesSingle) {
  ThreadGuard guard;
  const auto net = build_network(fodo_doc(), 3, MergePolicy::per_element);
  std::mt19937_64 rng(4);
  PhaseBatch x(1000, 4);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) = random_vector(4, rng, 1e-3).transpose();
  for (unsigned threads : {1u, 4u}) {
    set_max_threads(threads);
    const auto b = forward_batch(net, x);
    ASSERT_EQ(b.taps.size(), 2u);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto s = forward(net, x.row(i).transpose());
      worst = std::max(worst, (b.final_state.row(i).transpose() - s.final_state).cwiseAbs().maxCoeff());
      worst = std::max(worst, (b.taps[1].row(i).transpose() - s.taps[1]).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst, 1e-14) << threads << " threads";
  }
  EXPECT_EQ(forward_batch(net, PhaseBatch(0, 4)).final_state.rows(), 0);
}

TEST(Model, SaveLoadRoundTrip) {
  auto net = build_network(fodo_doc(), 3, MergePolicy::per_element);
  std::mt19937_64 rng(5);
  for (std::size_t i = 0; i < net.size(); ++i)
    net.layer(i).map.coefficients() += 1e-3 * Eigen::MatrixXd::Random(net.layer(i).map.coefficients().rows(),
                                                                      net.layer(i).map.coefficients().cols());
  net.layer(3).trainable = true;
  const auto text = save_model(net);
  const auto back = load_model(text);
  EXPECT_EQ(back, net);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd x = random_vector(4, rng, 1e-3);
    const auto a = forward(net, x), b = forward(back, x);
    EXPECT_EQ(a.final_state, b.final_state);
  }
  EXPECT_EQ(save_model(back), text);
}

TEST(Model, FileStructure) {
  const auto net = build_network(fodo_doc(), 2, MergePolicy::per_element);
  const auto j = nlohmann::json::parse(save_model(net));
  EXPECT_EQ(j["layers"].size(), 12u);
  EXPECT_EQ(j["basis"], "graded-revlex-v1");
  EXPECT_EQ(j["version"], kModelFormatVersion);
  EXPECT_EQ(j["layers"][0]["weights"]["W2"].size(), 4u);
  EXPECT_EQ(j["layers"][0]["weights"]["W2"][0].size(), 10u);
}

TEST(Model, Errors) {
  const auto text = save_model(two_drifts());
  try {
    load_model(text.substr(0, text.size() / 2));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GT(e.line(), 0u);
  }
  auto j = nlohmann::json::parse(text);
  j["version"] = 99;
  EXPECT_THROW(load_model(j.dump()), ParseError);
  j = nlohmann::json::parse(text);
  j["layers"][0]["weights"]["W1"][0].push_back(1.0);
  EXPECT_THROW(load_model(j.dump()), ParseError);
  j = nlohmann::json::parse(text);
  j["layers"][1].erase("label");
  EXPECT_THROW(load_model(j.dump()), ParseError);
}

TEST(Model, SyntheticLargeNetwork) {
  std::string text = "d: drift, l=0.5;\nq: quadrupole, l=0.2, k1=1.0;\nqd: quadrupole, l=0.2, k1=-1.0;\n"
                     "s: sextupole, l=0.1, k2=2;\nm: monitor;\n";
  std::vector<std::string> names = {"q", "d", "s", "d", "qd", "d", "m"};
  text += "big: sequence = (";
  for (int i = 0; i < 1519; ++i) text += (i ? ", " : "") + names[static_cast<std::size_t>(i) % names.size()];
  text += ");\n";
  const auto doc = parse_lattice(text);
  const auto net = build_network(doc, 2, MergePolicy::per_element);
  EXPECT_GT(net.size(), 1200u);
  const auto back = load_model(save_model(net));
  EXPECT_EQ(back.size(), net.size());
}

TEST(TrackRecordCsv, RoundTrip) {
  TrackRecord rec({"bpm1", "bpm2#1"}, 3);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    rec.x[i] = 1e-3 / (1.0 + static_cast<double>(i));
    rec.y[i] = -M_PI * 1e-5 * static_cast<double>(i);
  }
  rec.valid[4] = 0;
  const auto text = track_record_csv(rec);
  EXPECT_EQ(text.substr(0, 19), "turn,tap,x,y,valid\n");
  EXPECT_EQ(parse_track_record_csv(text), rec);
  EXPECT_THROW(parse_track_record_csv("turn,tap,x\n"), ParseError);
  EXPECT_THROW(parse_track_record_csv("turn,tap,x,y,valid\n0,a,1,2\n"), ParseError);
  EXPECT_THROW(parse_track_record_csv("turn,tap,x,y,valid\n0,a,1,2,1\n0,a,1,2,1\n"), ParseError);
  EXPECT_THROW(parse_track_record_csv("turn,tap,x,y,valid\n1,a,1,2,1\n"), ParseError);
}

TEST(TrackRecordCsv, SinglePass) {
  const auto net = build_network(fodo_doc(), 2, MergePolicy::per_element);
  const auto rec = single_pass(net, vec({1e-3, 0, -1e-3, 0}));
  EXPECT_EQ(rec.turns, 1u);
  EXPECT_EQ(rec.taps.size(), 2u);
  const auto r = forward(net, vec({1e-3, 0, -1e-3, 0}));
  EXPECT_EQ(rec.x[1], r.taps[1][0]);
  EXPECT_EQ(rec.y[1], r.taps[1][2]);
}
