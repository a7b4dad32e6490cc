#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tmpnn/error.hpp"
#include "tmpnn/network.hpp"
#include "tmpnn/parallel.hpp"
#include "tmpnn/symplectic.hpp"

namespace tmpnn {

struct TrainSample {
  PhaseVector x0;
  TrackRecord observed;  // record.valid is the reading mask
  ParamValues params;    // per-sample parameter values (e.g. corrector settings)
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // global gradient norm cap; <= 0 disables clipping
  int epochs = 100;
  double sym_weight = 1.0;
  std::size_t batch_size = 0;  // samples per step; 0 means full batch
  std::uint64_t seed = 0;
  bool fit_initial_condition = false;

  // Layer selection by label.  A selector matches a label exactly or its
  // base name before '#'.  Empty: layers flagged trainable.
  std::vector<std::string> trainable_labels;
  // 0/1 masks over the coefficient matrix of selected layers.
  std::map<std::string, Eigen::MatrixXd> weight_masks;
  // |w| <= bound for the trainable entries of matching layers; applied after
  // every step.
  std::map<std::string, double> weight_bounds;
  std::vector<std::string> trainable_parameters;

  void validate() const {
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
      throw BuildError("train: learning rate must be positive");
    if (epochs < 0) throw BuildError("train: epochs must be non-negative");
    if (!(sym_weight >= 0) || !std::isfinite(sym_weight))
      throw BuildError("train: symplectic weight must be non-negative");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw BuildError("train: betas must be in [0, 1)");
    if (!(epsilon > 0)) throw BuildError("train: epsilon must be positive");
  }
};

struct LossValue {
  double loss = 0, me = 0, penalty = 0;
  std::size_t readings = 0;
};

// Gradient of the loss.  `layers[i]` is empty for frozen layers.
struct Gradient {
  std::vector<Eigen::MatrixXd> layers;
  ParamValues params;
  std::vector<PhaseVector> x0;
  LossValue value;

  double squared_norm() const {
    double s = 0;
    for (const auto& g : layers) s += g.squaredNorm();
    for (const auto& [k, v] : params) s += v * v;
    for (const auto& g : x0) s += g.squaredNorm();
    return s;
  }
};

struct TrainReport {
  std::vector<double> loss, me, penalty;  // before each epoch
  LossValue final;
  ParamValues parameters;
  std::vector<PhaseVector> initial_conditions;
  double seconds = 0;  // not part of the JSON
};

namespace detail {

inline bool label_matches(const std::string& selector, const std::string& label) {
  if (selector == label) return true;
  const auto hash = label.find('#');
  return hash != std::string::npos && label.compare(0, hash, selector) == 0 && selector.size() == hash;
}

struct Selection {
  std::vector<char> layer;
  std::vector<Eigen::MatrixXd> mask;  // empty: all entries
  std::vector<double> bound;
  std::vector<std::string> params;
  bool x0 = false;
};

inline Selection resolve_selection(const Network& net, const TrainConfig& cfg) {
  Selection s;
  s.layer.assign(net.size(), 0);
  s.mask.resize(net.size());
  if (cfg.trainable_labels.empty()) {
    for (std::size_t i = 0; i < net.size(); ++i) s.layer[i] = net.layer(i).trainable ? 1 : 0;
  } else {
    for (const auto& sel : cfg.trainable_labels) {
      bool found = false;
      for (std::size_t i = 0; i < net.size(); ++i)
        if (label_matches(sel, net.layer(i).label)) s.layer[i] = 1, found = true;
      if (!found) throw BuildError("train: no layer labelled '" + sel + "'");
    }
  }
  for (const auto& [sel, mask] : cfg.weight_masks) {
    bool found = false;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (!label_matches(sel, net.layer(i).label)) continue;
      found = true;
      if (!s.layer[i]) throw BuildError("train: weight mask for frozen layer '" + net.layer(i).label + "'");
      const auto& c = net.layer(i).map.coefficients();
      if (mask.rows() != c.rows() || mask.cols() != c.cols())
        throw ShapeError("train: weight mask for '" + net.layer(i).label + "' has wrong shape");
      s.mask[i] = mask;
    }
    if (!found) throw BuildError("train: no layer labelled '" + sel + "'");
  }
  s.bound.assign(net.size(), std::numeric_limits<double>::infinity());
  for (const auto& [sel, b] : cfg.weight_bounds) {
    if (!(b >= 0)) throw BuildError("train: weight bound for '" + sel + "' must be non-negative");
    bool found = false;
    for (std::size_t i = 0; i < net.size(); ++i)
      if (label_matches(sel, net.layer(i).label)) s.bound[i] = b, found = true;
    if (!found) throw BuildError("train: no layer labelled '" + sel + "'");
  }
  const auto names = net.parameter_names();
  for (const auto& p : cfg.trainable_parameters) {
    if (std::find(names.begin(), names.end(), p) == names.end())
      throw BuildError("train: unknown parameter '" + p + "'");
    if (!net.parameters().count(p)) throw BuildError("train: parameter '" + p + "' has no value");
    s.params.push_back(p);
  }
  s.x0 = cfg.fit_initial_condition;
  return s;
}

// Tap layer index for each tap of the record.
inline std::vector<std::size_t> tap_layer_indices(const Network& net, const TrackRecord& rec) {
  std::vector<std::size_t> idx;
  for (const auto& t : rec.taps) {
    const auto i = net.find_layer(t);
    if (!i || !net.layer(*i).tap) throw ShapeError("train: record tap '" + t + "' is not a network tap");
    idx.push_back(*i);
  }
  return idx;
}

inline void check_samples(const Network& net, const std::vector<TrainSample>& samples, const Selection* sel) {
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& smp = samples[s];
    if (smp.x0.size() != net.state_dim()) throw ShapeError("train: sample " + std::to_string(s) + " has wrong x0 size");
    const auto& r = smp.observed;
    if (r.x.size() != r.turns * r.taps.size() || r.y.size() != r.x.size() || r.valid.size() != r.x.size())
      throw ShapeError("train: sample " + std::to_string(s) + " has inconsistent record");
    if (r.turns > 1 && !net.ring()) throw ShapeError("train: multi-turn record for a non-ring network");
    (void)tap_layer_indices(net, r);
    if (sel)
      for (const auto& p : sel->params)
        if (smp.params.count(p)) throw BuildError("train: trainable parameter '" + p + "' set per sample");
  }
}

inline std::size_t total_readings(const std::vector<TrainSample>& samples, const std::vector<std::size_t>& which) {
  std::size_t n = 0;
  for (auto s : which) n += samples[s].observed.valid_count();
  return n;
}

struct SampleGrad {
  std::vector<Eigen::MatrixXd> layers;
  std::vector<double> params;
  PhaseVector x0;
  double sq_error = 0;
};

// Forward with a tape, then reverse accumulation.  Gradients are of the sum
// of squared errors scaled by `scale`.
inline SampleGrad sample_gradient(const Network& net, const TrainSample& smp, const Selection& sel, double scale,
                                  bool want_grad) {
  const int n = net.state_dim();
  const std::size_t L = net.size();
  const auto& rec = smp.observed;
  const auto taps = tap_layer_indices(net, rec);
  std::vector<std::ptrdiff_t> reading_at(L, -1);
  for (std::size_t k = 0; k < taps.size(); ++k) reading_at[taps[k]] = static_cast<std::ptrdiff_t>(k);
  const auto pv = all_layer_params(net, &smp.params);

  std::vector<std::vector<double>> tape(want_grad ? rec.turns * L : 0);
  std::vector<double> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n)), scratch;
  std::copy(smp.x0.data(), smp.x0.data() + n, in.begin());
  SampleGrad g;
  std::vector<Eigen::Vector4d> dout(rec.size(), Eigen::Vector4d::Zero());
  for (std::size_t t = 0; t < rec.turns; ++t) {
    for (std::size_t i = 0; i < L; ++i) {
      const auto& l = net.layer(i);
      std::vector<double> z(in.begin(), in.begin() + n);
      z.insert(z.end(), pv[i].begin(), pv[i].end());
      scratch.resize(l.map.basis().size());
      evaluate_into(l.map, z.data(), out.data(), scratch.data());
      if (want_grad) tape[t * L + i] = std::move(z);
      std::copy(out.begin(), out.end(), in.begin());
      if (reading_at[i] < 0) continue;
      const auto r = rec.index(t, static_cast<std::size_t>(reading_at[i]));
      if (!rec.valid[r]) continue;
      const double ex = out[0] - rec.x[r];
      const double ey = n == 4 ? out[2] - rec.y[r] : 0.0;
      g.sq_error += ex * ex + ey * ey;
      dout[r][0] = 2 * scale * ex;
      dout[r][2] = 2 * scale * ey;
    }
  }
  if (!want_grad) return g;

  g.layers.resize(L);
  for (std::size_t i = 0; i < L; ++i)
    if (sel.layer[i]) g.layers[i] = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(net.layer(i).map.basis().size()));
  g.params.assign(sel.params.size(), 0.0);
  PhaseVector a = PhaseVector::Zero(n);
  std::vector<double> mono;
  for (std::size_t t = rec.turns; t-- > 0;) {
    for (std::size_t i = L; i-- > 0;) {
      const auto& l = net.layer(i);
      if (reading_at[i] >= 0) {
        const auto r = rec.index(t, static_cast<std::size_t>(reading_at[i]));
        if (rec.valid[r]) a += dout[r].head(n);
      }
      const auto& z = tape[t * L + i];
      if (sel.layer[i]) {
        mono.resize(l.map.basis().size());
        l.map.basis().monomials(z, mono);
        g.layers[i] += a * Eigen::Map<const Eigen::RowVectorXd>(mono.data(), static_cast<Eigen::Index>(mono.size()));
      }
      const Eigen::MatrixXd jac = jacobian_at(l.map, z);
      for (std::size_t p = 0; p < l.params.size(); ++p) {
        const auto it = std::find(sel.params.begin(), sel.params.end(), l.params[p]);
        if (it == sel.params.end()) continue;
        g.params[static_cast<std::size_t>(it - sel.params.begin())] += jac.col(n + static_cast<Eigen::Index>(p)).dot(a);
      }
      a = jac.leftCols(n).transpose() * a;
    }
  }
  g.x0 = a;
  return g;
}

inline Gradient accumulate(const Network& net, const std::vector<TrainSample>& samples, const Selection& sel,
                           double lambda, const std::vector<std::size_t>& which, bool want_grad) {
  const std::size_t readings = total_readings(samples, which);
  if (readings == 0) throw BuildError("loss: no unmasked readings");
  const double scale = 1.0 / static_cast<double>(readings);
  std::vector<SampleGrad> parts(which.size());
  parallel_for(
      which.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) parts[k] = sample_gradient(net, samples[which[k]], sel, scale, want_grad);
      },
      1);

  Gradient g;
  double sq = 0;
  for (const auto& p : parts) sq += p.sq_error;
  g.value.readings = readings;
  g.value.me = sq * scale;
  std::vector<Eigen::MatrixXd> pen_grad(net.size());
  std::vector<double> pen(net.size(), 0.0);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < net.size(); ++i)
    if (sel.layer[i]) active.push_back(i);
  parallel_for(
      active.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
          const auto& map = net.layer(active[k]).map;
          pen[active[k]] = symplectic_penalty(map);
          if (want_grad && lambda > 0) pen_grad[active[k]] = penalty_gradient(map);
        }
      },
      1);
  for (auto i : active) g.value.penalty += pen[i];
  g.value.loss = g.value.me + lambda * g.value.penalty;
  if (!want_grad) return g;

  g.layers.resize(net.size());
  for (auto i : active) {
    g.layers[i] = Eigen::MatrixXd::Zero(net.state_dim(), static_cast<Eigen::Index>(net.layer(i).map.basis().size()));
    for (const auto& p : parts) g.layers[i] += p.layers[i];
    if (lambda > 0) g.layers[i] += lambda * pen_grad[i];
    if (sel.mask[i].size()) g.layers[i] = g.layers[i].cwiseProduct(sel.mask[i]);
  }
  for (std::size_t k = 0; k < sel.params.size(); ++k) {
    double s = 0;
    for (const auto& p : parts) s += p.params[k];
    g.params[sel.params[k]] = s;
  }
  if (sel.x0) {
    g.x0.assign(samples.size(), PhaseVector::Zero(net.state_dim()));
    for (std::size_t k = 0; k < which.size(); ++k) g.x0[which[k]] = parts[k].x0;
  }
  return g;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace detail

// ME is the mean over unmasked readings of the squared position error
// (x and y for 4D networks, x for 2D).  Penalty sums over the layers selected
// by `cfg` (layer flags by default).
inline LossValue loss(const Network& net, const std::vector<TrainSample>& samples, const TrainConfig& cfg) {
  const auto sel = detail::resolve_selection(net, cfg);
  detail::check_samples(net, samples, &sel);
  return detail::accumulate(net, samples, sel, cfg.sym_weight, detail::all_indices(samples.size()), false).value;
}

inline LossValue loss(const Network& net, const std::vector<TrainSample>& samples, double lambda) {
  TrainConfig cfg;
  cfg.sym_weight = lambda;
  return loss(net, samples, cfg);
}

inline Gradient gradients(const Network& net, const std::vector<TrainSample>& samples, const TrainConfig& cfg) {
  const auto sel = detail::resolve_selection(net, cfg);
  detail::check_samples(net, samples, &sel);
  if (std::find(sel.layer.begin(), sel.layer.end(), 1) == sel.layer.end() && sel.params.empty() && !sel.x0)
    throw BuildError("gradients: nothing is trainable");
  return detail::accumulate(net, samples, sel, cfg.sym_weight, detail::all_indices(samples.size()), true);
}

namespace detail {

struct Adam {
  double b1, b2, eps, lr;
  std::size_t t = 0;
  std::vector<Eigen::MatrixXd> m, v;

  void step(std::vector<Eigen::MatrixXd*>& params, const std::vector<const Eigen::MatrixXd*>& grads, double gscale) {
    if (m.empty()) {
      for (auto* p : params) {
        m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      }
    }
    ++t;
    const double c1 = 1 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1 - std::pow(b2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Eigen::MatrixXd g = *grads[k] * gscale;
      m[k] = b1 * m[k] + (1 - b1) * g;
      v[k] = b2 * v[k] + (1 - b2) * g.cwiseAbs2();
      *params[k] -= (lr * (m[k] / c1).array() / ((v[k] / c2).array().sqrt() + eps)).matrix();
    }
  }
};

}  // namespace detail

// Full-batch (or fixed-size batch) Adam with global-norm clipping.  Samples'
// initial conditions are updated in place when fit_initial_condition is set.
inline TrainReport train(Network& net, std::vector<TrainSample>& samples, const TrainConfig& cfg) {
  cfg.validate();
  const auto sel = detail::resolve_selection(net, cfg);
  detail::check_samples(net, samples, &sel);
  const auto all = detail::all_indices(samples.size());
  TrainReport rep;

  // Trainable tensors in fixed order: layers, parameters, initial conditions.
  std::vector<Eigen::MatrixXd> param_store(sel.params.size(), Eigen::MatrixXd(1, 1));
  std::vector<Eigen::MatrixXd*> tensors;
  for (std::size_t i = 0; i < net.size(); ++i)
    if (sel.layer[i]) tensors.push_back(&net.layer(i).map.coefficients());
  for (std::size_t k = 0; k < sel.params.size(); ++k) {
    param_store[k](0, 0) = net.parameters().at(sel.params[k]);
    tensors.push_back(&param_store[k]);
  }
  std::vector<Eigen::MatrixXd> x0_store;
  if (sel.x0)
    for (const auto& s : samples) x0_store.emplace_back(s.x0);
  for (auto& x : x0_store) tensors.push_back(&x);
  auto sync = [&] {
    for (std::size_t k = 0; k < sel.params.size(); ++k) net.parameters()[sel.params[k]] = param_store[k](0, 0);
    for (std::size_t s = 0; s < x0_store.size(); ++s) samples[s].x0 = x0_store[s].col(0);
  };

  detail::Adam adam{cfg.beta1, cfg.beta2, cfg.epsilon, cfg.learning_rate, 0, {}, {}};
  std::mt19937_64 rng(cfg.seed);
  const std::size_t bs = cfg.batch_size == 0 ? samples.size() : std::min(cfg.batch_size, samples.size());
  std::vector<Eigen::MatrixXd> pgrad(sel.params.size(), Eigen::MatrixXd(1, 1));
  std::vector<Eigen::MatrixXd> xgrad(x0_store.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = all;
    if (bs < samples.size()) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<std::size_t> which(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
      std::sort(which.begin(), which.end());
      if (detail::total_readings(samples, which) == 0) continue;
      const auto g = detail::accumulate(net, samples, sel, cfg.sym_weight, which, true);
      if (start == 0 && bs == samples.size()) {
        rep.loss.push_back(g.value.loss);
        rep.me.push_back(g.value.me);
        rep.penalty.push_back(g.value.penalty);
      }
      const double norm = std::sqrt(g.squared_norm());
      if (!std::isfinite(g.value.loss) || !std::isfinite(norm))
        throw DivergenceError("train: non-finite loss", static_cast<std::size_t>(epoch));
      const double gscale = cfg.clip_norm > 0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      std::vector<const Eigen::MatrixXd*> grads;
      for (std::size_t i = 0; i < net.size(); ++i)
        if (sel.layer[i]) grads.push_back(&g.layers[i]);
      for (std::size_t k = 0; k < sel.params.size(); ++k) {
        pgrad[k](0, 0) = g.params.at(sel.params[k]);
        grads.push_back(&pgrad[k]);
      }
      for (std::size_t s = 0; s < x0_store.size(); ++s) {
        xgrad[s] = g.x0[s];
        grads.push_back(&xgrad[s]);
      }
      adam.step(tensors, grads, gscale);
      for (std::size_t i = 0; i < net.size(); ++i) {
        if (!sel.layer[i] || std::isinf(sel.bound[i])) continue;
        auto& c = net.layer(i).map.coefficients();
        const double b = sel.bound[i];
        for (Eigen::Index r = 0; r < c.rows(); ++r)
          for (Eigen::Index k = 0; k < c.cols(); ++k)
            if (sel.mask[i].size() == 0 || sel.mask[i](r, k) != 0) c(r, k) = std::clamp(c(r, k), -b, b);
      }
      sync();
    }
    if (bs < samples.size()) {
      const auto v = detail::accumulate(net, samples, sel, cfg.sym_weight, all, false).value;
      rep.loss.push_back(v.loss);
      rep.me.push_back(v.me);
      rep.penalty.push_back(v.penalty);
    }
  }
  rep.final = detail::accumulate(net, samples, sel, cfg.sym_weight, all, false).value;
  if (!std::isfinite(rep.final.loss))
    throw DivergenceError("train: non-finite loss", static_cast<std::size_t>(cfg.epochs));
  rep.parameters = net.parameters();
  for (const auto& s : samples) rep.initial_conditions.push_back(s.x0);
  return rep;
}

inline nlohmann::json report_to_json(const TrainReport& r) {
  nlohmann::json j;
  j["epochs"] = r.loss.size();
  j["loss"] = r.loss;
  j["me"] = r.me;
  j["penalty"] = r.penalty;
  j["final"] = {{"loss", r.final.loss}, {"me", r.final.me}, {"penalty", r.final.penalty},
                {"readings", r.final.readings}};
  j["parameters"] = r.parameters;
  auto& ic = j["initial_conditions"] = nlohmann::json::array();
  for (const auto& x : r.initial_conditions) ic.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  return j;
}

// ---- training data files ----

inline std::string training_data_csv(const std::vector<TrainSample>& samples) {
  std::string out = "sample,turn,tap,x,y,valid\n";
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto body = track_record_csv(samples[s].observed);
    std::size_t pos = body.find('\n') + 1;
    while (pos < body.size()) {
      const auto end = body.find('\n', pos);
      out += std::to_string(s) + "," + body.substr(pos, end - pos + 1);
      pos = end + 1;
    }
  }
  return out;
}

inline std::string training_sidecar_json(const std::vector<TrainSample>& samples) {
  nlohmann::json j;
  auto& arr = j["samples"] = nlohmann::json::array();
  for (const auto& s : samples) {
    nlohmann::json e;
    e["x0"] = std::vector<double>(s.x0.data(), s.x0.data() + s.x0.size());
    if (!s.params.empty()) e["params"] = s.params;
    arr.push_back(e);
  }
  return j.dump(1) + "\n";
}

inline std::vector<TrainSample> parse_training_data(std::string_view csv, std::string_view sidecar) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(sidecar);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(sidecar, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(std::string("training sidecar: ") + e.what(), line, col);
  }
  if (!side.is_object() || !side.contains("samples") || !side["samples"].is_array())
    throw ParseError("training sidecar: expected {\"samples\": [...]}");
  std::vector<TrainSample> samples(side["samples"].size());
  try {
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const auto& e = side["samples"][s];
      const auto x0 = e.at("x0").get<std::vector<double>>();
      samples[s].x0 = Eigen::Map<const PhaseVector>(x0.data(), static_cast<Eigen::Index>(x0.size()));
      if (e.contains("params")) samples[s].params = e["params"].get<ParamValues>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("training sidecar: ") + e.what());
  }

  const auto lines = detail::csv_lines(csv);
  if (lines.empty() || lines[0] != "sample,turn,tap,x,y,valid")
    throw ParseError("training data: expected header 'sample,turn,tap,x,y,valid'", 1, 1);
  std::vector<std::string> parts(samples.size(), "turn,tap,x,y,valid\n");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto comma = lines[i].find(',');
    if (comma == std::string_view::npos) throw ParseError("training data: expected 6 fields", i + 1, 1);
    const auto s = detail::csv_index(lines[i].substr(0, comma), i + 1);
    if (s >= samples.size())
      throw ParseError("training data: sample " + std::to_string(s) + " has no initial condition", i + 1, 1);
    parts[s] += std::string(lines[i].substr(comma + 1)) + "\n";
  }
  for (std::size_t s = 0; s < samples.size(); ++s) {
    try {
      samples[s].observed = parse_track_record_csv(parts[s]);
    } catch (const ParseError& e) {
      throw ParseError("training data: sample " + std::to_string(s) + ": " + e.what());
    }
  }
  return samples;
}

}  // namespace tmpnn
