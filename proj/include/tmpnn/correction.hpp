#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tmpnn/error.hpp"
#include "tmpnn/network.hpp"
#include "tmpnn/training.hpp"

namespace tmpnn {

using KickMap = std::map<std::string, double>;

// Random machine errors.  Misalignments (dx, dy) and relative strength errors
// are drawn per magnet instance.
struct ErrorModel {
  double misalignment_sigma = 0;  // m, quadrupoles and sextupoles
  double strength_sigma = 0;      // relative, quadrupoles and sextupoles
  double bpm_noise = 0;           // m
  std::uint64_t seed = 0;
};

// An error added to the magnet at sequence position `position`.
struct MagnetError {
  std::size_t position = 0;
  double dx = 0, dy = 0, relative_strength = 0;
};

struct MachineSim {
  Network net;
  double aperture = 10e-3;
  double bpm_noise = 0;
  std::mt19937_64 rng;
  std::vector<MagnetError> errors;  // as installed, one entry per disturbed magnet
};

namespace detail {

inline bool has_errors(ElementKind k) { return k == ElementKind::quadrupole || k == ElementKind::sextupole; }

}  // namespace detail

// Builds the erroneous machine.  Disturbed magnets get their own definitions
// so that every instance carries its own error; monitors and correctors keep
// their names and hence their layer labels.
inline MachineSim make_machine(const LatticeDoc& doc, int order, const ErrorModel& model,
                               const std::vector<MagnetError>& extra = {}, MergePolicy policy = MergePolicy::per_element,
                               const BuildOptions& opt = {}) {
  if (model.misalignment_sigma < 0 || model.strength_sigma < 0 || model.bpm_noise < 0)
    throw BuildError("machine: error sigmas must be non-negative");
  LatticeDoc actual = doc;
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> nd;
  std::map<std::size_t, MagnetError> errs;
  const auto els = doc.elements();
  for (std::size_t i = 0; i < els.size(); ++i) {
    if (!detail::has_errors(els[i].kind)) continue;
    MagnetError e{i, 0, 0, 0};
    if (model.misalignment_sigma > 0) {
      e.dx = model.misalignment_sigma * nd(rng);
      e.dy = doc.dim == 4 ? model.misalignment_sigma * nd(rng) : 0.0;
    }
    if (model.strength_sigma > 0) e.relative_strength = model.strength_sigma * nd(rng);
    if (e.dx != 0 || e.dy != 0 || e.relative_strength != 0) errs[i] = e;
  }
  for (const auto& x : extra) {
    if (x.position >= els.size()) throw BuildError("machine: error position out of range");
    if (!detail::has_errors(els[x.position].kind))
      throw BuildError("machine: element '" + els[x.position].name + "' cannot carry magnet errors");
    auto& e = errs.try_emplace(x.position, MagnetError{x.position, 0, 0, 0}).first->second;
    e.dx += x.dx;
    e.dy += x.dy;
    e.relative_strength += x.relative_strength;
  }
  MachineSim sim;
  for (const auto& [i, e] : errs) {
    ElementSpec spec = els[i];
    spec.name = els[i].name + ".err" + std::to_string(i);
    spec.dx += e.dx;
    spec.dy += e.dy;
    spec.strength *= 1 + e.relative_strength;
    actual.definitions.push_back(spec);
    actual.sequence[i] = spec.name;
    sim.errors.push_back(e);
  }
  sim.net = build_network(actual, order, policy, opt);
  sim.bpm_noise = model.bpm_noise;
  sim.rng.seed(model.seed ^ 0x9e3779b97f4a7c15ULL);
  return sim;
}

// Knob layers and their current settings.
inline KickMap kicks_of(const Network& net) {
  KickMap k;
  for (const auto& l : net.layers())
    for (int r : l.knobs) k[l.knobs.size() == 1 ? l.label : l.label + ":" + std::to_string(r)] = l.map.weights(0)(r, 0);
  return k;
}

inline void install_kicks(Network& net, const KickMap& kicks) {
  for (const auto& [name, v] : kicks) {
    bool found = false;
    for (std::size_t i = 0; i < net.size() && !found; ++i) {
      auto& l = net.layer(i);
      for (int r : l.knobs)
        if ((l.knobs.size() == 1 ? l.label : l.label + ":" + std::to_string(r)) == name) {
          l.map.weights(0)(r, 0) = v;
          found = true;
        }
    }
    if (!found) throw BuildError("no corrector named '" + name + "'");
  }
}

// Single pass through the machine.  From the first monitor where |x| or |y|
// exceeds the aperture the beam is lost and readings are invalid.
inline TrackRecord simulate_readings(MachineSim& sim, const PhaseVector& x0) {
  auto rec = single_pass(sim.net, x0);
  std::normal_distribution<double> nd;
  bool lost = false;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (sim.bpm_noise > 0) {
      rec.x[i] += sim.bpm_noise * nd(sim.rng);
      if (sim.net.state_dim() == 4) rec.y[i] += sim.bpm_noise * nd(sim.rng);
    }
    if (!std::isfinite(rec.x[i]) || !std::isfinite(rec.y[i]) || std::abs(rec.x[i]) > sim.aperture ||
        std::abs(rec.y[i]) > sim.aperture)
      lost = true;
    if (lost) rec.valid[i] = 0;
  }
  return rec;
}

// ---- orbit correction ----

enum class CorrectionMethod { adam, least_squares };

struct CorrectionOptions {
  CorrectionMethod method = CorrectionMethod::adam;
  double kick_limit = 1e-3;  // rad
  PhaseVector x0;            // assumed injection state; empty means zero
  std::vector<std::string> correctors;  // empty: every knob layer
  double learning_rate = 1e-6;
  int epochs = 20000;
};

struct CorrectionResult {
  KickMap kicks;  // total settings, as installed in `network`
  double rms_before = 0, rms_after = 0;
  int iterations = 0;
  bool feasible = true;
  std::string warning;
  Network network;
};

namespace detail {

inline double masked_rms(const TrackRecord& rec, int dim) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (!rec.valid[i]) continue;
    s += rec.x[i] * rec.x[i];
    ++n;
    if (dim == 4) {
      s += rec.y[i] * rec.y[i];
      ++n;
    }
  }
  return n ? std::sqrt(s / static_cast<double>(n)) : 0.0;
}

struct Knob {
  std::size_t layer;
  int row;
  std::string name;
};

inline std::vector<Knob> select_knobs(const Network& net, const std::vector<std::string>& names) {
  std::vector<Knob> out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& l = net.layer(i);
    for (int r : l.knobs) {
      const auto name = l.knobs.size() == 1 ? l.label : l.label + ":" + std::to_string(r);
      if (names.empty() || std::find(names.begin(), names.end(), name) != names.end()) out.push_back({i, r, name});
    }
  }
  for (const auto& n : names)
    if (std::none_of(out.begin(), out.end(), [&](const Knob& k) { return k.name == n; }))
      throw BuildError("correct: no corrector named '" + n + "'");
  return out;
}

// Readings predicted by the model: observed + model(c) - model(c0).
inline TrackRecord predicted(const Network& model, const Network& base, const TrackRecord& observed,
                             const PhaseVector& x0) {
  TrackRecord out = observed;
  const auto now = single_pass(model, x0), before = single_pass(base, x0);
  const auto taps = model.tap_labels();
  for (std::size_t k = 0; k < observed.taps.size(); ++k) {
    const auto it = std::find(taps.begin(), taps.end(), observed.taps[k]);
    if (it == taps.end()) throw ShapeError("correct: reading tap '" + observed.taps[k] + "' is not a network tap");
    const auto j = static_cast<std::size_t>(it - taps.begin());
    out.x[k] += now.x[j] - before.x[j];
    out.y[k] += now.y[j] - before.y[j];
  }
  return out;
}

}  // namespace detail

// Drives the masked readings to zero using only corrector kicks.  The model
// supplies the orbit response; the observed readings supply the baseline.
inline CorrectionResult correct_orbit(const Network& model, const TrackRecord& observed,
                                      const CorrectionOptions& opt = {}) {
  if (observed.turns != 1) throw ShapeError("correct: expected a single-pass record");
  const int n = model.state_dim();
  const PhaseVector x0 = opt.x0.size() ? opt.x0 : PhaseVector::Zero(n);
  if (x0.size() != n) throw ShapeError("correct: injection state has the wrong size");
  if (!(opt.kick_limit >= 0)) throw BuildError("correct: kick limit must be non-negative");
  const auto knobs = detail::select_knobs(model, opt.correctors);

  CorrectionResult res;
  res.network = model;
  res.rms_before = detail::masked_rms(observed, n);

  // Knobs upstream of at least one valid reading.
  std::size_t last_valid_layer = 0;
  bool any_valid = false;
  for (std::size_t k = 0; k < observed.taps.size(); ++k) {
    const auto li = model.find_layer(observed.taps[k]);
    if (!li) throw ShapeError("correct: reading tap '" + observed.taps[k] + "' is not a network tap");
    if (observed.valid[observed.index(0, k)]) {
      last_valid_layer = any_valid ? std::max(last_valid_layer, *li) : *li;
      any_valid = true;
    }
  }
  std::vector<detail::Knob> active;
  for (const auto& k : knobs)
    if (any_valid && k.layer < last_valid_layer) active.push_back(k);
  if (active.empty()) {
    res.feasible = false;
    res.warning = "no corrector upstream of any valid monitor; achievable rms " + detail::fmt17(res.rms_before);
    res.rms_after = res.rms_before;
    res.kicks = kicks_of(res.network);
    return res;
  }

  if (opt.method == CorrectionMethod::least_squares) {
    // Response matrix by unit-free central differences; exact for linear networks.
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < observed.size(); ++i)
      if (observed.valid[i]) rows.push_back(static_cast<Eigen::Index>(i));
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size()) * (n == 4 ? 2 : 1);
    Eigen::MatrixXd r(m, static_cast<Eigen::Index>(active.size()));
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows.size()); ++i) {
      b[i * (n == 4 ? 2 : 1)] = observed.x[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
      if (n == 4) b[2 * i + 1] = observed.y[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
    }
    const double h = opt.kick_limit > 0 ? opt.kick_limit : 1e-3;
    for (std::size_t j = 0; j < active.size(); ++j) {
      Network plus = model, minus = model;
      plus.layer(active[j].layer).map.weights(0)(active[j].row, 0) += h;
      minus.layer(active[j].layer).map.weights(0)(active[j].row, 0) -= h;
      const auto p = detail::predicted(plus, model, observed, x0);
      const auto q = detail::predicted(minus, model, observed, x0);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows.size()); ++i) {
        const auto idx = static_cast<std::size_t>(rows[static_cast<std::size_t>(i)]);
        r(i * (n == 4 ? 2 : 1), static_cast<Eigen::Index>(j)) = (p.x[idx] - q.x[idx]) / (2 * h);
        if (n == 4) r(2 * i + 1, static_cast<Eigen::Index>(j)) = (p.y[idx] - q.y[idx]) / (2 * h);
      }
    }
    const Eigen::VectorXd dc = r.completeOrthogonalDecomposition().solve(-b);
    bool clamped = false;
    for (std::size_t j = 0; j < active.size(); ++j) {
      double& w = res.network.layer(active[j].layer).map.weights(0)(active[j].row, 0);
      const double v = std::clamp(w + dc[static_cast<Eigen::Index>(j)], -opt.kick_limit, opt.kick_limit);
      clamped = clamped || v != w + dc[static_cast<Eigen::Index>(j)];
      w = v;
    }
    if (clamped) res.warning = "kick limit reached";
    res.iterations = 1;
  } else {
    // Training restricted to the knob entries of W0.
    TrainSample s;
    s.x0 = x0;
    s.observed = observed;
    const auto base = single_pass(model, x0);
    const auto taps = model.tap_labels();
    for (std::size_t k = 0; k < observed.taps.size(); ++k) {
      const auto j = static_cast<std::size_t>(std::find(taps.begin(), taps.end(), observed.taps[k]) - taps.begin());
      s.observed.x[k] = base.x[j] - observed.x[k];
      s.observed.y[k] = base.y[j] - observed.y[k];
    }
    TrainConfig cfg;
    cfg.sym_weight = 0;
    cfg.learning_rate = opt.learning_rate;
    cfg.epochs = opt.epochs;
    std::map<std::size_t, Eigen::MatrixXd> masks;
    for (const auto& k : active) {
      auto& mk = masks[k.layer];
      if (mk.size() == 0)
        mk = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(model.layer(k.layer).map.basis().size()));
      mk(k.row, 0) = 1;
    }
    Network work = model;
    for (auto& [li, mk] : masks) {
      const auto& label = work.layer(li).label;
      cfg.trainable_labels.push_back(label);
      cfg.weight_masks[label] = mk;
      cfg.weight_bounds[label] = opt.kick_limit;
    }
    std::vector<TrainSample> samples{s};
    for (auto& [li, mk] : masks) {
      auto w = work.layer(li).map.weights(0);
      for (Eigen::Index r = 0; r < n; ++r)
        if (mk(r, 0) != 0) w(r, 0) = std::clamp(w(r, 0), -opt.kick_limit, opt.kick_limit);
    }
    const auto rep = train(work, samples, cfg);
    res.iterations = static_cast<int>(rep.loss.size());
    for (const auto& k : active)
      res.network.layer(k.layer).map.weights(0)(k.row, 0) = work.layer(k.layer).map.weights(0)(k.row, 0);
  }
  res.rms_after = detail::masked_rms(detail::predicted(res.network, model, observed, x0), n);
  res.kicks = kicks_of(res.network);
  return res;
}

inline nlohmann::json correction_json(const CorrectionResult& r) {
  return {{"kicks", r.kicks},          {"rms_before", r.rms_before}, {"rms_after", r.rms_after},
          {"iterations", r.iterations}, {"feasible", r.feasible},     {"warning", r.warning}};
}

inline std::string kicks_csv(const KickMap& k) {
  std::string out = "corrector,kick\n";
  for (const auto& [name, v] : k) out += name + "," + detail::fmt17(v) + "\n";
  return out;
}

inline KickMap parse_kicks_csv(std::string_view text) {
  const auto lines = detail::csv_lines(text);
  if (lines.empty() || lines[0] != "corrector,kick") throw ParseError("kicks: expected header 'corrector,kick'", 1, 1);
  KickMap k;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = detail::split_csv(lines[i]);
    if (f.size() != 2 || f[0].empty()) throw ParseError("kicks: expected 2 fields", i + 1, 1);
    k[std::string(f[0])] = detail::csv_double(f[1], i + 1);
  }
  return k;
}

// ---- beam threading ----

struct ThreadOptions {
  int max_iterations = 10;
  int stagnation_limit = 5;
  CorrectionOptions correction;
};

struct ThreadStep {
  int iteration = 0;
  std::size_t valid = 0;
  double rms = 0;
  bool accepted = false;
  double step = 1.0;
};

struct ThreadResult {
  std::vector<ThreadStep> log;  // entry 0 is the initial measurement
  bool complete = false;
  bool stagnated = false;
  KickMap kicks;
};

// Measure, correct with the valid monitors, apply; a kick set is kept only if
// it increases the valid count or keeps it and lowers the rms.  Rejected
// steps halve the step towards the proposed kicks.
inline ThreadResult thread_beam(MachineSim& sim, const Network& model, const PhaseVector& x0,
                                const ThreadOptions& opt = {}) {
  ThreadResult out;
  const int n = sim.net.state_dim();
  auto rec = simulate_readings(sim, x0);
  out.log.push_back({0, rec.valid_count(), detail::masked_rms(rec, n), true, 1.0});
  out.kicks = kicks_of(sim.net);
  out.complete = rec.valid_count() == rec.size();
  double step = 1.0;
  int since_gain = 0;
  Network work = model;
  install_kicks(work, out.kicks);
  for (int it = 1; it <= opt.max_iterations && !out.complete; ++it) {
    CorrectionResult c;
    try {
      c = correct_orbit(work, rec, opt.correction);
    } catch (const DivergenceError&) {
      c.feasible = false;
    }
    ThreadStep st{it, rec.valid_count(), out.log.back().rms, false, step};
    if (c.feasible) {
      KickMap trial = out.kicks;
      for (auto& [name, v] : trial) v += step * (c.kicks.at(name) - v);
      MachineSim probe = sim;
      install_kicks(probe.net, trial);
      const auto r2 = simulate_readings(probe, x0);
      const double rms2 = detail::masked_rms(r2, n);
      const bool better = r2.valid_count() > rec.valid_count() ||
                          (r2.valid_count() == rec.valid_count() && rms2 < out.log.back().rms);
      if (better) {
        since_gain = r2.valid_count() > rec.valid_count() ? 0 : since_gain + 1;
        sim = std::move(probe);
        rec = r2;
        out.kicks = trial;
        install_kicks(work, trial);
        st = {it, rec.valid_count(), rms2, true, step};
        step = 1.0;
      } else {
        ++since_gain;
        step *= 0.5;
      }
    } else {
      ++since_gain;
    }
    out.log.push_back(st);
    out.complete = rec.valid_count() == rec.size();
    if (!out.complete && since_gain >= opt.stagnation_limit) {
      out.stagnated = true;
      break;
    }
  }
  return out;
}

inline nlohmann::json thread_json(const ThreadResult& r) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& s : r.log)
    log.push_back({{"iteration", s.iteration}, {"valid", s.valid}, {"rms", s.rms}, {"accepted", s.accepted},
                   {"step", s.step}});
  return {{"log", log}, {"complete", r.complete}, {"stagnated", r.stagnated}, {"kicks", r.kicks}};
}

// ---- scenario files ----

struct Scenario {
  ErrorModel errors;
  std::vector<MagnetError> magnet_errors;
  double aperture = 10e-3;
  int order = 2;
  ThreadOptions thread;
};

inline Scenario parse_scenario(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(std::string("scenario: ") + e.what(), line, col);
  }
  Scenario s;
  try {
    s.errors.misalignment_sigma = j.value("misalignment_sigma", 0.0);
    s.errors.strength_sigma = j.value("strength_sigma", 0.0);
    s.errors.bpm_noise = j.value("bpm_noise", 0.0);
    s.errors.seed = j.value("seed", std::uint64_t{0});
    s.aperture = j.value("aperture", 10e-3);
    s.order = j.value("order", 2);
    s.thread.max_iterations = j.value("max_iterations", 10);
    s.thread.stagnation_limit = j.value("stagnation_limit", 5);
    s.thread.correction.kick_limit = j.value("kick_limit", 1e-3);
    s.thread.correction.learning_rate = j.value("learning_rate", s.thread.correction.learning_rate);
    s.thread.correction.epochs = j.value("epochs", s.thread.correction.epochs);
    if (j.value("method", std::string("adam")) == "least_squares")
      s.thread.correction.method = CorrectionMethod::least_squares;
    if (j.contains("magnet_errors"))
      for (const auto& e : j.at("magnet_errors"))
        s.magnet_errors.push_back({e.at("position").get<std::size_t>(), e.value("dx", 0.0), e.value("dy", 0.0),
                                   e.value("relative_strength", 0.0)});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  return s;
}

}  // namespace tmpnn
