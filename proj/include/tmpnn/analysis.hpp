#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <fftw3.h>
#include <Eigen/Dense>
#include <json.hpp>

#include "tmpnn/error.hpp"
#include "tmpnn/network.hpp"
#include "tmpnn/parallel.hpp"

namespace tmpnn {

struct TrackOptions {
  double aperture = 1.0;  // any |coordinate| above this flags the particle lost
  const ParamValues* params = nullptr;
};

struct TrackResult {
  TrackRecord record;
  std::vector<PhaseVector> turn_end;  // state after each completed turn
  std::optional<std::size_t> lost_turn;
};

namespace detail {

inline bool lost(const PhaseVector& x, double aperture) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || std::abs(x[i]) > aperture) return true;
  return false;
}

}  // namespace detail

// Repeated forward passes.  Once lost, the remaining readings are invalid and
// tracking stops.
inline TrackResult track(const Network& net, const PhaseVector& x0, std::size_t turns, const TrackOptions& opt = {}) {
  if (!net.ring() && turns > 1) throw ShapeError("track: multi-turn tracking needs a ring network");
  TrackResult out;
  out.record = TrackRecord(net.tap_labels(), turns);
  std::fill(out.record.valid.begin(), out.record.valid.end(), char{0});
  PhaseVector x = x0;
  for (std::size_t t = 0; t < turns; ++t) {
    const auto r = forward(net, x, opt.params);
    bool gone = false;
    for (std::size_t k = 0; k < r.taps.size(); ++k) {
      if (detail::lost(r.taps[k], opt.aperture)) {
        gone = true;
        break;
      }
      const auto i = out.record.index(t, k);
      out.record.x[i] = r.taps[k][0];
      out.record.y[i] = net.state_dim() == 4 ? r.taps[k][2] : 0.0;
      out.record.valid[i] = 1;
    }
    if (gone || detail::lost(r.final_state, opt.aperture)) {
      out.lost_turn = t;
      break;
    }
    x = r.final_state;
    out.turn_end.push_back(x);
  }
  return out;
}

inline TrackRecord track_turns(const Network& net, const PhaseVector& x0, std::size_t turns,
                               const TrackOptions& opt = {}) {
  return track(net, x0, turns, opt).record;
}

inline std::vector<TrackResult> track_many(const Network& net, const std::vector<PhaseVector>& x0, std::size_t turns,
                                           const TrackOptions& opt = {}) {
  std::vector<TrackResult> out(x0.size());
  parallel_for(
      x0.size(),
      [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = track(net, x0[i], turns, opt);
      },
      1);
  return out;
}

// ---- phase portraits ----

struct PhasePortrait {
  std::vector<double> amplitudes;
  std::vector<std::vector<Eigen::Vector2d>> points;  // (x, x') per completed turn
};

// Initial state (a, 0, 0, 0) for each amplitude; points are taken at the end
// of each turn.
inline PhasePortrait phase_portrait(const Network& net, const std::vector<double>& amplitudes, std::size_t turns,
                                    const TrackOptions& opt = {}) {
  std::vector<PhaseVector> x0;
  for (double a : amplitudes) {
    PhaseVector x = PhaseVector::Zero(net.state_dim());
    x[0] = a;
    x0.push_back(x);
  }
  const auto runs = track_many(net, x0, turns, opt);
  PhasePortrait p;
  p.amplitudes = amplitudes;
  for (const auto& r : runs) {
    std::vector<Eigen::Vector2d> pts;
    for (const auto& s : r.turn_end) pts.emplace_back(s[0], s[1]);
    p.points.push_back(std::move(pts));
  }
  return p;
}

// Relative residual of the best-fit conic a x^2 + b x x' + c x'^2 + d x + e x' + f = 0:
// smallest over largest singular value of the design matrix in coordinates
// scaled to unit range.  Zero for points on an ellipse.
inline double conic_fit_residual(const std::vector<Eigen::Vector2d>& pts) {
  if (pts.size() < 6) return 0.0;
  double sx = 0, sy = 0;
  for (const auto& p : pts) {
    sx = std::max(sx, std::abs(p[0]));
    sy = std::max(sy, std::abs(p[1]));
  }
  if (sx == 0 || sy == 0) return 0.0;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 6);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i][0] / sx, y = pts[i][1] / sy;
    a.row(static_cast<Eigen::Index>(i)) << x * x, x * y, y * y, x, y, 1.0;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  return s[5] / s[0];
}

inline std::string portrait_csv(const PhasePortrait& p) {
  std::string out = "amplitude,turn,x,xp\n";
  for (std::size_t a = 0; a < p.amplitudes.size(); ++a)
    for (std::size_t t = 0; t < p.points[a].size(); ++t)
      out += detail::fmt17(p.amplitudes[a]) + "," + std::to_string(t + 1) + "," + detail::fmt17(p.points[a][t][0]) +
             "," + detail::fmt17(p.points[a][t][1]) + "\n";
  return out;
}

// ---- tunes ----

struct TuneResult {
  double q = 0;          // fractional tune in (0, 0.5]
  double amplitude = 0;  // spectral peak magnitude
  std::string method = "fft-hann-parabolic-log";
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

inline TuneResult tune_fft(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 64) throw Error("tune: at least 64 turns are required, got " + std::to_string(n));
  double mean = 0;
  for (double v : series) {
    if (!std::isfinite(v)) throw Error("tune: non-finite sample");
    mean += v;
  }
  mean /= static_cast<double>(n);
  std::vector<double> in(n);
  double energy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2 * M_PI * static_cast<double>(i) / static_cast<double>(n));
    in[i] = (series[i] - mean) * w;
    energy += in[i] * in[i];
  }
  if (energy == 0) throw Error("tune: flat signal has no tune");
  std::vector<std::complex<double>> spec(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  const std::size_t half = n / 2;
  std::size_t k = 1;
  for (std::size_t i = 1; i <= half; ++i)
    if (std::abs(spec[i]) > std::abs(spec[k])) k = i;
  double delta = 0;
  if (k > 0 && k < half) {
    const double tiny = 1e-300;
    const double a = std::log(std::abs(spec[k - 1]) + tiny);
    const double b = std::log(std::abs(spec[k]) + tiny);
    const double c = std::log(std::abs(spec[k + 1]) + tiny);
    const double den = a - 2 * b + c;
    if (den < 0) delta = 0.5 * (a - c) / den;
  }
  TuneResult r;
  r.q = (static_cast<double>(k) + delta) / static_cast<double>(n);
  r.q = std::abs(r.q - std::round(r.q));
  if (r.q == 0) r.q = 1.0 / static_cast<double>(n);
  r.amplitude = std::abs(spec[k]);
  return r;
}

// Tune from turn-by-turn readings at one tap (plane 0: x, 1: y).
inline TuneResult tune_of_record(const TrackRecord& rec, std::size_t tap, int plane) {
  if (tap >= rec.taps.size()) throw ShapeError("tune: tap index out of range");
  std::vector<double> s;
  for (std::size_t t = 0; t < rec.turns; ++t) {
    const auto i = rec.index(t, tap);
    if (!rec.valid[i]) break;
    s.push_back(plane == 0 ? rec.x[i] : rec.y[i]);
  }
  return tune_fft(s);
}

inline nlohmann::json tune_json(const std::string& plane, const TuneResult& r) {
  return {{"plane", plane}, {"Q", r.q}, {"amplitude", r.amplitude}, {"method", r.method}};
}

}  // namespace tmpnn
