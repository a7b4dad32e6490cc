#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tmpnn/elements.hpp"
#include "tmpnn/error.hpp"
#include "tmpnn/lattice.hpp"
#include "tmpnn/parallel.hpp"
#include "tmpnn/taylor_map.hpp"

namespace tmpnn {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kBasisTag = "graded-revlex-v1";

using ParamValues = std::map<std::string, double>;

// One TaylorMap layer.  Parametric layers take the phase-space state followed
// by the values of `params`, in order, and return the phase-space state.
// `knobs` lists the W0 rows that act as control settings (corrector kicks).
struct Layer {
  TaylorMap map;
  bool tap = false;
  bool trainable = false;
  std::string label;
  std::vector<std::string> params;
  std::vector<int> knobs;

  friend bool operator==(const Layer&, const Layer&) = default;
};

class Network {
 public:
  Network() = default;
  Network(int state_dim, int order) : state_dim_(state_dim), order_(order) {
    if (state_dim != 2 && state_dim != 4) throw ShapeError("Network: state dimension must be 2 or 4");
    if (order < 1 || order > kMaxMapOrder) throw ShapeError("Network: order out of range");
  }

  int state_dim() const { return state_dim_; }
  int order() const { return order_; }
  bool ring() const { return ring_; }
  void set_ring(bool r) { ring_ = r; }

  const std::vector<Layer>& layers() const { return layers_; }
  Layer& layer(std::size_t i) { return layers_.at(i); }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t size() const { return layers_.size(); }

  // Nominal values of bound parameters, used when a forward call does not
  // override them.
  ParamValues& parameters() { return parameters_; }
  const ParamValues& parameters() const { return parameters_; }

  void add_layer(Layer layer) {
    if (layer.map.order() != order_) throw ShapeError("Network: layer '" + layer.label + "' has a different order");
    if (layer.map.n_out() != state_dim_)
      throw ShapeError("Network: layer '" + layer.label + "' output dimension does not match the state");
    if (layer.map.n_in() != state_dim_ + static_cast<int>(layer.params.size()))
      throw ShapeError("Network: layer '" + layer.label + "' input dimension does not match state plus parameters");
    for (int k : layer.knobs)
      if (k < 0 || k >= state_dim_) throw ShapeError("Network: layer '" + layer.label + "' has a knob out of range");
    layers_.push_back(std::move(layer));
  }

  std::vector<std::size_t> tap_layers() const {
    std::vector<std::size_t> t;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i].tap) t.push_back(i);
    return t;
  }

  std::vector<std::string> tap_labels() const {
    std::vector<std::string> t;
    for (const auto& l : layers_)
      if (l.tap) t.push_back(l.label);
    return t;
  }

  // Every parameter name, in order of first use.
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (const auto& l : layers_)
      for (const auto& p : l.params)
        if (std::find(names.begin(), names.end(), p) == names.end()) names.push_back(p);
    return names;
  }

  std::optional<std::size_t> find_layer(std::string_view label) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i].label == label) return i;
    return std::nullopt;
  }

  friend bool operator==(const Network&, const Network&) = default;

 private:
  int state_dim_ = 0;
  int order_ = 0;
  bool ring_ = false;
  std::vector<Layer> layers_;
  ParamValues parameters_;
};

namespace detail {

// Values of a layer's parameters: overrides first, then nominal values.
inline std::vector<double> layer_params(const Network& net, const Layer& layer, const ParamValues* overrides) {
  std::vector<double> v;
  v.reserve(layer.params.size());
  for (const auto& p : layer.params) {
    if (overrides) {
      if (auto it = overrides->find(p); it != overrides->end()) {
        v.push_back(it->second);
        continue;
      }
    }
    auto it = net.parameters().find(p);
    if (it == net.parameters().end())
      throw BuildError("missing value for parameter '" + p + "' of layer '" + layer.label + "'");
    v.push_back(it->second);
  }
  return v;
}

inline std::vector<std::vector<double>> all_layer_params(const Network& net, const ParamValues* overrides) {
  std::vector<std::vector<double>> v;
  v.reserve(net.size());
  for (const auto& l : net.layers()) v.push_back(layer_params(net, l, overrides));
  return v;
}

}  // namespace detail

struct ForwardResult {
  PhaseVector final_state;
  std::vector<PhaseVector> taps;  // full state after each tap layer
};

inline ForwardResult forward(const Network& net, const PhaseVector& x0, const ParamValues* params = nullptr) {
  if (x0.size() != net.state_dim())
    throw ShapeError("forward: input has length " + std::to_string(x0.size()) + ", network state is " +
                     std::to_string(net.state_dim()));
  const auto pv = detail::all_layer_params(net, params);
  const int n = net.state_dim();
  std::vector<double> in(static_cast<std::size_t>(n) + 8), scratch;
  std::vector<double> out(static_cast<std::size_t>(n));
  std::copy(x0.data(), x0.data() + n, in.begin());
  ForwardResult r;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& l = net.layer(i);
    const auto& p = pv[i];
    if (in.size() < static_cast<std::size_t>(n) + p.size()) in.resize(static_cast<std::size_t>(n) + p.size());
    std::copy(p.begin(), p.end(), in.begin() + n);
    scratch.resize(l.map.basis().size());
    detail::evaluate_into(l.map, in.data(), out.data(), scratch.data());
    std::copy(out.begin(), out.end(), in.begin());
    if (l.tap) r.taps.push_back(Eigen::Map<const PhaseVector>(out.data(), n));
  }
  r.final_state = Eigen::Map<const PhaseVector>(in.data(), n);
  return r;
}

inline ForwardResult forward(const Network& net, const PhaseVector& x0, const ParamValues& params) {
  return forward(net, x0, &params);
}

struct BatchForwardResult {
  PhaseBatch final_state;
  std::vector<PhaseBatch> taps;
};

// Particles as rows.  Work is split into contiguous particle chunks; within a
// chunk the layers are applied as one matrix product per layer.
inline BatchForwardResult forward_batch(const Network& net, const PhaseBatch& x0,
                                        const ParamValues* params = nullptr, bool keep_taps = true) {
  const int n = net.state_dim();
  if (x0.rows() > 0 && x0.cols() != n)
    throw ShapeError("forward_batch: rows have length " + std::to_string(x0.cols()) + ", network state is " +
                     std::to_string(n));
  const auto pv = detail::all_layer_params(net, params);
  const auto count = static_cast<std::size_t>(x0.rows());
  BatchForwardResult r;
  r.final_state.resize(x0.rows(), n);
  const auto taps = net.tap_layers();
  if (keep_taps) r.taps.assign(taps.size(), PhaseBatch(x0.rows(), n));
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t cb, std::size_t ce) {
    Eigen::MatrixXd state, mono, next;
    std::vector<double> col;
    for (std::size_t c = cb; c < ce; ++c) {
      const std::size_t p0 = c * kChunk;
      const std::size_t np = std::min(kChunk, count - p0);
      const auto P = static_cast<Eigen::Index>(np);
      state = x0.middleRows(static_cast<Eigen::Index>(p0), P).transpose();  // n x P
      std::size_t tap_i = 0;
      for (std::size_t li = 0; li < net.size(); ++li) {
        const auto& l = net.layer(li);
        const auto& basis = l.map.basis();
        const auto nb = static_cast<Eigen::Index>(basis.size());
        const int n_in = l.map.n_in();
        mono.resize(nb, P);
        col.resize(static_cast<std::size_t>(n_in));
        for (Eigen::Index j = 0; j < P; ++j) {
          for (int v = 0; v < n; ++v) col[static_cast<std::size_t>(v)] = state(v, j);
          for (std::size_t q = 0; q < pv[li].size(); ++q) col[static_cast<std::size_t>(n) + q] = pv[li][q];
          basis.monomials(col, std::span<double>(mono.col(j).data(), static_cast<std::size_t>(nb)));
        }
        next.noalias() = l.map.coefficients() * mono;
        state.swap(next);
        if (l.tap) {
          if (keep_taps) r.taps[tap_i].middleRows(static_cast<Eigen::Index>(p0), P) = state.transpose();
          ++tap_i;
        }
      }
      r.final_state.middleRows(static_cast<Eigen::Index>(p0), P) = state.transpose();
    }
  }, 1);
  return r;
}

// Layer map with its parameters substituted (an n -> n map).  Exact: the
// substitution is affine.
inline TaylorMap fix_parameters(const TaylorMap& map, const std::vector<double>& values) {
  const int n = map.n_out();
  if (map.n_in() != n + static_cast<int>(values.size()))
    throw ShapeError("fix_parameters: parameter count does not match map inputs");
  if (values.empty()) return map;
  TaylorMap embed(n, map.n_in(), map.order());
  for (int i = 0; i < n; ++i) embed.weights(1)(i, i) = 1.0;
  for (std::size_t q = 0; q < values.size(); ++q) embed.weights(0)(n + static_cast<Eigen::Index>(q), 0) = values[q];
  return compose(embed, map);
}

// Composition of all layers, first layer applied first, truncated at the
// network order.
inline TaylorMap one_turn_map(const Network& net, const ParamValues* params = nullptr) {
  auto m = TaylorMap::identity(net.state_dim(), net.order());
  for (const auto& l : net.layers()) {
    const auto values = detail::layer_params(net, l, params);
    m = compose(m, fix_parameters(l.map, values));
  }
  return m;
}

struct BuildOptions {
  SextupoleOptions sextupole{};
  bool zero_xp_k = false;
  bool correctors_trainable = true;
};

// Map of one element (misalignment included).  Parametric quadrupoles take
// their strength as one extra input.
inline TaylorMap element_map(const ElementSpec& e, int n, int order, const BuildOptions& opt = {}) {
  TaylorMap m;
  try {
    switch (e.kind) {
      case ElementKind::drift: m = drift_map(e.length, n, order); break;
      case ElementKind::quadrupole:
        m = e.parametric ? parametric_quad_map(e.length, n, order, opt.zero_xp_k)
                         : quad_map(e.length, e.strength, n, order);
        break;
      case ElementKind::sbend:
        m = e.strength == 0.0 && e.length == 0.0 ? TaylorMap::identity(n, order)
                                                 : sbend_map(e.length, e.strength, n, order);
        break;
      case ElementKind::sextupole: m = sextupole_map(e.length, e.strength, n, order, opt.sextupole); break;
      case ElementKind::hcorrector: m = corrector_map(e.strength, 0.0, n, order); break;
      case ElementKind::vcorrector:
        if (n == 2) {
          if (e.strength != 0.0) throw ShapeError("vertical corrector with a kick needs n = 4");
          m = TaylorMap::identity(n, order);
        } else {
          m = corrector_map(0.0, e.strength, n, order);
        }
        break;
      case ElementKind::monitor:
      case ElementKind::marker: m = TaylorMap::identity(n, order); break;
    }
    if (e.parametric && e.kind != ElementKind::quadrupole)
      throw BuildError("only quadrupoles can be parametric");
    m = apply_misalignment(m, e.dx, e.dy);
  } catch (const Error& err) {
    throw BuildError("element '" + e.name + "': " + err.what());
  }
  return m;
}

// Builds the layer list of `plan_segments`.  Repeated names get a "#k"
// suffix so that every label is unique.
inline Network build_network(const LatticeDoc& doc, int order, MergePolicy policy, const BuildOptions& opt = {}) {
  const LatticeDoc split = split_at_monitors(doc);
  const auto seq = split.elements();
  const auto plan = plan_segments(split, policy);
  Network net(split.dim, order);
  net.set_ring(split.ring);

  std::map<std::string, int> total, seen;
  for (const auto& s : plan.segments) ++total[s.label];

  for (const auto& seg : plan.segments) {
    Layer layer;
    layer.tap = seg.tap;
    layer.trainable = seg.trainable && opt.correctors_trainable;
    layer.label = seg.label;
    if (total[seg.label] > 1) layer.label += "#" + std::to_string(++seen[seg.label]);
    if (seg.parametric) {
      const auto& e = seq[seg.elements.front()];
      layer.map = element_map(e, split.dim, order, opt);
      layer.params = {e.name};
      net.parameters()[e.name] = e.strength;
    } else {
      auto m = TaylorMap::identity(split.dim, order);
      for (auto idx : seg.elements) m = compose(m, element_map(seq[idx], split.dim, order, opt));
      layer.map = std::move(m);
    }
    if (seg.elements.size() == 1) {
      const auto kind = seq[seg.elements.front()].kind;
      if (kind == ElementKind::hcorrector) layer.knobs = {1};
      if (kind == ElementKind::vcorrector && split.dim == 4) layer.knobs = {3};
    }
    net.add_layer(std::move(layer));
  }
  if (net.size() == 0) throw BuildError("lattice sequence is empty");
  return net;
}

// ---- model files ----

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline nlohmann::json model_to_json(const Network& net) {
  using nlohmann::json;
  json j;
  j["version"] = kModelFormatVersion;
  j["order"] = net.order();
  j["state_dim"] = net.state_dim();
  j["basis"] = kBasisTag;
  j["ring"] = net.ring();
  j["parameters"] = net.parameters();
  json layers = json::array();
  for (const auto& l : net.layers()) {
    json jl;
    jl["label"] = l.label;
    jl["tap"] = l.tap;
    jl["trainable"] = l.trainable;
    if (!l.params.empty()) jl["params"] = l.params;
    if (!l.knobs.empty()) jl["knobs"] = l.knobs;
    json w = json::object();
    for (int d = 0; d <= l.map.order(); ++d) {
      const Eigen::MatrixXd block = l.map.weights(d);
      json rows = json::array();
      for (Eigen::Index r = 0; r < block.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < block.cols(); ++c) row.push_back(block(r, c));
        rows.push_back(std::move(row));
      }
      w["W" + std::to_string(d)] = std::move(rows);
    }
    jl["weights"] = std::move(w);
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline std::string save_model(const Network& net) { return model_to_json(net).dump(1) + "\n"; }

inline Network model_from_json(const nlohmann::json& j) {
  auto need = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(std::string("model: missing field '") + key + "'");
    return obj.at(key);
  };
  try {
    const int version = need(j, "version").get<int>();
    if (version != kModelFormatVersion)
      throw ParseError("model: unsupported version " + std::to_string(version) + " (expected " +
                       std::to_string(kModelFormatVersion) + ")");
    if (need(j, "basis").get<std::string>() != kBasisTag)
      throw ParseError("model: unknown basis convention '" + j.at("basis").get<std::string>() + "'");
    Network net(need(j, "state_dim").get<int>(), need(j, "order").get<int>());
    if (j.contains("ring")) net.set_ring(j.at("ring").get<bool>());
    if (j.contains("parameters")) net.parameters() = j.at("parameters").get<ParamValues>();
    const auto& layers = need(j, "layers");
    if (!layers.is_array()) throw ParseError("model: 'layers' must be an array");
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const auto& jl = layers[li];
      Layer l;
      l.label = need(jl, "label").get<std::string>();
      l.tap = need(jl, "tap").get<bool>();
      l.trainable = need(jl, "trainable").get<bool>();
      if (jl.contains("params")) l.params = jl.at("params").get<std::vector<std::string>>();
      if (jl.contains("knobs")) l.knobs = jl.at("knobs").get<std::vector<int>>();
      const int n_in = net.state_dim() + static_cast<int>(l.params.size());
      l.map = TaylorMap(n_in, net.state_dim(), net.order());
      const auto& w = need(jl, "weights");
      for (int d = 0; d <= net.order(); ++d) {
        const auto key = "W" + std::to_string(d);
        const auto& rows = need(w, key.c_str());
        auto block = l.map.weights(d);
        if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != block.rows())
          throw ParseError("model: layer " + std::to_string(li) + " " + key + " has the wrong number of rows");
        for (Eigen::Index r = 0; r < block.rows(); ++r) {
          const auto& row = rows[static_cast<std::size_t>(r)];
          if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != block.cols())
            throw ParseError("model: layer " + std::to_string(li) + " " + key + " row " + std::to_string(r) +
                             " has the wrong length");
          for (Eigen::Index c = 0; c < block.cols(); ++c) block(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
      }
      net.add_layer(std::move(l));
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

inline Network load_model(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(std::string("model: malformed JSON: ") + e.what(), line, col);
  }
  return model_from_json(j);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path + "'");
}

// ---- track records ----

// Readings (x, y) per turn and tap.  Storage is turn-major.
struct TrackRecord {
  std::vector<std::string> taps;
  std::size_t turns = 0;
  std::vector<double> x, y;
  std::vector<char> valid;

  TrackRecord() = default;
  TrackRecord(std::vector<std::string> tap_labels, std::size_t n_turns)
      : taps(std::move(tap_labels)), turns(n_turns),
        x(turns * taps.size(), 0.0), y(turns * taps.size(), 0.0), valid(turns * taps.size(), 1) {}

  std::size_t index(std::size_t turn, std::size_t tap) const { return turn * taps.size() + tap; }
  std::size_t size() const { return x.size(); }
  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), char{1}));
  }

  friend bool operator==(const TrackRecord&, const TrackRecord&) = default;
};

// Single pass through the network: one turn of tap readings.
inline TrackRecord single_pass(const Network& net, const PhaseVector& x0, const ParamValues* params = nullptr) {
  const auto r = forward(net, x0, params);
  TrackRecord rec(net.tap_labels(), 1);
  for (std::size_t t = 0; t < r.taps.size(); ++t) {
    rec.x[t] = r.taps[t][0];
    rec.y[t] = net.state_dim() == 4 ? r.taps[t][2] : 0.0;
  }
  return rec;
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  for (;;) {
    const auto p = line.find(',', start);
    f.push_back(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return f;
}

inline double csv_double(std::string_view s, std::size_t line) {
  while (!s.empty() && (s.front() == ' ')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError("malformed number '" + std::string(s) + "'", line, 1);
  return v;
}

inline std::size_t csv_index(std::string_view s, std::size_t line) {
  while (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError("malformed integer '" + std::string(s) + "'", line, 1);
  return v;
}

inline std::vector<std::string_view> csv_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto p = text.find('\n', start);
    if (p == std::string_view::npos) p = text.size();
    auto l = text.substr(start, p - start);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back(l);
    start = p + 1;
  }
  return lines;
}

}  // namespace detail

inline std::string track_record_csv(const TrackRecord& rec) {
  std::string out = "turn,tap,x,y,valid\n";
  for (std::size_t t = 0; t < rec.turns; ++t)
    for (std::size_t k = 0; k < rec.taps.size(); ++k) {
      const auto i = rec.index(t, k);
      out += std::to_string(t) + "," + rec.taps[k] + "," + detail::fmt17(rec.x[i]) + "," + detail::fmt17(rec.y[i]) +
             "," + (rec.valid[i] ? "1" : "0") + "\n";
    }
  return out;
}

// Rows may come in any order; every (turn, tap) pair must appear once.  Tap
// order follows first appearance.
inline TrackRecord parse_track_record_csv(std::string_view text) {
  const auto lines = detail::csv_lines(text);
  if (lines.empty() || lines[0] != "turn,tap,x,y,valid")
    throw ParseError("track record: expected header 'turn,tap,x,y,valid'", 1, 1);
  struct Row { std::size_t turn; std::string tap; double x, y; bool valid; };
  std::vector<Row> rows;
  std::vector<std::string> taps;
  std::map<std::string, std::size_t> tap_index;
  std::size_t turns = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = detail::split_csv(lines[i]);
    if (f.size() != 5) throw ParseError("track record: expected 5 fields", i + 1, 1);
    Row r{detail::csv_index(f[0], i + 1), std::string(f[1]), detail::csv_double(f[2], i + 1),
          detail::csv_double(f[3], i + 1), detail::csv_index(f[4], i + 1) != 0};
    if (r.turn > 100000000) throw ParseError("track record: turn index too large", i + 1, 1);
    if (!tap_index.count(r.tap)) {
      tap_index[r.tap] = taps.size();
      taps.push_back(r.tap);
    }
    turns = std::max(turns, r.turn + 1);
    rows.push_back(std::move(r));
  }
  TrackRecord rec(taps, turns);
  std::vector<char> seen(rec.size(), 0);
  for (const auto& r : rows) {
    const auto i = rec.index(r.turn, tap_index[r.tap]);
    if (seen[i]) throw ParseError("track record: duplicate reading for turn " + std::to_string(r.turn) + " tap " + r.tap);
    seen[i] = 1;
    rec.x[i] = r.x;
    rec.y[i] = r.y;
    rec.valid[i] = r.valid ? 1 : 0;
  }
  if (std::find(seen.begin(), seen.end(), char{0}) != seen.end())
    throw ParseError("track record: missing readings");
  return rec;
}

}  // namespace tmpnn
