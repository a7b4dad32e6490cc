#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tmpnn/analysis.hpp"
#include "tmpnn/correction.hpp"
#include "tmpnn/training.hpp"

using namespace tmpnn;

namespace {

enum Exit { kOk = 0, kFailure = 1, kInput = 2, kBuild = 3, kDiverged = 4, kInfeasible = 5 };

const char* kGnuplotHints = R"(# track.csv: x at the first tap versus turn
set datafile separator ','
plot 'track.csv' every ::1 using ($2 eq 'bpm1' ? $1 : 1/0):3 with points title 'x'

# portrait.csv: one ellipse (or distorted curve) per amplitude
set datafile separator ','
plot 'portrait.csv' every ::1 using 3:4:1 with points palette pt 7 ps 0.3 title 'x, xp'

# train report: loss per epoch
plot '< jq -r ".loss[]" report.json' with lines title 'loss'
)";

PhaseVector parse_state(const std::string& s, int dim) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) v.push_back(detail::csv_double(item, ++i));
  if (s.empty()) v.assign(static_cast<std::size_t>(dim), 0.0);
  if (static_cast<int>(v.size()) != dim)
    throw ShapeError("initial state needs " + std::to_string(dim) + " comma-separated values");
  return Eigen::Map<const PhaseVector>(v.data(), dim);
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    write_file(path, content);
}

Network load_model_file(const std::string& path) { return load_model(read_file(path)); }

MergePolicy parse_merge(const std::string& s) {
  if (s == "per-element") return MergePolicy::per_element;
  if (s == "minimal") return MergePolicy::minimal;
  throw ParseError("unknown merge policy '" + s + "' (per-element or minimal)");
}

std::map<std::string, Eigen::MatrixXd> parse_masks(const Network& net, const std::vector<std::string>& specs) {
  std::map<std::string, Eigen::MatrixXd> masks;
  for (const auto& spec : specs) {
    const auto a = spec.rfind(':');
    const auto b = a == std::string::npos || a == 0 ? std::string::npos : spec.rfind(':', a - 1);
    if (b == std::string::npos) throw ParseError("mask '" + spec + "': expected label:row:column");
    const std::string label = spec.substr(0, b);
    const auto row = static_cast<Eigen::Index>(detail::csv_index(spec.substr(b + 1, a - b - 1), 1));
    const auto col = static_cast<Eigen::Index>(detail::csv_index(spec.substr(a + 1), 1));
    const Layer* layer = nullptr;
    for (const auto& l : net.layers())
      if (detail::label_matches(label, l.label)) {
        layer = &l;
        break;
      }
    if (!layer) throw BuildError("mask: no layer labelled '" + label + "'");
    const auto& c = layer->map.coefficients();
    if (row >= c.rows() || col >= c.cols()) throw ShapeError("mask '" + spec + "' is outside the coefficient matrix");
    auto it = masks.try_emplace(label, Eigen::MatrixXd::Zero(c.rows(), c.cols())).first;
    it->second(row, col) = 1.0;
  }
  return masks;
}

struct Globals {
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taylor-map polynomial networks for accelerator lattices"};
  app.set_version_flag("--version", "tmpnn model format " + std::to_string(kModelFormatVersion) + ", basis " +
                                        kBasisTag);
  Globals g;
  app.add_option("--threads", g.threads, "Worker thread cap (0: hardware concurrency)");
  app.add_option("--seed", g.seed, "Random seed");
  bool hints = false;
  app.add_flag("--gnuplot-hints", hints, "Print suggested gnuplot scripts for the CSV outputs");

  // build
  auto* build = app.add_subcommand("build", "Lattice file to model JSON");
  std::string lattice_path, out_path, merge = "per-element";
  int order = 2;
  build->add_option("lattice", lattice_path)->required();
  build->add_option("--order", order)->check(CLI::Range(1, kMaxMapOrder));
  build->add_option("--merge", merge, "per-element or minimal");
  build->add_option("-o,--output", out_path, "Model JSON (default stdout)");

  // track
  auto* trk = app.add_subcommand("track", "Multi-turn tracking of one particle");
  std::string model_path, x0_str;
  std::size_t turns = 1;
  double aperture = 1.0;
  trk->add_option("model", model_path)->required();
  trk->add_option("--x0", x0_str, "Initial state, comma separated (default zero)");
  trk->add_option("--turns", turns);
  trk->add_option("--aperture", aperture);
  trk->add_option("-o,--output", out_path, "Track CSV (default stdout)");

  // portrait
  auto* por = app.add_subcommand("portrait", "Phase portrait at the end of each turn");
  std::vector<double> amplitudes;
  por->add_option("model", model_path)->required();
  por->add_option("--amplitudes", amplitudes)->required()->delimiter(',');
  por->add_option("--turns", turns);
  por->add_option("--aperture", aperture);
  por->add_option("-o,--output", out_path, "Portrait CSV (default stdout)");

  // tune
  auto* tun = app.add_subcommand("tune", "Fractional tune from a track CSV");
  std::string track_path, tap_label, plane = "x";
  tun->add_option("track", track_path)->required();
  tun->add_option("--tap", tap_label, "Tap label (default: first tap)");
  tun->add_option("--plane", plane)->check(CLI::IsMember({"x", "y"}));
  tun->add_option("-o,--output", out_path, "Tune JSON (default stdout)");

  // train
  auto* trn = app.add_subcommand("train", "Fine-tune a model on observed readings");
  std::string data_path, sidecar_path, report_path;
  TrainConfig cfg;
  std::vector<std::string> mask_specs;
  trn->add_option("model", model_path)->required();
  trn->add_option("--data", data_path, "Readings CSV (sample,turn,tap,x,y,valid)")->required();
  trn->add_option("--sidecar", sidecar_path, "Initial conditions JSON")->required();
  trn->add_option("--epochs", cfg.epochs);
  trn->add_option("--lambda", cfg.sym_weight, "Symplectic penalty weight");
  trn->add_option("--lr", cfg.learning_rate);
  trn->add_option("--clip", cfg.clip_norm, "Global gradient norm cap (<= 0 disables)");
  trn->add_option("--batch", cfg.batch_size, "Samples per step (0: full batch)");
  trn->add_option("--trainable", cfg.trainable_labels, "Layer labels to train (default: trainable flag)");
  trn->add_option("--mask", mask_specs, "label:row:column entry to train; others are frozen");
  trn->add_option("--param", cfg.trainable_parameters, "Parameter to train");
  trn->add_flag("--fit-x0", cfg.fit_initial_condition);
  trn->add_option("-o,--output", out_path, "Trained model JSON")->required();
  trn->add_option("--report", report_path, "Training report JSON");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Readings of a machine with random errors");
  std::string scenario_path, kicks_path, machine_path;
  sim_cmd->add_option("lattice", lattice_path)->required();
  sim_cmd->add_option("--scenario", scenario_path, "Scenario JSON (default: no errors)");
  sim_cmd->add_option("--x0", x0_str);
  sim_cmd->add_option("--kicks", kicks_path, "Corrector settings CSV to apply");
  sim_cmd->add_option("--machine", machine_path, "Also write the erroneous machine as model JSON");
  sim_cmd->add_option("-o,--output", out_path, "Readings CSV (default stdout)");

  // correct
  auto* cor = app.add_subcommand("correct", "Corrector settings that flatten the orbit");
  std::string method = "adam";
  CorrectionOptions copt;
  cor->add_option("model", model_path)->required();
  cor->add_option("--readings", track_path, "Readings CSV")->required();
  cor->add_option("--method", method)->check(CLI::IsMember({"adam", "least_squares"}));
  cor->add_option("--kick-limit", copt.kick_limit);
  cor->add_option("--lr", copt.learning_rate);
  cor->add_option("--epochs", copt.epochs);
  cor->add_option("--x0", x0_str);
  cor->add_option("--corrector", copt.correctors, "Restrict to these correctors");
  cor->add_option("-o,--output", out_path, "Kicks CSV (default stdout)");
  cor->add_option("--report", report_path, "Correction report JSON");

  // thread
  auto* thr = app.add_subcommand("thread", "First-turn steering of an erroneous machine");
  thr->add_option("lattice", lattice_path)->required();
  thr->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  thr->add_option("--x0", x0_str);
  thr->add_option("-o,--output", out_path, "Threading log JSON (default stdout)");
  thr->add_option("--kicks", kicks_path, "Final corrector settings CSV");

  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  if (hints) {
    std::cout << kGnuplotHints;
    return kOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kInput;
  }
  set_max_threads(g.threads);

  try {
    if (*build) {
      const auto doc = parse_lattice(read_file(lattice_path));
      const auto net = build_network(doc, order, parse_merge(merge));
      emit(out_path, save_model(net));
      std::fprintf(stderr, "layers: %zu\ntotal length: %.12g m\n", net.size(), doc.total_length());
    } else if (*trk) {
      const auto net = load_model_file(model_path);
      const auto res = track(net, parse_state(x0_str, net.state_dim()), turns, TrackOptions{aperture, nullptr});
      emit(out_path, track_record_csv(res.record));
      if (res.lost_turn) std::fprintf(stderr, "lost in turn %zu\n", *res.lost_turn);
    } else if (*por) {
      const auto net = load_model_file(model_path);
      emit(out_path, portrait_csv(phase_portrait(net, amplitudes, turns, TrackOptions{aperture, nullptr})));
    } else if (*tun) {
      const auto rec = parse_track_record_csv(read_file(track_path));
      std::size_t tap = 0;
      if (!tap_label.empty()) {
        const auto it = std::find(rec.taps.begin(), rec.taps.end(), tap_label);
        if (it == rec.taps.end()) throw ParseError("tune: no tap '" + tap_label + "' in " + track_path);
        tap = static_cast<std::size_t>(it - rec.taps.begin());
      }
      emit(out_path, tune_json(plane, tune_of_record(rec, tap, plane == "x" ? 0 : 1)).dump(1) + "\n");
    } else if (*trn) {
      auto net = load_model_file(model_path);
      auto samples = parse_training_data(read_file(data_path), read_file(sidecar_path));
      if (g.seed) cfg.seed = *g.seed;
      try {
        cfg.validate();
      } catch (const BuildError& e) {
        throw ParseError(e.what());
      }
      cfg.weight_masks = parse_masks(net, mask_specs);
      const auto report = train(net, samples, cfg);
      write_file(out_path, save_model(net));
      if (!report_path.empty()) write_file(report_path, report_to_json(report).dump(1) + "\n");
      std::fprintf(stderr, "loss %.6g -> %.6g\n", report.loss.empty() ? report.final.loss : report.loss.front(),
                   report.final.loss);
    } else if (*sim_cmd) {
      const auto doc = parse_lattice(read_file(lattice_path));
      Scenario sc;
      if (!scenario_path.empty()) sc = parse_scenario(read_file(scenario_path));
      if (g.seed) sc.errors.seed = *g.seed;
      auto machine = make_machine(doc, sc.order, sc.errors, sc.magnet_errors);
      machine.aperture = sc.aperture;
      if (!kicks_path.empty()) install_kicks(machine.net, parse_kicks_csv(read_file(kicks_path)));
      if (!machine_path.empty()) write_file(machine_path, save_model(machine.net));
      emit(out_path, track_record_csv(simulate_readings(machine, parse_state(x0_str, machine.net.state_dim()))));
    } else if (*cor) {
      const auto net = load_model_file(model_path);
      const auto rec = parse_track_record_csv(read_file(track_path));
      copt.method = method == "adam" ? CorrectionMethod::adam : CorrectionMethod::least_squares;
      copt.x0 = parse_state(x0_str, net.state_dim());
      const auto res = correct_orbit(net, rec, copt);
      emit(out_path, kicks_csv(res.kicks));
      if (!report_path.empty()) write_file(report_path, correction_json(res).dump(1) + "\n");
      std::fprintf(stderr, "rms %.6g -> %.6g\n", res.rms_before, res.rms_after);
      if (!res.feasible) {
        std::fprintf(stderr, "warning: %s\n", res.warning.c_str());
        return kInfeasible;
      }
    } else if (*thr) {
      const auto doc = parse_lattice(read_file(lattice_path));
      auto sc = parse_scenario(read_file(scenario_path));
      if (g.seed) sc.errors.seed = *g.seed;
      auto machine = make_machine(doc, sc.order, sc.errors, sc.magnet_errors);
      machine.aperture = sc.aperture;
      const auto model = build_network(doc, sc.order, MergePolicy::per_element);
      const auto res = thread_beam(machine, model, parse_state(x0_str, model.state_dim()), sc.thread);
      emit(out_path, thread_json(res).dump(1) + "\n");
      if (!kicks_path.empty()) write_file(kicks_path, kicks_csv(res.kicks));
      std::fprintf(stderr, "valid %zu -> %zu of %zu\n", res.log.front().valid, res.log.back().valid,
                   model.tap_labels().size());
      if (!res.complete) {
        std::fprintf(stderr, "warning: threading %s\n", res.stagnated ? "stagnated" : "did not complete");
        return kInfeasible;
      }
    }
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  } catch (const BuildError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBuild;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDiverged;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
