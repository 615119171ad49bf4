#include "nslang/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "nslang/datagen.hpp"
#include "nslang/errors.hpp"
#include "nslang/optimizer.hpp"

namespace nslang::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ModeFlags {
  std::string mode = "full";
  std::string bc;  // empty: taken from the mode

  InferenceMode resolve() const {
    InferenceMode m = mode_from_string(mode);
    if (!bc.empty()) {
      const BoundaryCondition b = boundary_from_string(bc);
      if (b != m.bc)
        throw ParameterError("--bc " + bc + " contradicts --mode " + mode +
                             " (which uses " + to_string(m.bc) + ")");
    }
    return m;
  }
};

void add_mode_flags(CLI::App* app, ModeFlags& f) {
  app->add_option("--mode", f.mode, "full | no-absorption-op | reflecting-bc | "
                                    "equilibrium-p0")
      ->capture_default_str();
  app->add_option("--bc", f.bc, "absorbing | reflecting (must agree with --mode)");
}

json mode_json(const InferenceMode& m) {
  return {{"name", m.name()},
          {"use_p0", m.use_p0},
          {"bc", to_string(m.bc)},
          {"use_absorption", m.use_absorption}};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw ParameterError("cannot create directory '" + dir.string() + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!(out << text)) throw ParameterError("cannot write '" + path.string() + "'");
}

void write_model_csv(const LatentModel& model, const fs::path& path) {
  std::ostringstream s;
  s << std::setprecision(17) << "x,phi,p0,peq,force\n";
  const GridFunction peq = equilibrium_density(model.phi);
  const Eigen::VectorXd& x = model.grid()->nodes();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    s << x[i] << ',' << model.phi[i] << ',' << model.p0[i] << ',' << peq[i]
      << ',' << model.force[i] << '\n';
  write_text(path, s.str());
}

std::string trace_csv(const FitTrace& trace) {
  std::ostringstream s;
  s << std::setprecision(17) << "iter,loglik,rel_loglik,param\n";
  for (const TraceRecord& r : trace.records) {
    s << r.iter << ',' << r.loglik << ',';
    if (r.rel_loglik) s << *r.rel_loglik;
    s << ',' << to_string(r.param) << '\n';
  }
  return s.str();
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string preset = "ramping";
  std::string model_file;
  std::string task = "reaction-time";
  double duration = 1.0;
  int trials = 200;
  std::uint64_t seed = 0;
  double dt = 1e-4;
  double t_max = 10.0;
  std::string out_dir = ".";
  unsigned workers = 1;
  bool print_config = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimConfig cfg;
  cfg.dt = a.dt;
  cfg.t_max = a.t_max;
  cfg.n_trials = a.trials;
  cfg.seed = a.seed;
  if (a.task == "reaction-time") {
    cfg.task = Task::reaction_time();
  } else if (a.task == "fixed-duration") {
    cfg.task = Task::fixed_duration(a.duration);
  } else {
    throw ParameterError("unknown task '" + a.task + "'");
  }
  const Preset preset = preset_from_string(a.preset);
  if (preset == Preset::Custom && a.model_file.empty())
    throw ParameterError("--preset custom needs --model");
  cfg.validate();

  json config = {{"command", "simulate"},
                 {"preset", a.preset},
                 {"model", a.model_file},
                 {"task", to_string(cfg.task)},
                 {"duration", cfg.task.duration},
                 {"trials", cfg.n_trials},
                 {"seed", cfg.seed},
                 {"dt", cfg.dt},
                 {"t_max", cfg.t_max},
                 {"out_dir", a.out_dir},
                 {"workers", a.workers}};
  if (a.print_config) {
    out << config.dump(2) << '\n';
    return kExitOk;
  }

  const LatentModel model = preset == Preset::Custom
                                ? load_model(a.model_file)
                                : preset_model(preset, default_grid());
  const Dataset data = generate_dataset(model, a.preset, cfg, a.workers);
  const fs::path dir(a.out_dir);
  ensure_dir(dir);
  save_dataset(data, (dir / "dataset.json").string());
  save_model(model, (dir / "ground_truth.json").string());

  double total_duration = 0.0;
  double total_spikes = 0.0;
  int upper = 0;
  int lower = 0;
  for (std::size_t i = 0; i < data.trials.size(); ++i) {
    total_duration += data.trials[i].duration();
    total_spikes += static_cast<double>(data.trials[i].spikes.size());
    upper += data.boundary[i] == 1;
    lower += data.boundary[i] == -1;
  }
  const double n = static_cast<double>(data.trials.size());
  const json summary = {{"trials", data.trials.size()},
                        {"mean_duration", total_duration / n},
                        {"mean_spike_count", total_spikes / n},
                        {"fraction_upper", upper / n},
                        {"fraction_lower", lower / n},
                        {"time_limited", data.metadata["time_limited"]},
                        {"dataset", (dir / "dataset.json").string()},
                        {"ground_truth", (dir / "ground_truth.json").string()}};
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------- fit

struct FitArgs {
  std::string data_file;
  ModeFlags mode;
  std::string ground_truth;
  std::string init_model;
  std::string schedule = "force-only";
  int iters = 500;
  double lr_force = 0.005;
  double lr_f0 = 0.025;
  double lr_d = 0.00025;
  double init_d = 1.0;
  double d_floor = 1e-4;
  int nv = 447;
  int snapshot_every = 10;
  std::string out_dir = "fit_out";
  unsigned workers = 1;
  bool print_config = false;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  FitConfig cfg;
  cfg.mode = a.mode.resolve();
  cfg.schedule = schedule_from_string(a.schedule);
  cfg.max_iters = a.iters;
  cfg.lr_force = a.lr_force;
  cfg.lr_f0 = a.lr_f0;
  cfg.lr_d = a.lr_d;
  cfg.init_d = a.init_d;
  cfg.d_floor = a.d_floor;
  cfg.nv = a.nv;
  cfg.snapshot_every = a.snapshot_every;
  cfg.workers = a.workers;
  cfg.validate();

  json config = {{"command", "fit"},
                 {"data", a.data_file},
                 {"mode", mode_json(cfg.mode)},
                 {"ground_truth", a.ground_truth},
                 {"init_model", a.init_model},
                 {"schedule", to_string(cfg.schedule)},
                 {"iters", cfg.max_iters},
                 {"lr_force", cfg.lr_force},
                 {"lr_f0", cfg.lr_f0},
                 {"lr_d", cfg.lr_d},
                 {"init_d", a.init_model.empty() ? json(cfg.init_d) : json("from init model")},
                 {"d_floor", cfg.d_floor},
                 {"nv", cfg.nv},
                 {"snapshot_every", cfg.snapshot_every},
                 {"out_dir", a.out_dir},
                 {"workers", cfg.workers}};
  if (a.print_config) {
    out << config.dump(2) << '\n';
    return kExitOk;
  }

  const Dataset data = load_dataset(a.data_file);
  GridPtr grid = default_grid();
  std::optional<LatentModel> gt;
  if (!a.ground_truth.empty()) {
    gt = load_model(a.ground_truth);
    grid = gt->grid();
    cfg.rate = gt->rate;
  }
  if (!a.init_model.empty()) {
    // Starts from the model's D, p0 and rate; F still starts at zero.
    const LatentModel init = load_model(a.init_model, gt ? grid : nullptr);
    grid = init.grid();
    cfg.init_f0 = init.f0;
    cfg.init_d = init.diffusion;
    cfg.rate = init.rate;
  }

  const fs::path dir(a.out_dir);
  ensure_dir(dir / "snapshots");
  const FitTrace trace = fit(data.trials, grid, cfg, gt ? &*gt : nullptr);

  write_text(dir / "trace.csv", trace_csv(trace));
  for (const auto& [iter, model] : trace.snapshots) {
    std::ostringstream name;
    name << "iter_" << std::setw(5) << std::setfill('0') << iter << ".json";
    save_model(model, (dir / "snapshots" / name.str()).string());
  }
  save_model(trace.final_model, (dir / "final_model.json").string());
  write_model_csv(trace.final_model, dir / "final_model.csv");

  json summary = {{"config", config},
                  {"trials", data.trials.size()},
                  {"iterations", trace.records.empty() ? 0 : trace.records.back().iter},
                  {"completed", trace.completed},
                  {"final_loglik", trace.records.empty() ? json(nullptr)
                                                         : json(trace.records.back().loglik)},
                  {"final_D", trace.final_model.diffusion}};
  summary["loglik_gt"] = trace.loglik_gt ? json(*trace.loglik_gt) : json(nullptr);
  if (!trace.error.empty()) summary["error"] = trace.error;
  write_text(dir / "fit_summary.json", summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';
  if (!trace.completed) {
    err << "error: " << trace.error << " (partial trace saved)\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
  std::string model_file;
  std::string data_file;
  ModeFlags mode;
  std::string compare;
  std::string export_csv;
  int nv = 447;
  unsigned workers = 1;
  bool print_config = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const InferenceMode mode = a.mode.resolve();
  if (a.nv < 1) throw ParameterError("--nv must be positive");
  json config = {{"command", "eval"},
                 {"model", a.model_file},
                 {"data", a.data_file},
                 {"mode", mode_json(mode)},
                 {"compare", a.compare},
                 {"export_csv", a.export_csv},
                 {"nv", a.nv},
                 {"workers", a.workers}};
  if (a.print_config) {
    out << config.dump(2) << '\n';
    return kExitOk;
  }
  const LatentModel model = load_model(a.model_file);
  const Dataset data = load_dataset(a.data_file);
  const double ll = evaluate_loglik(model, data.trials, mode, a.nv, a.workers);
  json report = {{"model", a.model_file},
                 {"mode", mode.name()},
                 {"trials", data.trials.size()},
                 {"loglik", ll}};
  if (!a.compare.empty()) {
    const LatentModel other = load_model(a.compare);
    const double ll2 = evaluate_loglik(other, data.trials, mode, a.nv, a.workers);
    report["compare"] = a.compare;
    report["loglik_compare"] = ll2;
    report["delta_loglik"] = ll - ll2;
    if (ll2 != 0.0) report["rel_loglik"] = relative_loglik(ll, ll2);
  }
  if (!a.export_csv.empty()) {
    write_model_csv(model, a.export_csv);
    report["export_csv"] = a.export_csv;
  }
  out << std::setprecision(17) << report.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Non-stationary latent Langevin dynamics from spike trains"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* s = app.add_subcommand("simulate", "generate a synthetic dataset");
  s->add_option("--preset", sim.preset, "ramping | stepping | custom")->capture_default_str();
  s->add_option("--model", sim.model_file, "model JSON for --preset custom");
  s->add_option("--task", sim.task, "reaction-time | fixed-duration")->capture_default_str();
  s->add_option("--duration", sim.duration, "fixed-duration trial length (s)")->capture_default_str();
  s->add_option("--trials", sim.trials, "number of trials")->capture_default_str();
  s->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  s->add_option("--dt", sim.dt, "integration step (s)")->capture_default_str();
  s->add_option("--t-max", sim.t_max, "reaction-time cap (s)")->capture_default_str();
  s->add_option("--out-dir", sim.out_dir, "output directory")->capture_default_str();
  s->add_option("--workers", sim.workers, "worker threads, 0 = all cores")->capture_default_str();
  s->add_flag("--print-config", sim.print_config, "print the resolved configuration and exit");

  FitArgs fa;
  CLI::App* f = app.add_subcommand("fit", "fit a model by gradient ascent");
  f->add_option("data", fa.data_file, "dataset JSON")->required();
  add_mode_flags(f, fa.mode);
  f->add_option("--ground-truth", fa.ground_truth, "ground-truth model JSON (enables rel_loglik)");
  f->add_option("--init-model", fa.init_model, "take initial D, p0 and rate from this model");
  f->add_option("--schedule", fa.schedule, "force-only | alternating")->capture_default_str();
  f->add_option("--iters", fa.iters, "gradient iterations")->capture_default_str();
  f->add_option("--lr-force", fa.lr_force, "learning rate for F")->capture_default_str();
  f->add_option("--lr-f0", fa.lr_f0, "learning rate for F0")->capture_default_str();
  f->add_option("--lr-d", fa.lr_d, "learning rate for D")->capture_default_str();
  f->add_option("--init-d", fa.init_d, "initial D")->capture_default_str();
  f->add_option("--d-floor", fa.d_floor, "lower bound for D")->capture_default_str();
  f->add_option("--nv", fa.nv, "eigenfunctions kept")->capture_default_str();
  f->add_option("--snapshot-every", fa.snapshot_every, "snapshot cadence (0: final only)")->capture_default_str();
  f->add_option("--out-dir", fa.out_dir, "output directory")->capture_default_str();
  f->add_option("--workers", fa.workers, "worker threads, 0 = all cores")->capture_default_str();
  f->add_flag("--print-config", fa.print_config, "print the resolved configuration and exit");

  EvalArgs ea;
  CLI::App* e = app.add_subcommand("eval", "evaluate a model on a dataset");
  e->add_option("model", ea.model_file, "model JSON")->required();
  e->add_option("data", ea.data_file, "dataset JSON")->required();
  add_mode_flags(e, ea.mode);
  e->add_option("--compare", ea.compare, "second model: report delta log L and rel_loglik");
  e->add_option("--export-csv", ea.export_csv, "write x,phi,p0,peq,force");
  e->add_option("--nv", ea.nv, "eigenfunctions kept")->capture_default_str();
  e->add_option("--workers", ea.workers, "worker threads, 0 = all cores")->capture_default_str();
  e->add_flag("--print-config", ea.print_config, "print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim, out);
    if (f->parsed()) return cmd_fit(fa, out, err);
    return cmd_eval(ea, out);
  } catch (const NumericalError& ex) {
    err << "numerical error: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }
}

int run(int argc, char** argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace nslang::cli
