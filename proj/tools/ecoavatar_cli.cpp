#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ecoavatar/ecoavatar.hpp"

namespace {

using namespace ecoavatar;
using nlohmann::json;

// Every flag of every command lands here; the report echoes it in full.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::string output_dir;
  int verbosity = 0;
  std::string report;

  // simulate
  double alpha = 1.1, beta = 0.4, gamma = 0.4, delta = 0.1;
  double r0 = 10.0, f0 = 5.0, dt = 1e-3, duration = 20.0, t0 = 0.0;
  std::size_t stride = 1;

  // inputs
  std::string input;
  std::vector<std::string> maps;
  std::string nodata_policy = "reject";
  double fill_value = 0.0;
  bool interpolate_gaps = false;
  std::string prey = "";
  std::string predators = "";
  bool clamp_nonneg = false;

  // stack
  std::string brick_kind = "kernel";
  std::size_t bricks = 1;
  std::string activation = "sigmoid";
  std::string dsn_mode = "fixed-random";
  std::size_t hidden_size = 32;
  std::size_t hidden_size2 = 8;
  double kernel_width = 1.0;
  double kernel_width2 = 2.0;
  std::string inverse = "tikhonov";
  double lambda = 1e-6;
  std::size_t rank = 0;
  double threshold = numlin::default_svd_cutoff;
  std::vector<double> rho_grid;
  bool per_brick = false;
  std::size_t max_passes = 20;
  double split = 0.8;

  // model use
  std::string model;
  std::vector<double> state;
  std::size_t steps = 100;
  std::string reference;
  double epsilon = stability::default_epsilon;

  // count-params
  std::size_t series_count = 40;
  std::size_t series_length = 3650;
  std::vector<std::string> map_shapes;
  bool per_brick_scaling = false;

  // usle
  std::string r_factor, k_factor, ls_factor, c_factor, p_factor;

  // outputs
  std::string output;
  std::string curve;
};

json config_json(const RunConfig& c) {
  using io::number;
  return json{{"command", c.command},
              {"seed", c.seed},
              {"output_dir", c.output_dir},
              {"verbosity", c.verbosity},
              {"report", c.report},
              {"alpha", number(c.alpha)},
              {"beta", number(c.beta)},
              {"gamma", number(c.gamma)},
              {"delta", number(c.delta)},
              {"r0", number(c.r0)},
              {"f0", number(c.f0)},
              {"dt", number(c.dt)},
              {"duration", number(c.duration)},
              {"t0", number(c.t0)},
              {"stride", c.stride},
              {"input", c.input},
              {"maps", c.maps},
              {"nodata_policy", c.nodata_policy},
              {"fill_value", number(c.fill_value)},
              {"interpolate_gaps", c.interpolate_gaps},
              {"prey", c.prey},
              {"predators", c.predators},
              {"clamp_nonneg", c.clamp_nonneg},
              {"brick_kind", c.brick_kind},
              {"bricks", c.bricks},
              {"activation", c.activation},
              {"dsn_mode", c.dsn_mode},
              {"hidden_size", c.hidden_size},
              {"hidden_size2", c.hidden_size2},
              {"kernel_width", number(c.kernel_width)},
              {"kernel_width2", number(c.kernel_width2)},
              {"inverse", c.inverse},
              {"lambda", number(c.lambda)},
              {"rank", c.rank},
              {"threshold", number(c.threshold)},
              {"rho_grid", io::numbers(c.rho_grid)},
              {"per_brick", c.per_brick},
              {"max_passes", c.max_passes},
              {"split", number(c.split)},
              {"model", c.model},
              {"state", io::numbers(c.state)},
              {"steps", c.steps},
              {"reference", c.reference},
              {"epsilon", number(c.epsilon)},
              {"series_count", c.series_count},
              {"series_length", c.series_length},
              {"map_shapes", c.map_shapes},
              {"per_brick_scaling", c.per_brick_scaling},
              {"r_factor", c.r_factor},
              {"k_factor", c.k_factor},
              {"ls_factor", c.ls_factor},
              {"c_factor", c.c_factor},
              {"p_factor", c.p_factor},
              {"output", c.output},
              {"curve", c.curve}};
}

void log(const RunConfig& c, const std::string& msg) {
  if (c.verbosity > 0) std::cerr << "ecoavatar: " << msg << '\n';
}

// Relative output paths are placed under the output directory, if any.
std::string out_path(const RunConfig& c, const std::string& path) {
  if (path.empty() || c.output_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  std::filesystem::create_directories(c.output_dir);
  return (std::filesystem::path(c.output_dir) / path).string();
}

void emit_report(const RunConfig& c, json body) {
  body["config"] = config_json(c);
  body["seed"] = c.seed;
  const std::string text = body.dump(2) + "\n";
  if (c.report.empty()) {
    std::cout << text;
  } else {
    io::write_file(out_path(c, c.report), text);
    log(c, "report written to " + out_path(c, c.report));
  }
}

std::size_t series_index(const avatar::TimeSeriesSet& ts, const std::string& name,
                         std::size_t fallback) {
  if (name.empty()) {
    require(fallback < ts.series_count(), ErrorCode::invalid_argument,
            "input has too few series");
    return fallback;
  }
  for (std::size_t i = 0; i < ts.series_count(); ++i)
    if (ts.names[i] == name) return i;
  fail(ErrorCode::invalid_argument, "no series named '" + name + "'");
}

avatar::NodataPolicy nodata_policy(const std::string& s) {
  if (s == "reject") return avatar::NodataPolicy::reject;
  if (s == "mean-fill") return avatar::NodataPolicy::mean_fill;
  if (s == "constant-fill") return avatar::NodataPolicy::constant_fill;
  fail(ErrorCode::invalid_argument, "unknown NODATA policy '" + s + "'");
}

avatar::TimeSeriesSet load_series(const RunConfig& c, const std::string& path) {
  require(!path.empty(), ErrorCode::invalid_argument, "an input CSV is required");
  return io::read_timeseries_csv(path, io::CsvOptions{c.interpolate_gaps});
}

std::vector<avatar::ContextMap> load_maps(const RunConfig& c) {
  std::vector<avatar::ContextMap> maps;
  const io::GridOptions opts{nodata_policy(c.nodata_policy), c.fill_value};
  for (const auto& p : c.maps) maps.push_back(io::read_ascii_grid(p, opts));
  return maps;
}

stack::StackConfig stack_config(const RunConfig& c) {
  stack::BrickConfig b;
  b.kind = bricks::brick_kind_from_string(c.brick_kind);
  switch (numlin::inverse_mode_from_string(c.inverse)) {
    case numlin::InverseMode::exact_svd: b.inverse = numlin::InverseConfig::exact(); break;
    case numlin::InverseMode::truncated_svd:
      b.inverse = c.rank > 0 ? numlin::InverseConfig::truncated_rank(c.rank)
                             : numlin::InverseConfig::truncated_threshold(c.threshold);
      break;
    case numlin::InverseMode::tikhonov: b.inverse = numlin::InverseConfig::tikhonov(c.lambda); break;
  }
  b.activation.kind = bricks::activation_from_string(c.activation);
  b.dsn_mode = bricks::dsn_mode_from_string(c.dsn_mode);
  b.hidden_size = c.hidden_size;
  b.hidden_size2 = c.hidden_size2;
  b.kernel_width = c.kernel_width;
  b.kernel_width2 = c.kernel_width2;
  stack::StackConfig s;
  s.n_bricks = c.bricks;
  s.bricks = {b};
  s.seed = c.seed;
  s.validate();
  return s;
}

Vector state_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------
// Commands

void run_simulate(const RunConfig& c) {
  require(!c.output.empty(), ErrorCode::invalid_argument, "simulate needs --output");
  require(std::isfinite(c.duration) && c.duration > 0.0, ErrorCode::invalid_argument,
          "duration must be positive");
  const ecolv::LVParams p{c.alpha, c.beta, c.gamma, c.delta, false};
  const auto steps = static_cast<std::size_t>(std::llround(c.duration / c.dt));
  auto traj = ecolv::simulate_lv(p, c.r0, c.f0, c.dt, steps, c.t0);
  if (c.stride > 1) traj = ecolv::subsample(traj, c.stride);
  io::write_timeseries_csv(out_path(c, c.output), io::to_timeseries(traj));
  log(c, "wrote " + std::to_string(traj.size()) + " samples");
  emit_report(c, json{{"samples", traj.size()},
                      {"cadence", io::number(traj.dt)},
                      {"parameters", io::lv_params_json(p)},
                      {"output", out_path(c, c.output)}});
}

void run_fit_lv(const RunConfig& c) {
  const auto ts = load_series(c, c.input);
  const auto traj =
      io::to_trajectory(ts, series_index(ts, c.prey, 0), series_index(ts, c.predators, 1));
  ecolv::FitOptions opts;
  opts.clamp_nonneg = c.clamp_nonneg;
  const auto p = ecolv::fit_lv(traj, opts);
  json body{{"parameters", io::lv_params_json(p)}, {"samples", traj.size()}};
  if (!c.output.empty()) io::write_file(out_path(c, c.output), io::lv_params_json(p).dump(2) + "\n");
  emit_report(c, body);
}

void run_train(const RunConfig& c) {
  require(!c.output.empty(), ErrorCode::invalid_argument, "train needs --output for the model file");
  const auto ts = load_series(c, c.input);
  const auto pairs = avatar::build_training_pairs(ts, load_maps(c));
  stack::StackConfig cfg = stack_config(c);
  avatar::ScalingSet scaling = avatar::default_scaling(pairs);
  json body;

  if (!c.rho_grid.empty()) {
    const auto [train, validation] = avatar::split_pairs(pairs, c.split);
    avatar::ScalingSearchOptions opts;
    opts.grid = c.rho_grid;
    opts.max_passes = c.max_passes;
    opts.per_brick = c.per_brick;
    const auto search = avatar::optimize_scaling(train, validation, cfg, scaling, opts);
    log(c, "scaling search: " + std::to_string(search.evaluations) + " evaluations");
    scaling = search.scaling;
    cfg = search.config;
    body["scaling_search"] = io::scaling_search_json(search);
  }

  const auto model = stack::train_stack(pairs, cfg, &scaling);
  io::save_model(out_path(c, c.output), model);
  body["bricks"] = model.size();
  body["training_pairs"] = pairs.size();
  body["training_rmse"] = io::number(stack::pairs_rmse(model, pairs));
  body["model"] = out_path(c, c.output);
  if (const auto est = stability::linear_stability(model)) {
    body["spectral_radius"] = io::number(est->radius);
  }
  emit_report(c, body);
}

void run_predict(const RunConfig& c) {
  const auto model = io::load_model(c.model);
  json body;
  if (!c.state.empty()) {
    const Vector next = stack::predict_one_step(model, state_vector(c.state), model.context);
    body["prediction"] = io::vector_json(next);
  }
  if (!c.input.empty()) {
    auto ts = load_series(c, c.input);
    const Matrix next = stack::predict_columns(model, ts.values, model.context);
    const double dt = ts.cadence();
    for (double& t : ts.times) t += dt;
    ts.values = next;
    if (!c.output.empty()) io::write_timeseries_csv(out_path(c, c.output), ts);
    body["predictions"] = ts.size();
  }
  require(!c.state.empty() || !c.input.empty(), ErrorCode::invalid_argument,
          "predict needs --state or --input");
  emit_report(c, body);
}

void write_curve(const RunConfig& c, const std::vector<double>& curve, const std::string& label) {
  if (c.curve.empty()) return;
  std::string text = "step," + label + "\n";
  for (std::size_t k = 0; k < curve.size(); ++k)
    text += std::to_string(k + 1) + "," + io::format_double(curve[k]) + "\n";
  io::write_file(out_path(c, c.curve), text);
}

void run_rollout(const RunConfig& c) {
  const auto model = io::load_model(c.model);
  Vector start;
  if (!c.state.empty()) {
    start = state_vector(c.state);
  } else {
    const auto ts = load_series(c, c.input);
    start = ts.state(ts.size() - 1);
  }
  std::optional<Matrix> reference;
  if (!c.reference.empty()) reference = load_series(c, c.reference).values;
  const auto run = stability::rollout(model, start, model.context, c.steps,
                                      reference ? &*reference : nullptr);
  if (!c.output.empty()) {
    avatar::TimeSeriesSet ts;
    ts.names = model.schema.series_names;
    ts.units.assign(ts.names.size(), "");
    ts.values = run.predicted;
    for (std::size_t k = 1; k <= run.steps(); ++k) ts.times.push_back(static_cast<double>(k));
    io::write_timeseries_csv(out_path(c, c.output), ts);
  }
  write_curve(c, run.errors, "rmse");
  emit_report(c, json{{"rollout", io::rollout_json(run)}});
}

void run_horizon(const RunConfig& c) {
  const auto model = io::load_model(c.model);
  const auto ts = load_series(c, c.input);
  const auto [train, validation] = stability::split_train_validate(ts, c.split);
  const auto report = stability::estimate_horizon(model, train.state(train.size() - 1), validation,
                                                  model.context, c.epsilon);
  write_curve(c, report.error_curve, "error");
  emit_report(c, json{{"stability", io::stability_json(report)}});
}

std::size_t shape_pixels(const std::string& shape) {
  const auto x = shape.find('x');
  if (x == std::string::npos) {
    const auto n = io::parse_integer(shape);
    require(n && *n >= 0, ErrorCode::invalid_argument, "bad map shape '" + shape + "'");
    return static_cast<std::size_t>(*n);
  }
  const auto r = io::parse_integer(shape.substr(0, x));
  const auto k = io::parse_integer(shape.substr(x + 1));
  require(r && k && *r > 0 && *k > 0, ErrorCode::invalid_argument, "bad map shape '" + shape + "'");
  return static_cast<std::size_t>(*r * *k);
}

void run_count_params(const RunConfig& c) {
  stack::InputSchema schema;
  for (std::size_t s = 0; s < c.series_count; ++s) schema.series_names.push_back("s" + std::to_string(s + 1));
  for (std::size_t m = 0; m < c.map_shapes.size(); ++m)
    schema.context.push_back({"map" + std::to_string(m + 1), shape_pixels(c.map_shapes[m])});
  const auto counts = stack::count_free_parameters(
      schema, c.bricks, bricks::brick_kind_from_string(c.brick_kind), c.per_brick_scaling,
      c.series_length);
  emit_report(c, io::counts_json(counts));
}

void run_usle(const RunConfig& c) {
  require(!c.output.empty(), ErrorCode::invalid_argument, "usle needs --output");
  // NODATA is kept here; it propagates through the product
  auto read = [&](const std::string& p) {
    return io::parse_ascii_grid_text(io::read_file(p), std::filesystem::path(p).stem().string());
  };
  const auto a = avatar::usle_soil_loss(read(c.r_factor), read(c.k_factor), read(c.ls_factor),
                                        read(c.c_factor), read(c.p_factor));
  io::write_ascii_grid(out_path(c, c.output), a);
  std::size_t missing = 0;
  for (double v : a.values) missing += a.is_nodata(v) ? 1 : 0;
  emit_report(c, json{{"pixels", a.pixel_count()}, {"nodata_pixels", missing},
                      {"output", out_path(c, c.output)}});
}

int report_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  if (const char* dir = std::getenv("ECOAVATAR_OUTPUT_DIR")) c.output_dir = dir;
  if (const char* v = std::getenv("ECOAVATAR_VERBOSITY")) c.verbosity = std::atoi(v);

  CLI::App app{"Stacked one-step predictors for ecosystem time series"};
  app.require_subcommand(1);
  app.add_option("--seed", c.seed, "random seed")->capture_default_str();
  app.add_option("--output-dir", c.output_dir, "directory for relative output paths");
  app.add_option("--verbosity", c.verbosity, "0 silent, 1 progress on stderr");
  app.add_option("--report", c.report, "JSON report path (stdout when omitted)");

  auto* simulate = app.add_subcommand("simulate", "integrate the predator-prey model to CSV");
  simulate->add_option("--alpha", c.alpha)->capture_default_str();
  simulate->add_option("--beta", c.beta)->capture_default_str();
  simulate->add_option("--gamma", c.gamma)->capture_default_str();
  simulate->add_option("--delta", c.delta)->capture_default_str();
  simulate->add_option("--r0", c.r0)->capture_default_str();
  simulate->add_option("--f0", c.f0)->capture_default_str();
  simulate->add_option("--dt", c.dt)->capture_default_str();
  simulate->add_option("--duration", c.duration)->capture_default_str();
  simulate->add_option("--t0", c.t0)->capture_default_str();
  simulate->add_option("--stride", c.stride, "keep every n-th sample")->capture_default_str();
  simulate->add_option("--output,-o", c.output, "CSV path")->required();

  auto* fit = app.add_subcommand("fit-lv", "least-squares predator-prey parameters from CSV");
  fit->add_option("--input,-i", c.input)->required();
  fit->add_option("--prey", c.prey, "prey series name (default: first)");
  fit->add_option("--predators", c.predators, "predator series name (default: second)");
  fit->add_flag("--clamp-nonneg", c.clamp_nonneg);
  fit->add_flag("--interpolate-gaps", c.interpolate_gaps);
  fit->add_option("--output,-o", c.output, "parameter JSON path");

  auto add_stack_options = [&c](CLI::App* sub) {
    sub->add_option("--brick-kind", c.brick_kind, "linear|dsn|kernel|tensor|kernel-tensor")
        ->capture_default_str();
    sub->add_option("--bricks", c.bricks)->capture_default_str();
    sub->add_option("--activation", c.activation, "identity|step|sigmoid|relu")
        ->capture_default_str();
    sub->add_option("--dsn-mode", c.dsn_mode, "fixed-random|gradient-refined")
        ->capture_default_str();
    sub->add_option("--hidden-size", c.hidden_size)->capture_default_str();
    sub->add_option("--hidden-size2", c.hidden_size2)->capture_default_str();
    sub->add_option("--kernel-width", c.kernel_width)->capture_default_str();
    sub->add_option("--kernel-width2", c.kernel_width2)->capture_default_str();
    sub->add_option("--inverse", c.inverse, "exact-svd|truncated-svd|tikhonov")
        ->capture_default_str();
    sub->add_option("--lambda", c.lambda)->capture_default_str();
    sub->add_option("--rank", c.rank)->capture_default_str();
    sub->add_option("--threshold", c.threshold)->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "train a stacked model from CSV series and grids");
  train->add_option("--input,-i", c.input, "time-series CSV")->required();
  train->add_option("--map", c.maps, "ASCII grid context map (repeatable)");
  train->add_option("--nodata-policy", c.nodata_policy, "reject|mean-fill|constant-fill")
      ->capture_default_str();
  train->add_option("--fill-value", c.fill_value)->capture_default_str();
  train->add_flag("--interpolate-gaps", c.interpolate_gaps);
  add_stack_options(train);
  train->add_option("--rho-grid", c.rho_grid, "scaling search multipliers")->delimiter(',');
  train->add_flag("--per-brick", c.per_brick, "tune per-brick kernel scales");
  train->add_option("--max-passes", c.max_passes)->capture_default_str();
  train->add_option("--split", c.split, "training fraction for the scaling search")
      ->capture_default_str();
  train->add_option("--output,-o", c.output, "model file")->required();

  auto* predict = app.add_subcommand("predict", "one-step predictions");
  predict->add_option("--model,-m", c.model)->required();
  predict->add_option("--state", c.state, "current series values")->delimiter(',');
  predict->add_option("--input,-i", c.input, "CSV whose rows are current states");
  predict->add_flag("--interpolate-gaps", c.interpolate_gaps);
  predict->add_option("--output,-o", c.output, "prediction CSV");

  auto* roll = app.add_subcommand("rollout", "iterate the model on its own output");
  roll->add_option("--model,-m", c.model)->required();
  roll->add_option("--state", c.state, "start state")->delimiter(',');
  roll->add_option("--input,-i", c.input, "CSV whose last row is the start state");
  roll->add_option("--reference", c.reference, "CSV of true states for steps 1, 2, ...");
  roll->add_option("--steps", c.steps)->capture_default_str();
  roll->add_flag("--interpolate-gaps", c.interpolate_gaps);
  roll->add_option("--output,-o", c.output, "trajectory CSV");
  roll->add_option("--curve", c.curve, "per-step error CSV");

  auto* horizon = app.add_subcommand("horizon", "reliability horizon on a held-out segment");
  horizon->add_option("--model,-m", c.model)->required();
  horizon->add_option("--input,-i", c.input, "full time-series CSV")->required();
  horizon->add_option("--split", c.split, "training fraction")->capture_default_str();
  horizon->add_option("--epsilon", c.epsilon, "unreliability threshold")->capture_default_str();
  horizon->add_flag("--interpolate-gaps", c.interpolate_gaps);
  horizon->add_option("--curve", c.curve, "error curve CSV");

  auto* count = app.add_subcommand("count-params", "unknowns and data points of a stack");
  count->add_option("--series-count", c.series_count)->capture_default_str();
  count->add_option("--series-length", c.series_length)->capture_default_str();
  count->add_option("--map-shape", c.map_shapes, "RxC or pixel count (repeatable)");
  count->add_option("--bricks", c.bricks)->capture_default_str();
  count->add_option("--brick-kind", c.brick_kind)->capture_default_str();
  count->add_flag("--per-brick-scaling", c.per_brick_scaling);

  auto* usle = app.add_subcommand("usle", "soil loss A = R K LS C P over grids");
  usle->add_option("--r", c.r_factor)->required();
  usle->add_option("--k", c.k_factor)->required();
  usle->add_option("--ls", c.ls_factor)->required();
  usle->add_option("--c", c.c_factor)->required();
  usle->add_option("--p", c.p_factor)->required();
  usle->add_option("--output,-o", c.output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    c.command = sub->get_name();
    if (c.command == "simulate") run_simulate(c);
    else if (c.command == "fit-lv") run_fit_lv(c);
    else if (c.command == "train") run_train(c);
    else if (c.command == "predict") run_predict(c);
    else if (c.command == "rollout") run_rollout(c);
    else if (c.command == "horizon") run_horizon(c);
    else if (c.command == "count-params") run_count_params(c);
    else if (c.command == "usle") run_usle(c);
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.code())), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io_error", e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
