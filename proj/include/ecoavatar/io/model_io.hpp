#pragma once

// JSON persistence for trained stacks and JSON views of the reports.
// Doubles are written in shortest round-trip form; non-finite values are
// written as the strings "inf", "-inf" and "nan".

#include <json.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ecoavatar/ecolv.hpp"
#include "ecoavatar/io/format.hpp"
#include "ecoavatar/scaling_search.hpp"
#include "ecoavatar/stability.hpp"
#include "ecoavatar/stack.hpp"

namespace ecoavatar::io {

using nlohmann::json;

inline constexpr int model_format_version = 1;
inline constexpr const char* model_format_name = "ecoavatar-model";

// ---------------------------------------------------------------------------
// Scalars, vectors and matrices

inline json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline double to_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(ErrorCode::parse_error, "expected a number, got " + j.dump());
}

inline json numbers(const double* data, std::size_t n) {
  json arr = json::array();
  for (std::size_t i = 0; i < n; ++i) arr.push_back(number(data[i]));
  return arr;
}

inline json numbers(const std::vector<double>& v) { return numbers(v.data(), v.size()); }

inline std::vector<double> to_numbers(const json& j) {
  require(j.is_array(), ErrorCode::parse_error, "expected a number array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(to_number(x));
  return out;
}

/// Column-major {"rows", "cols", "data"}.
inline json matrix_json(const Matrix& m) {
  return json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", numbers(m.data(), static_cast<std::size_t>(m.size()))}};
}

inline Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = to_numbers(j.at("data"));
  require(rows >= 0 && cols >= 0 && static_cast<std::size_t>(rows * cols) == data.size(),
          ErrorCode::parse_error, "matrix shape does not match its data");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

inline json vector_json(const Vector& v) {
  return numbers(v.data(), static_cast<std::size_t>(v.size()));
}

inline Vector vector_from_json(const json& j) {
  const auto data = to_numbers(j);
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

// ---------------------------------------------------------------------------
// Configuration pieces

inline json inverse_json(const numlin::InverseConfig& c) {
  return json{{"mode", numlin::to_string(c.mode)},
              {"rank", c.rank},
              {"threshold", number(c.threshold)},
              {"lambda", number(c.lambda)}};
}

inline numlin::InverseConfig inverse_from_json(const json& j) {
  numlin::InverseConfig c;
  c.mode = numlin::inverse_mode_from_string(j.at("mode").get<std::string>());
  c.rank = j.at("rank").get<std::size_t>();
  c.threshold = to_number(j.at("threshold"));
  c.lambda = to_number(j.at("lambda"));
  return c;
}

inline json brick_config_json(const stack::BrickConfig& c) {
  return json{{"kind", bricks::to_string(c.kind)},
              {"inverse", inverse_json(c.inverse)},
              {"activation", bricks::to_string(c.activation.kind)},
              {"dsn_mode", bricks::to_string(c.dsn_mode)},
              {"hidden_size", c.hidden_size},
              {"hidden_size2", c.hidden_size2},
              {"kernel_width", number(c.kernel_width)},
              {"kernel_width2", number(c.kernel_width2)}};
}

inline stack::BrickConfig brick_config_from_json(const json& j) {
  stack::BrickConfig c;
  c.kind = bricks::brick_kind_from_string(j.at("kind").get<std::string>());
  c.inverse = inverse_from_json(j.at("inverse"));
  c.activation.kind = bricks::activation_from_string(j.at("activation").get<std::string>());
  c.dsn_mode = bricks::dsn_mode_from_string(j.at("dsn_mode").get<std::string>());
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.hidden_size2 = j.at("hidden_size2").get<std::size_t>();
  c.kernel_width = to_number(j.at("kernel_width"));
  c.kernel_width2 = to_number(j.at("kernel_width2"));
  return c;
}

inline json schema_json(const stack::InputSchema& s) {
  json ctx = json::array();
  for (const auto& c : s.context) ctx.push_back(json{{"name", c.name}, {"pixels", c.pixels}});
  return json{{"series", s.series_names}, {"context", ctx}};
}

inline stack::InputSchema schema_from_json(const json& j) {
  stack::InputSchema s;
  s.series_names = j.at("series").get<std::vector<std::string>>();
  for (const auto& c : j.at("context")) {
    s.context.push_back({c.at("name").get<std::string>(), c.at("pixels").get<std::size_t>()});
  }
  return s;
}

inline json scaling_json(const avatar::ScalingSet& s) {
  json per_brick = json::array();
  for (const auto& brick : s.brick_rho) {
    json kernels = json::array();
    for (const auto& k : brick) kernels.push_back(numbers(k));
    per_brick.push_back(kernels);
  }
  return json{{"offset", numbers(s.offset)}, {"rho", numbers(s.rho)}, {"brick_rho", per_brick}};
}

inline avatar::ScalingSet scaling_from_json(const json& j) {
  avatar::ScalingSet s;
  s.offset = to_numbers(j.at("offset"));
  s.rho = to_numbers(j.at("rho"));
  for (const auto& brick : j.at("brick_rho")) {
    std::vector<std::vector<double>> kernels;
    for (const auto& k : brick) kernels.push_back(to_numbers(k));
    s.brick_rho.push_back(std::move(kernels));
  }
  return s;
}

inline json kernel_spec_json(const bricks::KernelSpec& spec) {
  json arr = json::array();
  for (const auto& s : spec.slices) {
    arr.push_back(json{{"begin", s.begin}, {"end", s.end}, {"rho", number(s.rho)}});
  }
  return arr;
}

inline bricks::KernelSpec kernel_spec_from_json(const json& j) {
  bricks::KernelSpec spec;
  for (const auto& s : j) {
    spec.slices.push_back(
        {s.at("begin").get<std::size_t>(), s.at("end").get<std::size_t>(), to_number(s.at("rho"))});
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Bricks

inline json brick_json(const bricks::Brick& brick) {
  using namespace bricks;
  json j{{"kind", to_string(kind_of(brick))}};
  std::visit(
      [&j](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, LinearBrick>) {
          j["map"] = matrix_json(b.map);
        } else if constexpr (std::is_same_v<T, DsnBrick>) {
          j["hidden"] = matrix_json(b.hidden);
          j["output"] = matrix_json(b.output);
          j["activation"] = to_string(b.activation.kind);
          j["refinement"] = json{{"iterations", b.refinement.iterations},
                                 {"converged", b.refinement.converged},
                                 {"objective_trace", numbers(b.refinement.objective_trace)}};
        } else if constexpr (std::is_same_v<T, KernelBrick>) {
          j["inputs"] = matrix_json(b.inputs);
          j["dual"] = matrix_json(b.dual);
          j["spec"] = kernel_spec_json(b.spec);
          j["lambda"] = number(b.lambda);
        } else if constexpr (std::is_same_v<T, TensorBrick>) {
          j["hidden1"] = matrix_json(b.hidden1);
          j["hidden2"] = matrix_json(b.hidden2);
          j["output"] = matrix_json(b.output);
          j["activation"] = to_string(b.activation.kind);
        } else {
          j["inputs"] = matrix_json(b.inputs);
          j["dual"] = matrix_json(b.dual);
          j["spec1"] = kernel_spec_json(b.spec1);
          j["spec2"] = kernel_spec_json(b.spec2);
          j["lambda"] = number(b.lambda);
        }
      },
      brick);
  return j;
}

inline bricks::Brick brick_from_json(const json& j) {
  using namespace bricks;
  switch (brick_kind_from_string(j.at("kind").get<std::string>())) {
    case BrickKind::linear:
      return LinearBrick{matrix_from_json(j.at("map"))};
    case BrickKind::dsn: {
      DsnBrick b;
      b.hidden = matrix_from_json(j.at("hidden"));
      b.output = matrix_from_json(j.at("output"));
      b.activation.kind = activation_from_string(j.at("activation").get<std::string>());
      const auto& r = j.at("refinement");
      b.refinement.iterations = r.at("iterations").get<int>();
      b.refinement.converged = r.at("converged").get<bool>();
      b.refinement.objective_trace = to_numbers(r.at("objective_trace"));
      return b;
    }
    case BrickKind::kernel:
      return KernelBrick{matrix_from_json(j.at("inputs")), matrix_from_json(j.at("dual")),
                         kernel_spec_from_json(j.at("spec")), to_number(j.at("lambda"))};
    case BrickKind::tensor: {
      TensorBrick b;
      b.hidden1 = matrix_from_json(j.at("hidden1"));
      b.hidden2 = matrix_from_json(j.at("hidden2"));
      b.output = matrix_from_json(j.at("output"));
      b.activation.kind = activation_from_string(j.at("activation").get<std::string>());
      return b;
    }
    case BrickKind::kernel_tensor:
      return KernelTensorBrick{matrix_from_json(j.at("inputs")), matrix_from_json(j.at("dual")),
                               kernel_spec_from_json(j.at("spec1")),
                               kernel_spec_from_json(j.at("spec2")), to_number(j.at("lambda"))};
  }
  fail(ErrorCode::parse_error, "unknown brick kind");
}

// ---------------------------------------------------------------------------
// Stacked model

inline json model_json(const stack::StackedModel& m) {
  json bricks_json = json::array();
  for (std::size_t k = 0; k < m.bricks.size(); ++k) {
    json b = brick_json(m.bricks[k]);
    b["config"] = brick_config_json(m.configs.at(k));
    bricks_json.push_back(std::move(b));
  }
  return json{{"format", model_format_name},
              {"format_version", model_format_version},
              {"seed", m.seed},
              {"schema", schema_json(m.schema)},
              {"scaling", scaling_json(m.scaling)},
              {"training_max_abs", number(m.training_max_abs)},
              {"context", vector_json(m.context)},
              {"bricks", bricks_json}};
}

inline stack::StackedModel model_from_json(const json& j) {
  require(j.value("format", std::string()) == model_format_name, ErrorCode::parse_error,
          "not an ecoavatar model file");
  const int version = j.at("format_version").get<int>();
  require(version == model_format_version, ErrorCode::parse_error,
          "unsupported model format version " + std::to_string(version));
  stack::StackedModel m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.schema = schema_from_json(j.at("schema"));
  m.scaling = scaling_from_json(j.at("scaling"));
  m.scaling.validate(m.schema.dataset_count());
  m.training_max_abs = to_number(j.at("training_max_abs"));
  m.context = vector_from_json(j.at("context"));
  require(static_cast<std::size_t>(m.context.size()) == m.schema.context_length(),
          ErrorCode::parse_error, "model context does not match its schema");
  for (const auto& b : j.at("bricks")) {
    m.configs.push_back(brick_config_from_json(b.at("config")));
    m.bricks.push_back(brick_from_json(b));
  }
  require(!m.bricks.empty(), ErrorCode::parse_error, "model has no bricks");
  for (std::size_t k = 0; k < m.bricks.size(); ++k) {
    require(static_cast<std::size_t>(bricks::input_dim(m.bricks[k])) ==
                    m.schema.brick_input_length(k + 1) &&
                static_cast<std::size_t>(bricks::output_dim(m.bricks[k])) ==
                    m.schema.series_count(),
            ErrorCode::parse_error,
            "brick " + std::to_string(k + 1) + " dimensions disagree with the schema");
  }
  return m;
}

inline std::string format_model(const stack::StackedModel& m) { return model_json(m).dump(1) + "\n"; }

inline stack::StackedModel parse_model_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const std::string& path, const stack::StackedModel& m) {
  write_file(path, format_model(m));
}

inline stack::StackedModel load_model(const std::string& path) {
  try {
    return parse_model_text(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json lv_params_json(const ecolv::LVParams& p) {
  return json{{"alpha", number(p.alpha)},
              {"beta", number(p.beta)},
              {"gamma", number(p.gamma)},
              {"delta", number(p.delta)},
              {"clamped", p.clamped}};
}

inline json counts_json(const stack::ParameterCounts& c) {
  return json{{"datasets", c.datasets},
              {"kernels_per_brick", c.kernels_per_brick},
              {"scaling_factors", c.scaling_factors},
              {"ridge_coefficients", c.ridge_coefficients},
              {"total_unknowns", c.total_unknowns},
              {"series_data_points", c.series_data_points},
              {"context_data_points", c.context_data_points},
              {"total_data_points", c.total_data_points}};
}

inline json stability_json(const stability::StabilityReport& r) {
  json j{{"horizon", r.horizon},
         {"validation_length", r.validation_length},
         {"epsilon", number(r.epsilon)},
         {"diverged", r.diverged},
         {"error_curve", numbers(r.error_curve)}};
  j["spectral_radius"] = r.spectral_radius ? number(*r.spectral_radius) : json(nullptr);
  return j;
}

inline json rollout_json(const stability::RolloutResult& r) {
  json j{{"steps", r.steps()}, {"diverged", r.diverged}, {"errors", numbers(r.errors)}};
  j["divergence_step"] = r.divergence_step ? json(*r.divergence_step) : json(nullptr);
  return j;
}

inline json scaling_search_json(const avatar::ScalingSearchResult& r) {
  return json{{"scaling", scaling_json(r.scaling)},
              {"lambdas", numbers(r.lambdas)},
              {"loss_trace", numbers(r.loss_trace)},
              {"evaluations", r.evaluations},
              {"passes", r.passes}};
}

}  // namespace ecoavatar::io
