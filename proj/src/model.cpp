#include "gains/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

namespace gains {

using json = nlohmann::json;

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Linear: return "linear";
    case LayerKind::Relu: return "relu";
    case LayerKind::ConcatTimeLinear: return "concat_time_linear";
  }
  return "?";
}

Layer Layer::linear(Matrix weight, Vector bias) {
  return Layer(LayerKind::Linear, AffineMap(std::move(weight), std::move(bias)), 0);
}

Layer Layer::relu(Index dim) {
  if (dim <= 0) throw DimensionError("relu layer needs a positive dimension");
  return Layer(LayerKind::Relu, AffineMap(), dim);
}

Layer Layer::concat_time_linear(Matrix weight, Vector bias) {
  if (weight.cols() < 2) {
    throw DimensionError("concat_time_linear weight needs at least one state column plus time");
  }
  return Layer(LayerKind::ConcatTimeLinear, AffineMap(std::move(weight), std::move(bias)), 0);
}

Index Layer::in_dim() const {
  switch (kind_) {
    case LayerKind::Linear: return map_.cols();
    case LayerKind::Relu: return relu_dim_;
    case LayerKind::ConcatTimeLinear: return map_.cols() - 1;
  }
  return 0;
}

Index Layer::out_dim() const { return kind_ == LayerKind::Relu ? relu_dim_ : map_.rows(); }

Vector Layer::eval(const Vector& x, std::optional<double> time) const {
  if (x.size() != in_dim()) {
    throw DimensionError(to_string(kind_) + " layer expects " + std::to_string(in_dim()) +
                         " inputs, got " + std::to_string(x.size()));
  }
  switch (kind_) {
    case LayerKind::Relu: {
      Vector y(x.size());
      for (Index i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      return y;
    }
    case LayerKind::Linear: return map_.apply(x);
    case LayerKind::ConcatTimeLinear:
      if (!time) throw Error("concat_time_linear layer evaluated without a time value");
      return at_time(*time).apply(x);
  }
  return x;
}

AffineMap Layer::at_time(double t) const {
  if (kind_ != LayerKind::ConcatTimeLinear) return map_;
  const Index d = map_.cols() - 1;
  Vector offset(map_.rows());
  for (Index r = 0; r < map_.rows(); ++r) offset[r] = map_.offset()[r] + map_.coeffs()(r, d) * t;
  return AffineMap(map_.coeffs().leftCols(d), std::move(offset));
}

Index validate_stack(const LayerStack& layers, Index input_dim, const std::string& what) {
  Index dim = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in_dim() != dim) {
      throw DimensionError("invariant violated: " + what + "[" + std::to_string(i) + "] expects " +
                           std::to_string(layers[i].in_dim()) + " inputs but receives " +
                           std::to_string(dim));
    }
    dim = layers[i].out_dim();
  }
  return dim;
}

bool stack_uses_time(const LayerStack& layers) {
  for (const auto& l : layers) {
    if (l.uses_time()) return true;
  }
  return false;
}

Vector eval_layers(const LayerStack& layers, const Vector& input, std::optional<double> time) {
  if (stack_uses_time(layers) && !time) {
    throw Error("missing time for a stack containing concat_time_linear layers");
  }
  Vector x = input;
  for (const auto& layer : layers) x = layer.eval(x, time);
  return x;
}

Dynamics::Dynamics(LayerStack ls, Index dim) : layers(std::move(ls)), state_dim(dim) {
  if (layers.empty()) throw Error("invariant violated: dynamics has no layers");
  if (layers.front().kind() == LayerKind::Relu) {
    throw Error("invariant violated: dynamics must start with a linear or concat_time_linear layer");
  }
  const Index out = validate_stack(layers, state_dim, "dynamics.layers");
  if (out != state_dim) {
    throw DimensionError("invariant violated: dynamics output dim (" + std::to_string(out) +
                         ") != state dim (" + std::to_string(state_dim) + ")");
  }
}

Vector Dynamics::eval(const Vector& z, double t) const { return eval_layers(layers, z, t); }

VectorField Dynamics::field() const {
  auto self = std::make_shared<const Dynamics>(*this);
  return [self](double t, const Vector& z) { return self->eval(z, t); };
}

Index ModelSpec::input_dim() const {
  return encoder.empty() ? dynamics.state_dim : encoder.front().in_dim();
}

Index ModelSpec::output_dim() const {
  return decoder.empty() ? dynamics.state_dim : decoder.back().out_dim();
}

void ModelSpec::validate() const {
  solver.validate();
  if (dynamics.layers.empty()) throw Error("invariant violated: dynamics has no layers");
  Dynamics check(dynamics.layers, dynamics.state_dim);
  (void)check;
  const Index enc_out = validate_stack(encoder, input_dim(), "encoder");
  if (enc_out != dynamics.state_dim) {
    throw DimensionError("invariant violated: encoder output dim (" + std::to_string(enc_out) +
                         ") != dynamics state dim (" + std::to_string(dynamics.state_dim) + ")");
  }
  if (stack_uses_time(encoder) || stack_uses_time(decoder)) {
    throw Error("invariant violated: concat_time_linear is only allowed inside dynamics");
  }
  validate_stack(decoder, dynamics.state_dim, "decoder");
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ModelFormatError(path + ": " + msg);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ModelFormatError("missing " + path + "." + key);
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

Matrix parse_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) fail(path + "[0]", "expected a non-empty array");
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) {
      fail(rp, "expected " + std::to_string(cols) + " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) =
          as_number(j[r][c], rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

Vector parse_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Index>(i)] = as_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

LayerStack parse_stack(const json& j, const std::string& path, std::optional<Index> input_dim) {
  if (!j.is_array()) fail(path, "expected an array of layers");
  LayerStack layers;
  std::optional<Index> dim = input_dim;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string lp = path + "[" + std::to_string(i) + "]";
    const json& entry = j[i];
    if (!entry.is_object()) fail(lp, "expected a layer object");
    const json& kind = field(entry, "kind", lp);
    if (!kind.is_string()) fail(lp + ".kind", "expected a string");
    const std::string k = kind.get<std::string>();
    if (k == "relu") {
      Index n = 0;
      if (auto it = entry.find("dim"); it != entry.end()) {
        n = as_int(*it, lp + ".dim");
      } else if (dim) {
        n = *dim;
      } else {
        fail(lp, "relu layer needs a \"dim\" when its input size cannot be inferred");
      }
      layers.push_back(Layer::relu(n));
    } else if (k == "linear" || k == "concat_time_linear") {
      Matrix w = parse_matrix(field(entry, "weight", lp), lp + ".weight");
      Vector b = parse_vector(field(entry, "bias", lp), lp + ".bias");
      if (b.size() != w.rows()) {
        fail(lp + ".bias", "length " + std::to_string(b.size()) + " does not match " +
                               std::to_string(w.rows()) + " weight rows");
      }
      layers.push_back(k == "linear" ? Layer::linear(std::move(w), std::move(b))
                                     : Layer::concat_time_linear(std::move(w), std::move(b)));
    } else {
      fail(lp + ".kind", "unknown layer kind \"" + k + "\"");
    }
    dim = layers.back().out_dim();
  }
  return layers;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json stack_json(const LayerStack& layers) {
  json arr = json::array();
  for (const auto& l : layers) {
    json entry;
    entry["kind"] = to_string(l.kind());
    if (l.kind() == LayerKind::Relu) {
      entry["dim"] = l.out_dim();
    } else {
      entry["weight"] = matrix_json(l.map().coeffs());
      entry["bias"] = vector_json(l.map().offset());
    }
    arr.push_back(std::move(entry));
  }
  return arr;
}

SolverConfig parse_solver(const json& j) {
  const std::string path = "solver_cfg";
  if (!j.is_object()) fail(path, "expected an object");
  SolverConfig cfg;
  cfg.alpha = as_int(field(j, "alpha", path), path + ".alpha");
  cfg.tau = as_number(field(j, "tau", path), path + ".tau");
  cfg.h_min = as_number(field(j, "h_min", path), path + ".h_min");
  cfg.eta = as_number(field(j, "eta", path), path + ".eta");
  cfg.t_end = as_number(field(j, "t_end", path), path + ".t_end");
  cfg.order = as_int(field(j, "order", path), path + ".order");
  cfg.max_rejections_after_clip =
      as_int(field(j, "max_rejections_after_clip", path), path + ".max_rejections_after_clip");
  const json& tab = field(j, "tableau", path);
  if (!tab.is_string()) fail(path + ".tableau", "expected a string");
  try {
    cfg.tableau = tableau_from_string(tab.get<std::string>());
  } catch (const Error& e) {
    fail(path + ".tableau", e.what());
  }
  if (auto it = j.find("beta"); it != j.end()) cfg.beta = as_number(*it, path + ".beta");
  if (auto it = j.find("max_steps"); it != j.end()) {
    if (!it->is_number_integer()) fail(path + ".max_steps", "expected an integer");
    cfg.max_steps = it->get<std::int64_t>();
  }
  return cfg;
}

json solver_json(const SolverConfig& cfg) {
  json j;
  j["alpha"] = cfg.alpha;
  j["tau"] = cfg.tau;
  j["h_min"] = cfg.h_min;
  j["eta"] = cfg.eta;
  j["beta"] = cfg.beta;
  j["t_end"] = cfg.t_end;
  j["order"] = cfg.order;
  j["tableau"] = to_string(cfg.tableau);
  j["max_rejections_after_clip"] = cfg.max_rejections_after_clip;
  if (cfg.max_steps) j["max_steps"] = *cfg.max_steps;
  return j;
}

}  // namespace

ModelSpec model_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelFormatError(std::string("malformed model JSON: ") + e.what());
  }
  if (!root.is_object()) throw ModelFormatError("model: expected a JSON object");

  ModelSpec model;
  model.solver = parse_solver(field(root, "solver", "model"));

  const json& dyn = field(root, "dynamics", "model");
  if (!dyn.is_object()) fail("dynamics", "expected an object");
  LayerStack dyn_layers = parse_stack(field(dyn, "layers", "dynamics"), "dynamics.layers", std::nullopt);
  if (dyn_layers.empty()) fail("dynamics.layers", "dynamics needs at least one layer");
  const Index state_dim = dyn_layers.front().in_dim();
  model.dynamics = Dynamics(std::move(dyn_layers), state_dim);

  if (auto it = root.find("encoder"); it != root.end()) {
    model.encoder = parse_stack(*it, "encoder", std::nullopt);
  }
  if (auto it = root.find("decoder"); it != root.end()) {
    model.decoder = parse_stack(*it, "decoder", state_dim);
  }

  const json& out = field(root, "output", "model");
  if (!out.is_string()) fail("output", "expected \"classification\" or \"regression\"");
  const std::string role = out.get<std::string>();
  if (role == "classification") {
    model.output = OutputRole::Classification;
  } else if (role == "regression") {
    model.output = OutputRole::Regression;
  } else {
    fail("output", "expected \"classification\" or \"regression\", got \"" + role + "\"");
  }

  model.validate();
  return model;
}

std::string model_to_json(const ModelSpec& model) {
  json root;
  root["encoder"] = stack_json(model.encoder);
  root["dynamics"] = json{{"layers", stack_json(model.dynamics.layers)}};
  root["decoder"] = stack_json(model.decoder);
  root["solver"] = solver_json(model.solver);
  root["output"] = model.output == OutputRole::Classification ? "classification" : "regression";
  return root.dump(2) + "\n";
}

ModelSpec load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

void save_model(const ModelSpec& model, const std::filesystem::path& path) {
  model.validate();
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file " + path.string());
  out << model_to_json(model);
}

SolverConfig default_test_solver() {
  SolverConfig cfg;
  cfg.alpha = 2;
  cfg.tau = 0.005;
  cfg.h_min = 1.0 / 64;
  cfg.eta = 0.25;
  cfg.t_end = 1.0;
  return cfg;
}

ModelSpec random_model(const RandomModelOptions& opts, std::uint64_t seed) {
  if (opts.input_dim < 1 || opts.state_dim < 1 || opts.hidden_dim < 1 || opts.output_dim < 1) {
    throw Error("random_model: all dims must be positive");
  }
  std::mt19937_64 rng(seed);
  auto dense = [&](Index out, Index in, double scale) {
    const double s = scale / std::sqrt(static_cast<double>(in));
    Matrix w(out, in);
    Vector b(out);
    for (Index r = 0; r < out; ++r) {
      for (Index c = 0; c < in; ++c) w(r, c) = uniform(rng, -s, s);
      b[r] = uniform(rng, -0.1, 0.1);
    }
    return std::pair{w, b};
  };
  ModelSpec m;
  m.output = opts.output;
  m.solver = opts.solver;
  auto [we, be] = dense(opts.state_dim, opts.input_dim, 1.0);
  m.encoder.push_back(Layer::linear(we, be));
  auto [w1, b1] = dense(opts.hidden_dim, opts.state_dim + 1, 1.0);
  auto [w2, b2] = dense(opts.state_dim, opts.hidden_dim, opts.dynamics_scale);
  m.dynamics = Dynamics({Layer::concat_time_linear(w1, b1), Layer::relu(opts.hidden_dim),
                         Layer::linear(w2, b2)},
                        opts.state_dim);
  const Index out = opts.output == OutputRole::Regression ? opts.input_dim : opts.output_dim;
  auto [wd, bd] = dense(out, opts.state_dim, 1.0);
  m.decoder.push_back(Layer::linear(wd, bd));
  m.validate();
  return m;
}

}  // namespace gains
