#include "gains/cli.hpp"

#include "gains/bench.hpp"
#include "gains/lcap.hpp"
#include "gains/model.hpp"
#include "gains/parallel.hpp"
#include "gains/solver.hpp"
#include "gains/trajectory_graph.hpp"
#include "gains/verifier.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gains {

namespace {

// Bad user input: reported with exit code 3.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw UsageError("cannot parse " + what + " '" + s + "' as a number");
  }
  return v;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : split(s, ',')) out.push_back(parse_number(f, what));
  return out;
}

std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelSpec open_model(const std::string& path) {
  try {
    return load_model(path);
  } catch (const Error& e) {
    throw UsageError(std::string("model error: ") + e.what());
  }
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
}

RobustnessSpec parse_spec(const std::string& text, double eps) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--spec must be cls:TARGET or reg:NU,DELTA");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  if (kind == "cls") {
    const double t = parse_number(rest, "target");
    if (t < 0 || t != static_cast<double>(static_cast<Index>(t))) {
      throw UsageError("target must be a non-negative integer");
    }
    return RobustnessSpec::cls(static_cast<Index>(t), eps);
  }
  if (kind == "reg") {
    const auto v = parse_list(rest, "reg spec");
    if (v.size() != 2) throw UsageError("--spec reg needs NU,DELTA");
    return RobustnessSpec::reg(v[0], v[1], eps);
  }
  throw UsageError("unknown spec kind '" + kind + "'");
}

void setup_logging(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("gains", sink);
  logger->set_pattern("[%l] %v");
  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("GAINS_LOG")) level = spdlog::level::from_str(env);
  logger->set_level(level);
  spdlog::set_default_logger(logger);
}

int worst_exit(const std::vector<Verdict>& verdicts) {
  int code = kExitOk;
  for (const auto& v : verdicts) {
    if (v.status == Status::Falsified) return kExitFalsified;
    if (v.status == Status::Unknown) code = kExitUnknown;
  }
  return code;
}

std::string lcap_json(const LcapInstance& inst, int d, int m, std::uint64_t seed) {
  using nlohmann::json;
  auto row = [](const AffineMap& a) {
    json coeffs = json::array();
    for (Index i = 0; i < a.cols(); ++i) coeffs.push_back(a.coeffs()(0, i));
    return json{{"coeffs", coeffs}, {"offset", a.offset()[0]}};
  };
  json j;
  j["d"] = d;
  j["m"] = m;
  j["seed"] = seed;
  j["lower"] = std::vector<double>(inst.set.box.lower().begin(), inst.set.box.lower().end());
  j["upper"] = std::vector<double>(inst.set.box.upper().begin(), inst.set.box.upper().end());
  j["relation"] = row(inst.relation);
  j["constraints"] = json::array();
  for (const auto& c : inst.set.constraints) j["constraints"].push_back(row(c));
  j["samples_used"] = inst.samples_used;
  j["mean_pair_cosine"] = inst.mean_pair_cosine;
  j["curls"] = row(curls_merge(inst.set));
  return j.dump(2) + "\n";
}

}  // namespace

std::vector<InputRow> parse_input_csv(const std::string& text) {
  std::vector<InputRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, ',');
    InputRow r;
    if (fields.front().rfind("mask=", 0) == 0) {
      for (char c : fields.front().substr(5)) {
        if (c != '0' && c != '1') throw UsageError("line " + std::to_string(lineno) + ": bad mask");
        r.mask.push_back(c == '1');
      }
      fields.erase(fields.begin());
    }
    r.x.resize(static_cast<Index>(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      r.x[static_cast<Index>(i)] = parse_number(fields[i], "line " + std::to_string(lineno) + " value");
    }
    if (!r.mask.empty() && r.mask.size() != fields.size()) {
      throw UsageError("line " + std::to_string(lineno) + ": mask length differs from row length");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw UsageError("input CSV has no rows");
  return rows;
}

std::vector<InputRow> load_input_csv(const std::string& path) {
  return parse_input_csv(read_file(path, "input file"));
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  setup_logging(err);
  CLI::App app{"Certified robustness verifier for neural ODEs", "gains"};
  app.require_subcommand(1);
  std::size_t workers = default_workers();
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  std::string model_path, input_path, out_path, spec_text, method_text = "gains", clamp_text;
  double epsilon = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;

  auto* verify_cmd = app.add_subcommand("verify", "Verify robustness of every input row");
  verify_cmd->add_option("--model", model_path)->required();
  verify_cmd->add_option("--input", input_path)->required();
  verify_cmd->add_option("--epsilon", epsilon)->required();
  verify_cmd->add_option("--spec", spec_text, "cls:TARGET or reg:NU,DELTA")->required();
  verify_cmd->add_option("--method", method_text)->check(CLI::IsMember({"gains", "box", "linear"}));
  verify_cmd->add_option("--samples", samples, "Random counterexample search budget");
  verify_cmd->add_option("--seed", seed);
  verify_cmd->add_option("--clamp", clamp_text, "LO,HI input range");
  verify_cmd->add_option("--out", out_path, "Result CSV (stdout when absent)");

  std::string solver_name = "cas";
  auto* solve_cmd = app.add_subcommand("solve", "Concrete forward pass with the trajectory listing");
  solve_cmd->add_option("--model", model_path)->required();
  solve_cmd->add_option("--input", input_path)->required();
  solve_cmd->add_option("--solver", solver_name)->check(CLI::IsMember({"cas", "as"}));

  std::string dot_path, stub, domain = "box";
  auto* graph_cmd = app.add_subcommand("graph", "Export the trajectory graph of the first input row");
  graph_cmd->add_option("--model", model_path);
  graph_cmd->add_option("--input", input_path);
  graph_cmd->add_option("--epsilon", epsilon);
  graph_cmd->add_option("--domain", domain)->check(CLI::IsMember({"box", "linear"}));
  graph_cmd->add_option("--stub", stub, "Scripted example instead of a model")
      ->check(CLI::IsMember({"splitting"}));
  graph_cmd->add_option("--dot", dot_path, "DOT output (stdout when absent)");

  auto* bench_cmd = app.add_subcommand("bench", "Benchmarks");
  bench_cmd->require_subcommand(1);
  std::size_t states = 200;
  auto* cas_cmd = bench_cmd->add_subcommand("cas-vs-as", "Controlled vs standard adaptive solver");
  cas_cmd->add_option("--states", states)->check(CLI::PositiveNumber);
  cas_cmd->add_option("--seed", seed);
  cas_cmd->add_option("--out", out_path);
  std::string dims_text = "5,10,25";
  int m = 4;
  std::size_t seeds = 30;
  bool no_timings = false;
  auto* lcap_cmd = bench_cmd->add_subcommand("lcap", "CURLS against the exact aggregation");
  lcap_cmd->add_option("--dims", dims_text);
  lcap_cmd->add_option("--m", m)->check(CLI::PositiveNumber);
  lcap_cmd->add_option("--seeds", seeds)->check(CLI::PositiveNumber);
  lcap_cmd->add_option("--seed", seed, "First seed");
  lcap_cmd->add_flag("--no-timings", no_timings, "Leave timing columns empty");
  lcap_cmd->add_option("--out", out_path);

  auto* gen_cmd = app.add_subcommand("gen", "Generate test inputs");
  gen_cmd->require_subcommand(1);
  std::string gen_dims = "4,4,8,3", role = "classification";
  auto* gen_model = gen_cmd->add_subcommand("model", "Random small model");
  gen_model->add_option("--dims", gen_dims, "INPUT,STATE,HIDDEN,OUTPUT");
  gen_model->add_option("--output", role)->check(CLI::IsMember({"classification", "regression"}));
  gen_model->add_option("--seed", seed);
  gen_model->add_option("--out", out_path);
  int d = 5;
  auto* gen_lcap = gen_cmd->add_subcommand("lcap", "Random aggregation instance");
  gen_lcap->add_option("--d", d)->check(CLI::PositiveNumber);
  gen_lcap->add_option("--m", m)->check(CLI::PositiveNumber);
  gen_lcap->add_option("--seed", seed);
  gen_lcap->add_option("--out", out_path);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (verify_cmd->parsed()) {
      const ModelSpec model = open_model(model_path);
      const auto rows = load_input_csv(input_path);
      RobustnessSpec spec = parse_spec(spec_text, epsilon);
      if (!clamp_text.empty()) {
        const auto c = parse_list(clamp_text, "clamp");
        if (c.size() != 2) throw UsageError("--clamp needs LO,HI");
        spec.clamp = Interval{c[0], c[1]};
      }
      try {
        spec.validate();
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const bool cls = spec.classification.has_value();
      if (cls != (model.output == OutputRole::Classification)) {
        throw UsageError("spec kind does not match the model output role");
      }
      for (const auto& r : rows) {
        if (r.x.size() != model.input_dim()) {
          throw UsageError("input row has " + std::to_string(r.x.size()) + " values, model expects " +
                           std::to_string(model.input_dim()));
        }
      }
      const Method method = method_from_string(method_text);
      std::vector<Verdict> verdicts(rows.size());
      parallel_for(rows.size(), workers, [&](std::size_t i) {
        RobustnessSpec s = spec;
        if (s.regression && !rows[i].mask.empty()) s.regression->mask = rows[i].mask;
        VerifyOptions opts{samples, seed + i};
        verdicts[i] = verify(model, rows[i].x, s, method, opts);
        spdlog::info("input {}: {} ({})", i, to_string(verdicts[i].status), verdicts[i].diagnostic);
      });
      std::ostringstream csv;
      write_result_header(csv);
      for (std::size_t i = 0; i < rows.size(); ++i) write_result_row(csv, i, method, epsilon, verdicts[i]);
      write_text(out_path, csv.str(), out);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (verdicts[i].witness) {
          std::ostringstream w;
          for (Index k = 0; k < verdicts[i].witness->size(); ++k) {
            w << (k ? "," : "") << format_double((*verdicts[i].witness)[k]);
          }
          err << "input " << i << " falsified by " << w.str() << "\n";
        }
      }
      return worst_exit(verdicts);
    }

    if (solve_cmd->parsed()) {
      const ModelSpec model = open_model(model_path);
      const auto rows = load_input_csv(input_path);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].x.size() != model.input_dim()) throw UsageError("input row has the wrong length");
        auto vec = [](const Vector& v) {
          std::string s;
          for (Index k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_double(v[k]);
          return s;
        };
        const Vector z0 = eval_layers(model.encoder, rows[i].x, std::nullopt);
        out << "input " << i << "\n";
        if (solver_name == "cas") {
          const CasResult r = cas_integrate(model.dynamics, z0, model.solver);
          for (std::size_t k = 0; k < r.trajectory.decisions.size(); ++k) {
            out << "  " << r.trajectory.keys[k].to_string() << " "
                << decision_letter(r.trajectory.decisions[k]) << "\n";
          }
          out << "  " << r.trajectory.keys.back().to_string() << " end\n";
          out << "final_state " << vec(r.z_final) << "\n";
          out << "output " << vec(eval_layers(model.decoder, r.z_final, std::nullopt)) << "\n";
        } else {
          SolverConfig cfg = model.solver;
          cfg.max_steps = cfg.max_steps.value_or(cfg.step_cap());
          const AsResult r = as_integrate(model.dynamics, z0, cfg);
          out << "  steps " << r.attempted << " accepted " << r.accepted << "\n";
          out << "final_state " << vec(r.z_final) << "\n";
          out << "output " << vec(eval_layers(model.decoder, r.z_final, std::nullopt)) << "\n";
        }
      }
      return kExitOk;
    }

    if (graph_cmd->parsed()) {
      std::string dot;
      if (!stub.empty()) {
        const auto s = splitting_stub();
        dot = export_dot(build_graph(s, splitting_config(), Box::point(Vector::Zero(s.state_dim()))));
      } else {
        if (model_path.empty() || input_path.empty()) {
          throw UsageError("graph needs --model and --input, or --stub");
        }
        const ModelSpec model = open_model(model_path);
        const auto rows = load_input_csv(input_path);
        if (rows[0].x.size() != model.input_dim()) throw UsageError("input row has the wrong length");
        if (!(epsilon >= 0.0)) throw UsageError("epsilon must be non-negative");
        const AbstractMode mode =
            domain == "box" ? AbstractMode::box() : AbstractMode::linear(ReluPolicy::AreaMin);
        CompositeTransformer enc(Box::around(rows[0].x, epsilon), false, mode.policy);
        const Index e_out = enc.add_layers(0, model.encoder, std::nullopt);
        dot = export_dot(build_graph(model, enc.box(e_out), mode));
      }
      write_text(dot_path, dot, out);
      return kExitOk;
    }

    if (cas_cmd->parsed()) {
      CasVsAsOptions opts;
      opts.states = states;
      opts.seed = seed;
      opts.workers = workers;
      std::ostringstream csv;
      write_cas_vs_as(csv, cas_vs_as(opts));
      write_text(out_path, csv.str(), out);
      return kExitOk;
    }

    if (lcap_cmd->parsed()) {
      std::vector<int> dims;
      for (double v : parse_list(dims_text, "dims")) {
        if (v < 1 || v != static_cast<int>(v)) throw UsageError("dims must be positive integers");
        dims.push_back(static_cast<int>(v));
      }
      std::ostringstream csv;
      write_lcap_bench(csv, lcap_bench(dims, m, seeds, seed), !no_timings);
      write_text(out_path, csv.str(), out);
      return kExitOk;
    }

    if (gen_model->parsed()) {
      const auto v = parse_list(gen_dims, "dims");
      if (v.size() != 4) throw UsageError("--dims needs INPUT,STATE,HIDDEN,OUTPUT");
      RandomModelOptions o;
      o.input_dim = static_cast<Index>(v[0]);
      o.state_dim = static_cast<Index>(v[1]);
      o.hidden_dim = static_cast<Index>(v[2]);
      o.output_dim = static_cast<Index>(v[3]);
      o.output = role == "regression" ? OutputRole::Regression : OutputRole::Classification;
      o.solver = default_test_solver();
      ModelSpec model;
      try {
        model = random_model(o, seed);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      write_text(out_path, model_to_json(model), out);
      return kExitOk;
    }

    if (gen_lcap->parsed()) {
      try {
        write_text(out_path, lcap_json(generate_lcap_instance(d, m, seed), d, m, seed), out);
      } catch (const GenerationBudgetError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUnknown;
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace gains
