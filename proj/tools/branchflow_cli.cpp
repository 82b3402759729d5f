#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "branchflow/construct.hpp"
#include "branchflow/errors.hpp"
#include "branchflow/io.hpp"
#include "branchflow/optimize_global.hpp"
#include "branchflow/oracle.hpp"

namespace bf = branchflow;

namespace {

constexpr int kInputError = 2;
constexpr int kInvariantError = 3;

struct Options {
  std::string input;
  std::string format;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::string out_json;
  std::string out_svg;
  int max_rounds = 50;
  double rel_tol = 1e-9;
  double subdivide_factor = 2.0;
  bf::Initializer initializer = bf::Initializer::Subdivision;
};

// Thrown after a solver result fails the final checks; carries the network.
struct BrokenNetwork {
  std::string what;
  std::string dump;
};

std::string read_input(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bf::InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bf::InputError("cannot write '" + path + "'");
  out << text;
}

unsigned thread_count() {
  const char* env = std::getenv("BRANCHFLOW_THREADS");
  if (!env) return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1 || n > 1024)
    throw bf::InputError(std::string("BRANCHFLOW_THREADS must be an integer in [1, 1024], got '") + env + "'");
  return static_cast<unsigned>(n);
}

bf::io::Instance load_instance(const Options& o) {
  const auto format = o.format.empty() ? bf::io::format_for_path(o.input) : bf::io::parse_format(o.format);
  return bf::io::parse_instance(read_input(o.input), format, o.alpha, o.seed);
}

bf::OptimizeConfig make_config(const Options& o) {
  if (o.max_rounds < 0) throw bf::InputError("--max-rounds must be non-negative");
  if (!(o.rel_tol >= 0.0)) throw bf::InputError("--rel-tol must be non-negative");
  if (!(o.subdivide_factor > 0.0)) throw bf::InputError("--subdivide-factor must be positive");
  bf::OptimizeConfig c;
  c.max_rounds = o.max_rounds;
  c.rel_tol = o.rel_tol;
  c.subdivide_factor = o.subdivide_factor;
  c.initializer = o.initializer;
  c.threads = thread_count();
  return c;
}

void check_result(const bf::TransportNetwork& g, const bf::io::Instance& inst) {
  std::string problem;
  for (const std::string& s : bf::structure_violations(g)) problem += s + "; ";
  const double residual = bf::check_balance(g, {{inst.source}}, inst.targets).max_abs();
  if (residual > 1e-9 * inst.source.mass) problem += "balance residual " + std::to_string(residual) + "; ";
  if (!problem.empty()) throw BrokenNetwork{problem, bf::io::export_network(g, inst.alpha)};
}

void emit(const Options& o, const bf::TransportNetwork& g, double alpha) {
  if (!o.out_svg.empty()) write_output(o.out_svg, bf::io::render_svg(g, alpha));
  if (!o.out_json.empty() || o.out_svg.empty()) write_output(o.out_json, bf::io::export_network(g, alpha));
  std::fprintf(stderr, "cost %.12g  vertices %zu  edges %zu\n", bf::cost_m_alpha(g, alpha), g.vertex_count(),
               g.edge_count());
}

int run_solve(const Options& o) {
  const auto inst = load_instance(o);
  bf::OptimizeConfig config = make_config(o);
  std::optional<bf::TransportNetwork> last;
  config.observer.on_stage = [&](const bf::StageRecord& r, const bf::TransportNetwork& g) {
    last = g;
    std::fprintf(stderr, "%-9s round %2d sweep %3d cost %.12g\n", bf::to_string(r.stage), r.round, r.sweep, r.cost);
  };
  try {
    const auto g = bf::global_optimize({{inst.source}}, inst.targets, inst.alpha, config);
    check_result(g, inst);
    emit(o, g, inst.alpha);
  } catch (const bf::InvariantViolation& e) {
    throw BrokenNetwork{e.what(), last ? bf::io::export_network(*last, inst.alpha) : std::string("{}\n")};
  }
  return 0;
}

int run_init(const Options& o) {
  const auto inst = load_instance(o);
  const auto g = bf::initial_network(inst.source, inst.targets, inst.alpha, o.initializer);
  check_result(g, inst);
  emit(o, g, inst.alpha);
  return 0;
}

int run_oracle(const Options& o) {
  const auto inst = load_instance(o);
  const auto r = bf::oracle::enumerate_optimal({{inst.source}}, inst.targets, inst.alpha);
  check_result(r.network, inst);
  if (!r.converged) std::fprintf(stderr, "warning: coordinate descent hit its iteration cap\n");
  std::fprintf(stderr, "shapes %zu  best cost %.12g\n", r.topologies, r.cost);
  emit(o, r.network, inst.alpha);
  return 0;
}

int run_render(const Options& o) {
  const auto net = bf::io::import_network(read_input(o.input));
  const double alpha = o.alpha.value_or(net.alpha);
  write_output(o.out_svg, bf::io::render_svg(net.network, alpha));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate optimal branched transport networks from one source to many targets."};
  app.require_subcommand(1);
  Options o;

  const std::map<std::string, bf::Initializer> initializers{
      {"subdivision", bf::Initializer::Subdivision}, {"star", bf::Initializer::Star}, {"small", bf::Initializer::Small}};

  auto add_instance_flags = [&](CLI::App* sub) {
    sub->add_option("--input", o.input, "instance file (JSON or CSV, '-' for stdin)")->required();
    sub->add_option("--format", o.format, "json or csv (default: from the file extension)")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--alpha", o.alpha, "cost exponent in (0, 1]; overrides the instance");
    sub->add_option("--seed", o.seed, "generator seed; overrides the instance");
    sub->add_option("--out-json", o.out_json, "network JSON output (default: stdout)");
    sub->add_option("--out-svg", o.out_svg, "SVG drawing output");
  };
  auto add_solver_flags = [&](CLI::App* sub) {
    sub->add_option("--max-rounds", o.max_rounds, "outer rounds of local, subdivide and reparent steps");
    sub->add_option("--rel-tol", o.rel_tol, "stop when a round gains less than this fraction of the cost");
    sub->add_option("--subdivide-factor", o.subdivide_factor, "split edges longer than this multiple of the mean");
    sub->add_option("--initializer", o.initializer, "subdivision, star or small")
        ->transform(CLI::CheckedTransformer(initializers, CLI::ignore_case));
  };

  CLI::App* solve = app.add_subcommand("solve", "run the full optimization pipeline");
  add_instance_flags(solve);
  add_solver_flags(solve);
  CLI::App* init = app.add_subcommand("init", "build the initial network only");
  add_instance_flags(init);
  add_solver_flags(init);
  CLI::App* oracle = app.add_subcommand("oracle", "exact optimum by shape enumeration (at most 4 targets)");
  add_instance_flags(oracle);
  CLI::App* render = app.add_subcommand("render", "draw a network JSON file as SVG");
  render->add_option("--input", o.input, "network JSON file ('-' for stdin)")->required();
  render->add_option("--alpha", o.alpha, "width exponent (default: the network's alpha)");
  render->add_option("--out-svg", o.out_svg, "SVG output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*solve) return run_solve(o);
    if (*init) return run_init(o);
    if (*oracle) return run_oracle(o);
    if (*render) return run_render(o);
  } catch (const BrokenNetwork& b) {
    std::fprintf(stderr, "invariant violation: %s\nnetwork at failure:\n%s", b.what.c_str(), b.dump.c_str());
    return kInvariantError;
  } catch (const bf::InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return kInvariantError;
  } catch (const bf::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const bf::DegenerateInput& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  }
  return kInputError;
}
