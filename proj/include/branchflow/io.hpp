#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "measures.hpp"
#include "network.hpp"
#include "point.hpp"

namespace branchflow::io {

using Json = nlohmann::ordered_json;

enum class Format { Json, Csv };

inline Format parse_format(std::string_view s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  throw InputError("unknown format '" + std::string(s) + "' (expected json or csv)");
}

// Guesses the format from a file name; anything but *.csv is read as JSON.
inline Format format_for_path(std::string_view path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? Format::Csv : Format::Json;
}

class ParseError : public InputError {
 public:
  ParseError(const std::string& where, const std::string& what) : InputError(where + ": " + what) {}
};

struct GeneratorSpec {
  std::string kind;
  std::size_t count = 0;
  std::vector<double> region;
};

struct Instance {
  double alpha = 0.5;
  Atom source;
  AtomicMeasure targets;
  std::optional<std::uint64_t> seed;
  std::optional<GeneratorSpec> generator;
};

// Uniform double in [0, 1) from the top 53 bits of one mt19937_64 draw.
inline double unit_draw(std::mt19937_64& engine) { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }

// Expands a generator into `count` targets of equal mass `total / count`.
//   uniform-square  region [x0, y0, x1, y1], default unit square; x then y per point
//   circle          region [cx, cy, r]; equally spaced, starting at angle 0
//   disk-random     region [cx, cy, r]; rejection sampling from the bounding square
//   disk-uniform    region [cx, cy, r]; sunflower spiral, radius r sqrt((k + 1/2) / count)
inline AtomicMeasure generate_targets(const GeneratorSpec& spec, std::uint64_t seed, double total) {
  if (spec.count == 0) throw ParseError("generator.count", "must be positive");
  std::mt19937_64 engine(seed);
  std::vector<double> region = spec.region;
  const bool square = spec.kind == "uniform-square";
  if (region.empty()) region = square ? std::vector<double>{0, 0, 1, 1} : std::vector<double>{0, 0, 1};
  if (region.size() != (square ? 4u : 3u))
    throw ParseError("generator.region", square ? "expected [x0, y0, x1, y1]" : "expected [cx, cy, r]");
  for (double r : region)
    if (!std::isfinite(r)) throw ParseError("generator.region", "non-finite value");

  AtomicMeasure out;
  const double mass = total / static_cast<double>(spec.count);
  const auto n = static_cast<double>(spec.count);
  if (square) {
    if (!(region[2] > region[0] && region[3] > region[1])) throw ParseError("generator.region", "empty square");
    for (std::size_t k = 0; k < spec.count; ++k) {
      const double x = region[0] + (region[2] - region[0]) * unit_draw(engine);
      const double y = region[1] + (region[3] - region[1]) * unit_draw(engine);
      out.atoms.push_back({Point{x, y}, mass});
    }
  } else {
    const double cx = region[0], cy = region[1], r = region[2];
    if (!(r > 0)) throw ParseError("generator.region", "radius must be positive");
    if (spec.kind == "circle") {
      for (std::size_t k = 0; k < spec.count; ++k) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / n;
        out.atoms.push_back({Point{cx + r * std::cos(t), cy + r * std::sin(t)}, mass});
      }
    } else if (spec.kind == "disk-random") {
      while (out.atoms.size() < spec.count) {
        const double x = 2.0 * unit_draw(engine) - 1.0;
        const double y = 2.0 * unit_draw(engine) - 1.0;
        if (x * x + y * y < 1.0) out.atoms.push_back({Point{cx + r * x, cy + r * y}, mass});
      }
    } else if (spec.kind == "disk-uniform") {
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (std::size_t k = 0; k < spec.count; ++k) {
        const double rad = r * std::sqrt((static_cast<double>(k) + 0.5) / n);
        const double t = golden * static_cast<double>(k);
        out.atoms.push_back({Point{cx + rad * std::cos(t), cy + rad * std::sin(t)}, mass});
      }
    } else {
      throw ParseError("generator.kind", "unknown generator '" + spec.kind + "'");
    }
  }
  return out;
}

namespace detail {

inline double number_at(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(where, "non-finite number");
  return v;
}

inline Point point_at(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() < 2) throw ParseError(where, "expected an array of at least 2 coordinates");
  std::vector<double> c;
  for (std::size_t i = 0; i < j.size(); ++i) c.push_back(number_at(j[i], where + "[" + std::to_string(i) + "]"));
  return Point(std::move(c));
}

inline Atom atom_at(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where, "expected an object with point and mass");
  if (!j.contains("point")) throw ParseError(where + ".point", "missing");
  if (!j.contains("mass")) throw ParseError(where + ".mass", "missing");
  return {point_at(j["point"], where + ".point"), number_at(j["mass"], where + ".mass")};
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_cell(const std::string& cell, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ParseError(where, "not a number: '" + cell + "'");
  }
  if (used != cell.size()) throw ParseError(where, "not a number: '" + cell + "'");
  if (!std::isfinite(v)) throw ParseError(where, "non-finite number");
  return v;
}

inline void check_instance(const Instance& inst, const std::function<std::string(std::size_t)>& target_where,
                           const std::string& source_where) {
  if (!(inst.alpha > 0.0 && inst.alpha <= 1.0))
    throw ParseError("alpha", "must lie in (0, 1], got " + std::to_string(inst.alpha));
  if (!(inst.source.mass > 0.0)) throw ParseError(source_where, "source mass must be positive");
  if (inst.targets.empty()) throw ParseError("targets", "at least one target is required");
  for (const MeasureViolation& v : validate(inst.targets)) {
    switch (v.kind) {
      case MeasureViolation::Kind::NonPositiveMass: throw ParseError(target_where(v.index), "mass must be positive");
      case MeasureViolation::Kind::DuplicatePoint: throw ParseError(target_where(v.index), "duplicate target point");
      case MeasureViolation::Kind::NonFiniteCoordinate: throw ParseError(target_where(v.index), "non-finite coordinate");
      case MeasureViolation::Kind::DimensionMismatch: throw ParseError(target_where(v.index), "dimension mismatch");
    }
  }
  if (inst.targets.dim() != inst.source.point.dim())
    throw ParseError(target_where(0), "dimension differs from the source");
  const double total = total_mass(inst.targets);
  if (std::abs(total - inst.source.mass) > 1e-9 * inst.source.mass)
    throw ParseError("targets", "total mass " + std::to_string(total) + " differs from source mass " +
                                    std::to_string(inst.source.mass));
}

}  // namespace detail

// JSON: {alpha, source: {point, mass}, targets: [{point, mass}], seed?, generator?: {kind, count, region?}}
// CSV:  header x,y[,z...],mass; the first data row is the source. alpha comes from `alpha`.
// A non-empty `alpha` or `seed` argument overrides the value in the document.
inline Instance parse_instance(std::string_view text, Format format, std::optional<double> alpha = std::nullopt,
                               std::optional<std::uint64_t> seed = std::nullopt) {
  Instance inst;
  std::function<std::string(std::size_t)> target_where;
  std::string source_where;

  if (format == Format::Json) {
    Json doc;
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ParseError("json", e.what());
    }
    if (!doc.is_object()) throw ParseError("json", "top level must be an object");
    if (doc.contains("alpha")) inst.alpha = detail::number_at(doc["alpha"], "alpha");
    else if (!alpha) throw ParseError("alpha", "missing");
    if (!doc.contains("source")) throw ParseError("source", "missing");
    inst.source = detail::atom_at(doc["source"], "source");
    source_where = "source.mass";
    if (doc.contains("seed")) {
      if (!doc["seed"].is_number_unsigned()) throw ParseError("seed", "expected a non-negative integer");
      inst.seed = doc["seed"].get<std::uint64_t>();
    }
    if (seed) inst.seed = seed;
    const bool has_targets = doc.contains("targets");
    if (doc.contains("generator")) {
      if (has_targets) throw ParseError("generator", "cannot be combined with targets");
      const Json& g = doc["generator"];
      if (!g.is_object()) throw ParseError("generator", "expected an object");
      GeneratorSpec spec;
      if (!g.contains("kind") || !g["kind"].is_string()) throw ParseError("generator.kind", "missing");
      spec.kind = g["kind"].get<std::string>();
      if (!g.contains("count") || !g["count"].is_number_unsigned())
        throw ParseError("generator.count", "expected a positive integer");
      spec.count = g["count"].get<std::size_t>();
      if (g.contains("region")) {
        if (!g["region"].is_array()) throw ParseError("generator.region", "expected an array");
        for (std::size_t i = 0; i < g["region"].size(); ++i)
          spec.region.push_back(detail::number_at(g["region"][i], "generator.region[" + std::to_string(i) + "]"));
      }
      if (inst.source.point.dim() != 2) throw ParseError("source.point", "generators are planar");
      inst.targets = generate_targets(spec, inst.seed.value_or(0), inst.source.mass);
      inst.generator = std::move(spec);
      target_where = [](std::size_t i) { return "generated target " + std::to_string(i); };
    } else {
      if (!has_targets || !doc["targets"].is_array()) throw ParseError("targets", "expected an array");
      const Json& t = doc["targets"];
      for (std::size_t i = 0; i < t.size(); ++i)
        inst.targets.atoms.push_back(detail::atom_at(t[i], "targets[" + std::to_string(i) + "]"));
      target_where = [](std::size_t i) { return "targets[" + std::to_string(i) + "]"; };
    }
  } else {
    if (!alpha) throw ParseError("alpha", "CSV input needs an explicit alpha");
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    std::vector<std::size_t> row_lines;
    std::vector<Atom> rows;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto cells = detail::split_csv_line(line);
      if (header.empty()) {
        header = cells;
        if (header.size() < 3 || header.back() != "mass")
          throw ParseError("line " + std::to_string(line_no), "header must be x,y[,z...],mass");
        continue;
      }
      if (cells.size() != header.size())
        throw ParseError("line " + std::to_string(line_no),
                         "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
      std::vector<double> c;
      for (std::size_t k = 0; k + 1 < cells.size(); ++k)
        c.push_back(detail::parse_cell(cells[k], "line " + std::to_string(line_no) + ", field " + header[k]));
      const double m = detail::parse_cell(cells.back(), "line " + std::to_string(line_no) + ", field mass");
      rows.push_back({Point(std::move(c)), m});
      row_lines.push_back(line_no);
    }
    if (header.empty()) throw ParseError("line 1", "missing header");
    if (rows.empty()) throw ParseError("line " + std::to_string(line_no + 1), "missing source row");
    inst.source = rows.front();
    inst.targets.atoms.assign(rows.begin() + 1, rows.end());
    source_where = "line " + std::to_string(row_lines.front()) + ", field mass";
    target_where = [row_lines](std::size_t i) {
      return "line " + std::to_string(i + 1 < row_lines.size() ? row_lines[i + 1] : row_lines.back());
    };
    inst.seed = seed;
  }
  if (alpha) inst.alpha = *alpha;
  detail::check_instance(inst, target_where, source_where);
  return inst;
}

inline Json network_json(const TransportNetwork& g, double alpha) {
  Json doc;
  doc["alpha"] = alpha;
  Json vertices = Json::array();
  for (VertexId v : g.vertices()) {
    Json coords = Json::array();
    for (double c : g.point(v).coords()) coords.push_back(c);
    vertices.push_back(Json{{"id", v.value}, {"coords", std::move(coords)}});
  }
  doc["vertices"] = std::move(vertices);
  Json edges = Json::array();
  for (const Edge& e : g.edges()) edges.push_back(Json{{"from", e.from.value}, {"to", e.to.value}, {"weight", e.weight}});
  doc["edges"] = std::move(edges);
  doc["cost"] = cost_m_alpha(g, alpha);
  return doc;
}

inline std::string export_network(const TransportNetwork& g, double alpha) { return network_json(g, alpha).dump(2) + "\n"; }

struct ImportedNetwork {
  TransportNetwork network;
  double alpha;
  double cost;
};

// Inverse of export_network. The root is the vertex without an incoming edge;
// demands are recovered as inflow minus outflow.
inline ImportedNetwork import_network(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError("json", e.what());
  }
  if (!doc.is_object() || !doc.contains("vertices") || !doc.contains("edges"))
    throw ParseError("json", "expected an object with vertices and edges");
  const double alpha = doc.contains("alpha") ? detail::number_at(doc["alpha"], "alpha") : 1.0;
  const Json& vs = doc["vertices"];
  const Json& es = doc["edges"];
  if (!vs.is_array() || vs.empty()) throw ParseError("vertices", "expected a non-empty array");
  if (!es.is_array()) throw ParseError("edges", "expected an array");

  std::uint32_t bound = 0;
  std::vector<std::pair<std::uint32_t, Point>> pts;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const std::string where = "vertices[" + std::to_string(i) + "]";
    if (!vs[i].contains("id") || !vs[i]["id"].is_number_unsigned()) throw ParseError(where + ".id", "missing");
    if (!vs[i].contains("coords")) throw ParseError(where + ".coords", "missing");
    const auto id = vs[i]["id"].get<std::uint32_t>();
    pts.emplace_back(id, detail::point_at(vs[i]["coords"], where + ".coords"));
    bound = std::max(bound, id + 1);
  }
  std::vector<const Point*> by_id(bound, nullptr);
  for (const auto& [id, p] : pts) {
    if (by_id[id]) throw ParseError("vertices", "duplicate id " + std::to_string(id));
    by_id[id] = &p;
  }
  struct Link {
    std::uint32_t from, to;
    double w;
  };
  std::vector<Link> links;
  std::vector<double> in(bound, 0.0), out(bound, 0.0);
  std::vector<char> has_parent(bound, 0);
  for (std::size_t i = 0; i < es.size(); ++i) {
    const std::string where = "edges[" + std::to_string(i) + "]";
    const Json& e = es[i];
    if (!e.contains("from") || !e["from"].is_number_unsigned() || !e.contains("to") || !e["to"].is_number_unsigned())
      throw ParseError(where, "expected from and to vertex ids");
    const auto f = e["from"].get<std::uint32_t>();
    const auto t = e["to"].get<std::uint32_t>();
    if (f >= bound || t >= bound || !by_id[f] || !by_id[t]) throw ParseError(where, "unknown vertex id");
    if (!e.contains("weight")) throw ParseError(where + ".weight", "missing");
    const double w = detail::number_at(e["weight"], where + ".weight");
    if (has_parent[t]) throw ParseError(where, "vertex " + std::to_string(t) + " has two parents");
    has_parent[t] = 1;
    links.push_back({f, t, w});
    out[f] += w;
    in[t] += w;
  }
  if (by_id[0] == nullptr || has_parent[0]) throw ParseError("vertices", "vertex 0 must be the source");
  for (std::uint32_t v = 1; v < bound; ++v)
    if (by_id[v] && !has_parent[v]) throw ParseError("vertices", "vertex " + std::to_string(v) + " is disconnected");

  std::vector<Point> all;
  for (const auto& [id, p] : pts) all.push_back(p);
  TransportNetwork g(*by_id[0], out[0], merge_tolerance(all));
  std::vector<VertexId> holes;
  for (std::uint32_t v = 1; v < bound; ++v) {
    if (!by_id[v]) {
      holes.push_back(g.add_vertex(Point(by_id[0]->dim())));
      continue;
    }
    double demand = in[v] - out[v];
    if (std::abs(demand) <= g.balance_tol()) demand = 0.0;
    g.add_vertex(*by_id[v], demand);
  }
  for (VertexId h : holes) g.remove_vertex(h);
  for (const Link& l : links) g.link(VertexId{l.from}, VertexId{l.to}, l.w);
  const double cost = doc.contains("cost") ? detail::number_at(doc["cost"], "cost") : cost_m_alpha(g, alpha);
  return {std::move(g), alpha, cost};
}

struct SvgStyle {
  // Stroke width of an edge carrying the full mass; 0 picks 1.5% of the drawing size.
  double base_width = 0.0;
  // Exponent of the width map; defaults to alpha.
  std::optional<double> gamma;
  double pixels = 800.0;
};

// Planar drawing (first two coordinates) with y pointing up.
inline std::string render_svg(const TransportNetwork& g, double alpha, const SvgStyle& style = {}) {
  auto x_of = [&](VertexId v) { return g.point(v)[0]; };
  auto y_of = [&](VertexId v) { return g.dim() > 1 ? g.point(v)[1] : 0.0; };
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (VertexId v : g.vertices()) {
    x0 = std::min(x0, x_of(v));
    x1 = std::max(x1, x_of(v));
    y0 = std::min(y0, y_of(v));
    y1 = std::max(y1, y_of(v));
  }
  double extent = std::max(x1 - x0, y1 - y0);
  if (!(extent > 0.0)) extent = 1.0;
  const double margin = 0.05 * extent;
  const double vx = x0 - margin, vy = -(y1 + margin);
  const double vw = (x1 - x0) + 2 * margin, vh = (y1 - y0) + 2 * margin;
  const double base = style.base_width > 0.0 ? style.base_width : 0.015 * extent;
  const double gamma = style.gamma.value_or(alpha);
  const double m = g.source_mass();

  std::string out;
  char buf[256];
  auto emit = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof buf, fmt, args...);
    out += buf;
  };
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  emit("<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"%.0f\" height=\"%.0f\" viewBox=\"%.9g %.9g %.9g %.9g\">\n",
       style.pixels, std::round(style.pixels * vh / vw), vx, vy, vw, vh);
  emit("<rect x=\"%.9g\" y=\"%.9g\" width=\"%.9g\" height=\"%.9g\" fill=\"white\"/>\n", vx, vy, vw, vh);
  out += "<g stroke=\"#1f3b73\" stroke-linecap=\"round\" fill=\"none\">\n";
  for (const Edge& e : g.edges())
    emit("<line x1=\"%.9g\" y1=\"%.9g\" x2=\"%.9g\" y2=\"%.9g\" stroke-width=\"%.9g\"/>\n", x_of(e.from), -y_of(e.from),
         x_of(e.to), -y_of(e.to), base * std::pow(e.weight / m, gamma));
  out += "</g>\n<g fill=\"#c0392b\">\n";
  for (VertexId v : g.vertices())
    if (g.demand(v) > 0.0) emit("<circle cx=\"%.9g\" cy=\"%.9g\" r=\"%.9g\"/>\n", x_of(v), -y_of(v), 0.006 * extent);
  out += "</g>\n";
  const double s = 0.015 * extent;
  emit("<rect x=\"%.9g\" y=\"%.9g\" width=\"%.9g\" height=\"%.9g\" fill=\"#27ae60\"/>\n", x_of(g.root()) - s,
       -y_of(g.root()) - s, 2 * s, 2 * s);
  out += "</svg>\n";
  return out;
}

inline Json instance_json(const Instance& inst) {
  Json doc;
  doc["alpha"] = inst.alpha;
  Json src_pt = Json::array();
  for (double c : inst.source.point.coords()) src_pt.push_back(c);
  doc["source"] = Json{{"point", std::move(src_pt)}, {"mass", inst.source.mass}};
  Json targets = Json::array();
  for (const Atom& a : inst.targets.atoms) {
    Json pt = Json::array();
    for (double c : a.point.coords()) pt.push_back(c);
    targets.push_back(Json{{"point", std::move(pt)}, {"mass", a.mass}});
  }
  doc["targets"] = std::move(targets);
  if (inst.seed) doc["seed"] = *inst.seed;
  return doc;
}

}  // namespace branchflow::io
