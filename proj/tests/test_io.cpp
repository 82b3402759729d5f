#include <gtest/gtest.h>

#include <cmath>
#include <regex>

#include "branchflow/io.hpp"
#include "branchflow/optimize_global.hpp"
#include "test_support.hpp"

using namespace branchflow;
using io::Format;

namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<double> stroke_widths(const std::string& svg) {
  std::vector<double> out;
  const std::regex re("stroke-width=\"([^\"]+)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
    out.push_back(std::stod((*it)[1]));
  return out;
}

}  // namespace

TEST(ParseInstance, JsonTwoTargets) {
  const auto inst = io::parse_instance(R"({"alpha": 0.5, "source": {"point": [0, 0], "mass": 1.0},
    "targets": [{"point": [2, 1], "mass": 0.5}, {"point": [2, -1], "mass": 0.5}]})",
                                       Format::Json);
  EXPECT_EQ(inst.targets.size(), 2u);
  EXPECT_EQ(inst.alpha, 0.5);
  EXPECT_EQ(inst.source.point, (Point{0, 0}));
  EXPECT_FALSE(inst.seed);
}

TEST(ParseInstance, AlphaOverride) {
  const auto inst = io::parse_instance(
      R"({"alpha": 0.5, "source": {"point": [0, 0], "mass": 1}, "targets": [{"point": [1, 1], "mass": 1}]})",
      Format::Json, 0.75);
  EXPECT_EQ(inst.alpha, 0.75);
}

TEST(ParseInstance, JsonErrorsNameTheField) {
  auto message = [](const std::string& text) {
    try {
      io::parse_instance(text, Format::Json);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("{").find("json"), std::string::npos);
  EXPECT_NE(message(R"({"alpha": 1.5, "source": {"point": [0, 0], "mass": 1}, "targets": [{"point": [1, 1], "mass": 1}]})")
                .find("alpha"),
            std::string::npos);
  EXPECT_NE(message(R"({"alpha": 0.5, "source": {"point": [0, 0], "mass": 1}, "targets": [{"point": [1, 1], "mass": 0.5}]})")
                .find("total mass"),
            std::string::npos);
  EXPECT_NE(message(R"({"alpha": 0.5, "source": {"point": [0, 0], "mass": 1}, "targets": [{"point": [1], "mass": 1}]})")
                .find("targets[0].point"),
            std::string::npos);
  EXPECT_NE(message(R"({"alpha": 0.5, "source": {"point": [0, 0], "mass": 1},
    "targets": [{"point": [1, 1], "mass": 1}, {"point": [2, 2], "mass": 0}]})")
                .find("targets[1]"),
            std::string::npos);
}

TEST(ParseInstance, Csv) {
  const auto inst = io::parse_instance("x,y,mass\n0,0,1\n2,1,0.5\n2,-1,0.5\n", Format::Csv, 0.5);
  EXPECT_EQ(inst.targets.size(), 2u);
  EXPECT_EQ(inst.targets.atoms[1].point, (Point{2, -1}));
  const auto three = io::parse_instance("x,y,z,mass\n0,0,0,2\n1,1,1,2\n", Format::Csv, 0.5);
  EXPECT_EQ(three.source.point.dim(), 3u);
}

TEST(ParseInstance, CsvErrorsNameTheLine) {
  try {
    io::parse_instance("x,y,mass\n0,0,1\n1,1,0\n2,2,1\n", Format::Csv, 0.5);
    FAIL() << "zero mass accepted";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("mass"), std::string::npos) << e.what();
  }
  EXPECT_THROW(io::parse_instance("x,y,mass\n0,0,1\n1,abc,1\n", Format::Csv, 0.5), InputError);
  EXPECT_THROW(io::parse_instance("x,y,mass\n0,0,1\n1,1\n", Format::Csv, 0.5), InputError);
  EXPECT_THROW(io::parse_instance("x,y,mass\n0,0,1\n1,1,1\n", Format::Csv), InputError);
  EXPECT_THROW(io::parse_instance("a,b\n0,0\n", Format::Csv, 0.5), InputError);
}

TEST(Generators, DeterministicForASeed) {
  const std::string doc =
      R"({"alpha": 0.5, "source": {"point": [0, 0], "mass": 1}, "seed": 7,
          "generator": {"kind": "uniform-square", "count": 50}})";
  const auto a = io::parse_instance(doc, Format::Json);
  const auto b = io::parse_instance(doc, Format::Json);
  ASSERT_EQ(a.targets.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(a.targets.atoms[i].point, b.targets.atoms[i].point);
  const auto c = io::parse_instance(doc, Format::Json, std::nullopt, 8);
  EXPECT_NE(a.targets.atoms[0].point, c.targets.atoms[0].point);
  for (const Atom& t : a.targets.atoms) {
    EXPECT_GE(t.point[0], 0.0);
    EXPECT_LT(t.point[0], 1.0);
    EXPECT_DOUBLE_EQ(t.mass, 1.0 / 50);
  }
}

TEST(Generators, FirstDrawMatchesTheDocumentedConversion) {
  std::mt19937_64 engine(7);
  const double x = static_cast<double>(engine() >> 11) / 9007199254740992.0;
  const auto pts = io::generate_targets({"uniform-square", 1, {}}, 7, 1.0);
  EXPECT_EQ(pts.atoms[0].point[0], x);
}

TEST(Generators, DiskAndCircleShapes) {
  const auto circle = io::generate_targets({"circle", 400, {0, 0, 1}}, 0, 1.0);
  for (const Atom& a : circle.atoms) EXPECT_NEAR(norm(a.point), 1.0, 1e-15);
  EXPECT_TRUE(validate(circle).empty());
  for (const char* kind : {"disk-random", "disk-uniform"}) {
    const auto disk = io::generate_targets({kind, 300, {1, 1, 2}}, 3, 2.0);
    EXPECT_EQ(disk.size(), 300u);
    EXPECT_NEAR(total_mass(disk), 2.0, 1e-12);
    for (const Atom& a : disk.atoms) EXPECT_LT(distance(a.point, Point{1, 1}), 2.0);
    EXPECT_TRUE(validate(disk).empty());
  }
  EXPECT_THROW(io::generate_targets({"hexagon", 3, {}}, 0, 1.0), InputError);
  EXPECT_THROW(io::generate_targets({"circle", 0, {}}, 0, 1.0), InputError);
}

TEST(ExportNetwork, SingleEdge) {
  TransportNetwork g(Point{0, 0}, 2.0, 1e-9);
  g.link(g.root(), g.add_vertex({3, 4}, 2.0), 2.0);
  const auto doc = io::Json::parse(io::export_network(g, 0.5));
  EXPECT_EQ(doc["vertices"].size(), 2u);
  EXPECT_EQ(doc["edges"].size(), 1u);
  EXPECT_DOUBLE_EQ(doc["cost"].get<double>(), std::sqrt(2.0) * 5.0);
  const std::vector<std::string> keys{"alpha", "vertices", "edges", "cost"};
  std::vector<std::string> seen;
  for (auto it = doc.begin(); it != doc.end(); ++it) seen.push_back(it.key());
  EXPECT_EQ(seen, keys);
}

TEST(ExportNetwork, RoundTripOnOptimizedNetworks) {
  test_util::Rng rng(51);
  for (int t = 0; t < 10; ++t) {
    const auto b = rng.measure(30, 2, 1.0, 0.0, 1.0, false);
    const double alpha = rng.uniform(0.3, 0.9);
    const auto g = global_optimize({{{{0, 0}, 1.0}}}, b, alpha);
    const std::string text = io::export_network(g, alpha);
    const auto back = io::import_network(text);
    EXPECT_EQ(back.alpha, alpha);
    ASSERT_EQ(back.network.vertices(), g.vertices());
    for (VertexId v : g.vertices()) {
      EXPECT_EQ(back.network.point(v), g.point(v));
      EXPECT_EQ(back.network.parent(v), g.parent(v));
      if (v != g.root()) {
        EXPECT_EQ(back.network.weight(v), g.weight(v));
      }
      EXPECT_NEAR(back.network.demand(v), g.demand(v), 1e-12);
    }
    EXPECT_EQ(back.cost, cost_m_alpha(g, alpha));
    EXPECT_NEAR(back.cost, cost_m_alpha(back.network, alpha), 1e-12);
    EXPECT_EQ(io::export_network(back.network, alpha), text);
  }
}

TEST(ImportNetwork, RejectsBrokenDocuments) {
  EXPECT_THROW(io::import_network("[]"), InputError);
  EXPECT_THROW(io::import_network(R"({"vertices": [{"id": 0, "coords": [0, 0]}], "edges": [{"from": 0, "to": 3, "weight": 1}]})"),
               InputError);
  EXPECT_THROW(io::import_network(R"({"vertices": [{"id": 0, "coords": [0, 0]}, {"id": 1, "coords": [1, 0]}], "edges": []})"),
               InputError);
}

TEST(RenderSvg, OneLinePerEdge) {
  TransportNetwork g(Point{0, 0}, 1.0, 1e-9);
  g.link(g.root(), g.add_vertex({1, 1}, 1.0), 1.0);
  const std::string svg = io::render_svg(g, 0.5);
  EXPECT_EQ(count_of(svg, "<line "), 1u);
  EXPECT_EQ(count_of(svg, "<circle "), 1u);
  EXPECT_NE(svg.find("<svg "), std::string::npos);
  EXPECT_EQ(svg, io::render_svg(g, 0.5));
}

TEST(RenderSvg, TrunkIsThickerThanLeaves) {
  const auto inst = io::parse_instance(
      R"({"alpha": 0.5, "source": {"point": [0, 0], "mass": 1}, "seed": 1,
          "generator": {"kind": "uniform-square", "count": 50}})",
      Format::Json);
  const auto g = global_optimize({{inst.source}}, inst.targets, inst.alpha);
  const auto widths = stroke_widths(io::render_svg(g, inst.alpha));
  const auto edges = g.edges();
  ASSERT_EQ(widths.size(), edges.size());
  double root_width = 0.0, leaf_width = 0.0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].from == g.root()) root_width = std::max(root_width, widths[i]);
    if (g.children(edges[i].to).empty()) leaf_width = std::max(leaf_width, widths[i]);
  }
  EXPECT_GT(root_width, leaf_width);
  for (std::size_t i = 0; i < edges.size(); ++i)
    for (std::size_t j = 0; j < edges.size(); ++j)
      if (edges[i].weight > edges[j].weight * (1 + 1e-6)) {
        EXPECT_GT(widths[i], widths[j]);
      }
}
