#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "network.hpp"

namespace branchflow {

enum class Initializer { Subdivision, Star, Small };

enum class Stage { Init, LocalSweep, Subdivide, Reparent, Final };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::Init: return "init";
    case Stage::LocalSweep: return "local";
    case Stage::Subdivide: return "subdivide";
    case Stage::Reparent: return "reparent";
    case Stage::Final: return "final";
  }
  return "?";
}

struct StageRecord {
  Stage stage;
  int round = 0;
  int sweep = 0;
  double cost = 0.0;
};

struct MoveRecord {
  enum class Kind { Local, Global };
  Kind kind;
  VertexId vertex;
  double cost_before = 0.0;
  double cost_after = 0.0;
  double tolerance = 0.0;
  bool rolled_back = false;
};

// Hooks for tracing a run; both may be empty.
struct Observer {
  std::function<void(const StageRecord&, const TransportNetwork&)> on_stage;
  std::function<void(const MoveRecord&)> on_move;

  void stage(const StageRecord& r, const TransportNetwork& g) const {
    if (on_stage) on_stage(r, g);
  }
  void move(const MoveRecord& r) const {
    if (on_move) on_move(r);
  }
};

struct OptimizeConfig {
  double rel_tol = 1e-9;
  int max_local_sweeps = 200;
  int max_rounds = 50;
  // Edges longer than this multiple of the mean edge length get a midpoint.
  double subdivide_factor = 2.0;
  // Vertex budget for edge subdivision, per target atom.
  std::size_t max_vertices_per_target = 20;
  Initializer initializer = Initializer::Subdivision;
  // Worker threads for candidate scoring; 0 or 1 scores serially.
  unsigned threads = 1;
  Observer observer;
};

}  // namespace branchflow
