#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "streamfort/ast.hpp"
#include "streamfort/value.hpp"

namespace sf {

using Offset = std::vector<int>;

/// Accesses of one array inside a loop nest, as constant offsets from the
/// induction variables (dimension d is indexed by the d-th loop, outermost
/// first). `opaque` marks any subscript that is not `var + const`.
struct AccessPattern {
  std::string array;
  bool write = false;
  std::vector<Offset> offsets;  // sorted, unique
  bool opaque = false;
};

enum class LoopKind { Map, Fold, Sequential };
enum class FoldOp { Add, Mul, Min, Max };
const char* to_string(LoopKind k);
const char* to_string(FoldOp op);

struct LoopClass {
  LoopKind kind = LoopKind::Sequential;
  std::string accumulator;  // Fold
  FoldOp op = FoldOp::Add;  // Fold
  std::string reason;       // Sequential
};

struct NestAnalysis {
  LoopClass cls;
  std::vector<std::string> loopVars;  // outermost first
  std::vector<AccessPattern> accesses;
  std::vector<std::string> privates;      // scalars defined before use in every iteration
  std::vector<std::string> scalarInputs;  // scalars read but never assigned in the nest
};

/// Dependence test for one DO nest. `scope` supplies declarations and
/// PARAMETER values.
NestAnalysis classify_loop_nest(const SourceUnit& scope, const Stmt& nest);

enum class NodeKind { Map, Fold, Seq };
const char* to_string(NodeKind k);

struct Domain {
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> hi;
  bool operator==(const Domain&) const = default;
};

struct IrNode {
  NodeKind kind = NodeKind::Seq;
  std::string name;
  /// Declarations the node body is typed against (arrays under their
  /// program names, the node's own scalars, PARAMETERs).
  SourceUnit scope;
  /// Map/Fold: the whole DO nest; Seq: the opaque statements.
  std::vector<Stmt> code;
  std::vector<std::string> loopVars;
  Domain domain;
  std::vector<AccessPattern> inputs;
  std::vector<AccessPattern> outputs;
  std::vector<std::string> privates;
  std::vector<std::string> scalarInputs;
  std::string accumulator;
  FoldOp op = FoldOp::Add;
  std::string reason;

  bool stenciled() const;
  /// Innermost loop body of a Map/Fold nest (the elemental function).
  const std::vector<Stmt>& elemental() const;
  const AccessPattern* input(const std::string& array) const;
  const AccessPattern* output(const std::string& array) const;
};

struct IrEdge {
  int from = 0;
  int to = 0;
  std::string array;
  BaseType type = BaseType::Real;
};

struct FunctionalIR {
  std::shared_ptr<const ProgramAst> program;
  /// Program unit plus any renamed locals of inlined code that runs on the host.
  SourceUnit hostScope;
  std::vector<Stmt> prologue;
  std::vector<Stmt> epilogue;
  bool hasTimeLoop = false;
  std::string timeVar;
  std::int64_t timeSteps = 1;
  std::int64_t timeLo = 1;
  std::int64_t timeStride = 1;
  std::vector<IrNode> nodes;  // time-step order
  std::vector<IrEdge> edges;  // producer precedes consumer within a step
  std::vector<IrEdge> carried;  // producer in step t, consumer in step t+1

  int find(const std::string& name) const;
  /// Shape of a program array.
  Shape shape_of(const std::string& array) const;
  BaseType type_of(const std::string& array) const;
  std::vector<std::string> arrays() const;
  std::string to_json() const;
};

/// Lift the time-step body of a linked program into Map/Fold/Seq nodes.
/// COMMON blocks and label-terminated loops are refactored away first.
FunctionalIR build_ir(const ProgramAst& ast);

struct RewriteRules {
  bool fuse = true;
  bool fission = false;
};

FunctionalIR rewrite_ir(FunctionalIR ir, const RewriteRules& rules = {});

/// Recompute edges after nodes changed.
void rebuild_edges(FunctionalIR& ir);

/// Host-visible program state before the time loop (prologue executed).
HostState ir_initial_state(const FunctionalIR& ir);
void run_node(const FunctionalIR& ir, const IrNode& node, HostState& state);
/// One time step: every node in order.
void run_ir_step(const FunctionalIR& ir, HostState& state);
/// Prologue, `steps` time steps (all of them when negative), epilogue.
HostState run_ir(const FunctionalIR& ir, int steps = -1);

}  // namespace sf
