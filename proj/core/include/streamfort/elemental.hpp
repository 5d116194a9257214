#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "streamfort/analyzer.hpp"
#include "streamfort/value.hpp"

namespace sf {

struct ElementalRead {
  std::string array;
  Offset offset;
  bool operator==(const ElementalRead&) const = default;
};

/// The innermost body of a Map or Fold node, resolved to numbered slots so
/// it can run once per grid position without name lookups. Arithmetic is
/// the evaluator's, so results agree bit for bit.
class Elemental {
 public:
  static Elemental compile(const IrNode& node);

  /// One value per entry is expected by run(), in this order. An output
  /// that is not written on every path also appears here at offset zero
  /// so its previous value can pass through.
  const std::vector<ElementalRead>& reads() const { return reads_; }
  const std::vector<std::string>& writes() const { return writes_; }
  const std::vector<BaseType>& write_types() const { return writeTypes_; }
  const std::vector<std::string>& scalar_inputs() const { return scalarNames_; }
  const std::vector<std::string>& loop_vars() const { return loopVars_; }
  bool is_fold() const { return accSlot_ >= 0; }
  /// Output `i` is assigned on every path through the body.
  bool must_write(std::size_t i) const { return mustWrite_[i]; }

  /// `index` holds the loop variables (outermost first). `acc` is read and
  /// updated for folds and ignored otherwise.
  void run(std::span<const std::int64_t> index, std::span<const Value> in, std::span<const Value> scalars,
           std::span<Value> out, Value* acc = nullptr) const;

  struct Node {
    enum class Op { Const, Slot, Unary, Binary, Intrinsic } op = Op::Const;
    Value value;
    int slot = -1;
    UnOp uop = UnOp::Neg;
    BinOp bop = BinOp::Add;
    std::string name;
    std::vector<int> kids;
  };
  struct Step {
    bool branch = false;
    int slot = -1;
    int expr = -1;
    std::vector<Step> then;
    std::vector<Step> otherwise;
  };

 private:
  friend class ElementalCompiler;
  Value eval(int n, std::vector<Value>& vars) const;
  void exec(const std::vector<Step>& steps, std::vector<Value>& vars) const;

  std::vector<ElementalRead> reads_;
  std::vector<std::string> writes_;
  std::vector<BaseType> writeTypes_;
  std::vector<int> priorOf_;  // per output: index into reads_ or -1
  std::vector<bool> mustWrite_;
  std::vector<std::string> scalarNames_;
  std::vector<std::string> loopVars_;
  std::vector<BaseType> slotTypes_;
  int outBase_ = 0;
  int scalarBase_ = 0;
  int loopBase_ = 0;
  int accSlot_ = -1;
  std::vector<Node> nodes_;
  std::vector<Step> body_;
};

}  // namespace sf
