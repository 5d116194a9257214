#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamfort/ast.hpp"

namespace sf {

/// Raw 32-bit storage word. REAL is IEEE binary32, INTEGER is two's
/// complement int32, LOGICAL is 0/1.
using Word = std::uint32_t;

struct Value {
  BaseType type = BaseType::Real;
  Word bits = 0;

  static Value real(float f) { return {BaseType::Real, std::bit_cast<Word>(f)}; }
  static Value integer(std::int32_t i) { return {BaseType::Integer, std::bit_cast<Word>(i)}; }
  static Value logical(bool b) { return {BaseType::Logical, b ? 1U : 0U}; }
  static Value zero(BaseType t) { return {t, 0U}; }

  float as_real() const;
  std::int32_t as_int() const;
  bool as_bool() const;
};

/// Assignment conversion (REAL -> INTEGER truncates toward zero).
Value convert(Value v, BaseType to);

Value apply_unary(UnOp op, Value v);
Value apply_binary(BinOp op, Value a, Value b);
Value apply_intrinsic(const std::string& name, std::span<const Value> args);

/// Bounds of an array, lower and upper inclusive per dimension. The first
/// dimension is the slowest-varying one (row-major linearization).
struct Shape {
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> hi;

  std::size_t rank() const { return lo.size(); }
  std::int64_t extent(std::size_t d) const { return hi[d] - lo[d] + 1; }
  std::int64_t size() const;
  /// Elements between consecutive values of the first index.
  std::int64_t row_stride() const;
  std::int64_t linear(std::span<const std::int64_t> index) const;
  bool contains(std::span<const std::int64_t> index) const;
  std::vector<std::int64_t> unlinear(std::int64_t p) const;
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// A scalar (rank 0, one element) or an array with its storage.
struct Field {
  BaseType type = BaseType::Real;
  Shape shape;
  std::vector<Word> data;

  static Field scalar(Value v);
  static Field array(BaseType type, Shape shape);
  bool is_scalar() const { return shape.rank() == 0; }
  Value at(std::int64_t p) const { return {type, data[static_cast<std::size_t>(p)]}; }
  void set(std::int64_t p, Value v) { data[static_cast<std::size_t>(p)] = convert(v, type).bits; }
  Value value() const { return at(0); }
  float real_at(std::int64_t p) const { return std::bit_cast<float>(data[static_cast<std::size_t>(p)]); }
  bool operator==(const Field&) const = default;
};

/// Named variables visible to the host program.
using HostState = std::map<std::string, Field>;

using ParamValues = std::map<std::string, Value>;

/// Evaluate a constant expression over literals and named PARAMETERs.
/// Returns nullopt when the expression is not constant.
std::optional<Value> const_eval(const ExprPtr& e, const ParamValues& params);

/// PARAMETER values of a unit in declaration order. `overrides` replaces
/// the value of any parameter with a matching name (converted to the
/// parameter's declared type).
ParamValues parameter_values(const SourceUnit& unit, const std::map<std::string, double>& overrides = {});

/// Declared or implicit type of `name` in `unit`.
BaseType type_of(const SourceUnit& unit, const std::string& name);

/// Units in the last place between two binary32 values; +0 and -0 are at
/// distance 0.
std::int64_t ulp_distance(float a, float b);

}  // namespace sf
