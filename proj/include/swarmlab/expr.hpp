#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swarmlab/error.hpp"

namespace swarmlab::expr {

enum class NodeKind : std::uint8_t { constant, variable, negate, binary, call };
enum class Variable : std::uint8_t { x, y };
enum class BinaryOp : std::uint8_t { add, sub, mul, div, pow };
enum class Function : std::uint8_t { sin, cos, exp, sqrt, abs };

/// One node of an expression tree. Nodes live in a flat array owned by the
/// expression; children are referenced by index.
struct Node {
  NodeKind kind = NodeKind::constant;
  double value = 0.0;             // constant
  Variable variable = Variable::x;
  BinaryOp op = BinaryOp::add;
  Function function = Function::sin;
  std::int32_t lhs = -1;          // negate/call operand, binary left
  std::int32_t rhs = -1;          // binary right
  std::size_t offset = 0;         // byte offset of the node's token in the source
};

enum class ParseErrorKind { syntax, unknown_identifier, arity };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::size_t offset, std::string message,
             std::vector<std::string> expected = {}, std::string identifier = {});

  ParseErrorKind kind() const { return kind_; }
  /// Byte offset into the source; always within [0, source length].
  std::size_t offset() const { return offset_; }
  /// Token classes that would have been accepted at offset (syntax errors).
  const std::vector<std::string>& expected() const { return expected_; }
  /// The offending name (unknown identifier and arity errors).
  const std::string& identifier() const { return identifier_; }

 private:
  ParseErrorKind kind_;
  std::size_t offset_;
  std::vector<std::string> expected_;
  std::string identifier_;
};

/// An immutable parsed objective f(x, y). Cheap to copy; safe to evaluate
/// concurrently from any number of threads.
class ObjectiveExpr {
 public:
  /// Grammar, loosest to tightest:
  ///   sum     := product (('+' | '-') product)*
  ///   product := unary (('*' | '/') unary)*
  ///   unary   := '-' unary | power
  ///   power   := primary ('^' unary)?          (right-associative)
  ///   primary := number | 'x' | 'y' | func '(' sum ')' | '(' sum ')'
  ///   func    := sin | cos | exp | sqrt | abs
  /// Throws ParseError.
  static ObjectiveExpr parse(std::string_view source);

  /// IEEE double evaluation. Never throws; non-finite results are returned
  /// as-is for the caller to police.
  double evaluate(double x, double y) const;
  double operator()(double x, double y) const { return evaluate(x, y); }

  const std::string& source() const;

  /// Fully parenthesized infix text, e.g. "((x ^ 2) + ((y - 100) ^ 2))".
  /// Constants use the shortest round-trip decimal form, so parsing the
  /// canonical text reproduces bit-identical evaluation.
  std::string canonical() const;

  /// Constructor-style dump, e.g. "Add(Pow(x, 2), Pow(Sub(y, 100), 2))".
  std::string structure() const;

  std::span<const Node> nodes() const;
  std::size_t root() const;

  /// Same tree shape, operators, variables and constant values. Source
  /// offsets are ignored.
  bool structurally_equal(const ObjectiveExpr& other) const;

 private:
  struct Impl;
  explicit ObjectiveExpr(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

inline ObjectiveExpr parse(std::string_view source) { return ObjectiveExpr::parse(source); }
inline double evaluate(const ObjectiveExpr& e, double x, double y) { return e.evaluate(x, y); }

struct CatalogEntry {
  std::string name;
  std::string source;
};

/// Built-in objectives offered by the function picker. Ordering is stable.
const std::vector<CatalogEntry>& builtin_catalog();

std::string_view to_string(ParseErrorKind kind);

}  // namespace swarmlab::expr

namespace swarmlab {
using expr::ObjectiveExpr;
}
