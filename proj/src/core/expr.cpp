#include "swarmlab/expr.hpp"

#include <charconv>
#include <cmath>
#include <system_error>
#include <utility>

namespace swarmlab::expr {

ParseError::ParseError(ParseErrorKind kind, std::size_t offset, std::string message,
                       std::vector<std::string> expected, std::string identifier)
    : Error(std::move(message)),
      kind_(kind),
      offset_(offset),
      expected_(std::move(expected)),
      identifier_(std::move(identifier)) {}

std::string_view to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::syntax: return "syntax";
    case ParseErrorKind::unknown_identifier: return "unknown_identifier";
    case ParseErrorKind::arity: return "arity";
  }
  return "syntax";
}

struct ObjectiveExpr::Impl {
  std::string source;
  std::vector<Node> nodes;
  std::size_t root = 0;
};

namespace {

enum class Tok { number, ident, plus, minus, star, slash, caret, lparen, rparen, comma, end, invalid };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string_view text;
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r')) {
      ++pos_;
    }
    const std::size_t start = pos_;
    if (pos_ >= src_.size()) return {Tok::end, start, {}};
    const char c = src_[pos_];
    auto single = [&](Tok k) {
      ++pos_;
      return Token{k, start, src_.substr(start, 1)};
    };
    switch (c) {
      case '+': return single(Tok::plus);
      case '-': return single(Tok::minus);
      case '*': return single(Tok::star);
      case '/': return single(Tok::slash);
      case '^': return single(Tok::caret);
      case '(': return single(Tok::lparen);
      case ')': return single(Tok::rparen);
      case ',': return single(Tok::comma);
      default: break;
    }
    if (is_digit(c) || (c == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
      while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t p = pos_ + 1;
        if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
        if (p < src_.size() && is_digit(src_[p])) {
          while (p < src_.size() && is_digit(src_[p])) ++p;
          pos_ = p;
        }
      }
      return {Tok::number, start, src_.substr(start, pos_ - start)};
    }
    if (is_ident_start(c)) {
      while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
      return {Tok::ident, start, src_.substr(start, pos_ - start)};
    }
    ++pos_;
    return {Tok::invalid, start, src_.substr(start, 1)};
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
};

struct FunctionName {
  std::string_view name;
  Function fn;
};

constexpr FunctionName kFunctions[] = {
    {"sin", Function::sin}, {"cos", Function::cos},   {"exp", Function::exp},
    {"sqrt", Function::sqrt}, {"abs", Function::abs},
};

const std::vector<std::string> kOperandStart = {"number", "identifier", "(", "-"};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src), lexer_(src) { advance(); }

  std::size_t parse_all() {
    const std::size_t root = sum();
    if (tok_.kind != Tok::end) fail_unexpected({"operator", "end of input"});
    return root;
  }

  std::vector<Node> take_nodes() { return std::move(nodes_); }

 private:
  void advance() { tok_ = lexer_.next(); }

  [[noreturn]] void fail_unexpected(std::vector<std::string> expected) {
    std::string found = tok_.kind == Tok::end ? std::string("end of input")
                                              : "'" + std::string(tok_.text) + "'";
    std::string msg = "syntax error at offset " + std::to_string(tok_.offset) + ": unexpected " +
                      found + ", expected one of:";
    for (std::size_t i = 0; i < expected.size(); ++i) msg += (i ? ", " : " ") + expected[i];
    throw ParseError(ParseErrorKind::syntax, tok_.offset, std::move(msg), std::move(expected));
  }

  std::size_t push(Node n) {
    nodes_.push_back(n);
    return nodes_.size() - 1;
  }

  std::size_t binary(BinaryOp op, std::size_t lhs, std::size_t rhs, std::size_t offset) {
    Node n;
    n.kind = NodeKind::binary;
    n.op = op;
    n.lhs = static_cast<std::int32_t>(lhs);
    n.rhs = static_cast<std::int32_t>(rhs);
    n.offset = offset;
    return push(n);
  }

  std::size_t sum() {
    std::size_t lhs = product();
    while (tok_.kind == Tok::plus || tok_.kind == Tok::minus) {
      const BinaryOp op = tok_.kind == Tok::plus ? BinaryOp::add : BinaryOp::sub;
      const std::size_t at = tok_.offset;
      advance();
      lhs = binary(op, lhs, product(), at);
    }
    return lhs;
  }

  std::size_t product() {
    std::size_t lhs = unary();
    while (tok_.kind == Tok::star || tok_.kind == Tok::slash) {
      const BinaryOp op = tok_.kind == Tok::star ? BinaryOp::mul : BinaryOp::div;
      const std::size_t at = tok_.offset;
      advance();
      lhs = binary(op, lhs, unary(), at);
    }
    return lhs;
  }

  std::size_t unary() {
    if (tok_.kind == Tok::minus) {
      const std::size_t at = tok_.offset;
      advance();
      const std::size_t operand = unary();
      Node n;
      n.kind = NodeKind::negate;
      n.lhs = static_cast<std::int32_t>(operand);
      n.offset = at;
      return push(n);
    }
    return power();
  }

  std::size_t power() {
    const std::size_t base = primary();
    if (tok_.kind == Tok::caret) {
      const std::size_t at = tok_.offset;
      advance();
      return binary(BinaryOp::pow, base, unary(), at);
    }
    return base;
  }

  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind) fail_unexpected({what});
    advance();
  }

  std::size_t primary() {
    const Token t = tok_;
    switch (t.kind) {
      case Tok::number: {
        double v = 0.0;
        const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc() || !std::isfinite(v)) {
          throw ParseError(ParseErrorKind::syntax, t.offset,
                           "number out of range at offset " + std::to_string(t.offset), {"number"});
        }
        advance();
        Node n;
        n.kind = NodeKind::constant;
        n.value = v;
        n.offset = t.offset;
        return push(n);
      }
      case Tok::ident: {
        advance();
        if (t.text == "x" || t.text == "y") {
          Node n;
          n.kind = NodeKind::variable;
          n.variable = t.text == "x" ? Variable::x : Variable::y;
          n.offset = t.offset;
          return push(n);
        }
        for (const auto& f : kFunctions) {
          if (f.name == t.text) return call(f, t);
        }
        throw ParseError(ParseErrorKind::unknown_identifier, t.offset,
                         "unknown identifier '" + std::string(t.text) + "' at offset " +
                             std::to_string(t.offset),
                         {}, std::string(t.text));
      }
      case Tok::lparen: {
        advance();
        const std::size_t inner = sum();
        expect(Tok::rparen, ")");
        return inner;
      }
      default:
        fail_unexpected(kOperandStart);
    }
  }

  std::size_t call(const FunctionName& f, const Token& name) {
    expect(Tok::lparen, "(");
    std::size_t argc = 0;
    std::size_t arg = 0;
    if (tok_.kind != Tok::rparen) {
      arg = sum();
      ++argc;
      while (tok_.kind == Tok::comma) {
        advance();
        sum();
        ++argc;
      }
    }
    if (tok_.kind != Tok::rparen) fail_unexpected({")", ","});
    advance();
    if (argc != 1) {
      throw ParseError(ParseErrorKind::arity, name.offset,
                       "function '" + std::string(f.name) + "' expects 1 argument, got " +
                           std::to_string(argc),
                       {}, std::string(f.name));
    }
    Node n;
    n.kind = NodeKind::call;
    n.function = f.fn;
    n.lhs = static_cast<std::int32_t>(arg);
    n.offset = name.offset;
    return push(n);
  }

  std::string_view src_;
  Lexer lexer_;
  Token tok_{Tok::end, 0, {}};
  std::vector<Node> nodes_;
};

double eval_node(const std::vector<Node>& nodes, std::size_t i, double x, double y) {
  const Node& n = nodes[i];
  switch (n.kind) {
    case NodeKind::constant: return n.value;
    case NodeKind::variable: return n.variable == Variable::x ? x : y;
    case NodeKind::negate: return -eval_node(nodes, static_cast<std::size_t>(n.lhs), x, y);
    case NodeKind::call: {
      const double a = eval_node(nodes, static_cast<std::size_t>(n.lhs), x, y);
      switch (n.function) {
        case Function::sin: return std::sin(a);
        case Function::cos: return std::cos(a);
        case Function::exp: return std::exp(a);
        case Function::sqrt: return std::sqrt(a);
        case Function::abs: return std::fabs(a);
      }
      return a;
    }
    case NodeKind::binary: {
      const double a = eval_node(nodes, static_cast<std::size_t>(n.lhs), x, y);
      const double b = eval_node(nodes, static_cast<std::size_t>(n.rhs), x, y);
      switch (n.op) {
        case BinaryOp::add: return a + b;
        case BinaryOp::sub: return a - b;
        case BinaryOp::mul: return a * b;
        case BinaryOp::div: return a / b;
        case BinaryOp::pow: return b == 2.0 ? a * a : std::pow(a, b);
      }
      return a;
    }
  }
  return 0.0;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return "+";
    case BinaryOp::sub: return "-";
    case BinaryOp::mul: return "*";
    case BinaryOp::div: return "/";
    case BinaryOp::pow: return "^";
  }
  return "?";
}

std::string_view op_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::add: return "Add";
    case BinaryOp::sub: return "Sub";
    case BinaryOp::mul: return "Mul";
    case BinaryOp::div: return "Div";
    case BinaryOp::pow: return "Pow";
  }
  return "?";
}

std::string_view function_name(Function f) {
  for (const auto& entry : kFunctions) {
    if (entry.fn == f) return entry.name;
  }
  return "?";
}

void write_canonical(const std::vector<Node>& nodes, std::size_t i, std::string& out) {
  const Node& n = nodes[i];
  switch (n.kind) {
    case NodeKind::constant: out += format_number(n.value); return;
    case NodeKind::variable: out += n.variable == Variable::x ? 'x' : 'y'; return;
    case NodeKind::negate:
      out += "(-";
      write_canonical(nodes, static_cast<std::size_t>(n.lhs), out);
      out += ')';
      return;
    case NodeKind::call:
      out += function_name(n.function);
      out += '(';
      write_canonical(nodes, static_cast<std::size_t>(n.lhs), out);
      out += ')';
      return;
    case NodeKind::binary:
      out += '(';
      write_canonical(nodes, static_cast<std::size_t>(n.lhs), out);
      out += ' ';
      out += op_symbol(n.op);
      out += ' ';
      write_canonical(nodes, static_cast<std::size_t>(n.rhs), out);
      out += ')';
      return;
  }
}

void write_structure(const std::vector<Node>& nodes, std::size_t i, std::string& out) {
  const Node& n = nodes[i];
  switch (n.kind) {
    case NodeKind::constant: out += format_number(n.value); return;
    case NodeKind::variable: out += n.variable == Variable::x ? 'x' : 'y'; return;
    case NodeKind::negate:
      out += "Neg(";
      write_structure(nodes, static_cast<std::size_t>(n.lhs), out);
      out += ')';
      return;
    case NodeKind::call: {
      std::string name(function_name(n.function));
      name[0] = static_cast<char>(name[0] - 'a' + 'A');
      out += name;
      out += '(';
      write_structure(nodes, static_cast<std::size_t>(n.lhs), out);
      out += ')';
      return;
    }
    case NodeKind::binary:
      out += op_name(n.op);
      out += '(';
      write_structure(nodes, static_cast<std::size_t>(n.lhs), out);
      out += ", ";
      write_structure(nodes, static_cast<std::size_t>(n.rhs), out);
      out += ')';
      return;
  }
}

bool equal_nodes(const std::vector<Node>& a, std::size_t i, const std::vector<Node>& b, std::size_t j) {
  const Node& p = a[i];
  const Node& q = b[j];
  if (p.kind != q.kind) return false;
  switch (p.kind) {
    case NodeKind::constant: return p.value == q.value;
    case NodeKind::variable: return p.variable == q.variable;
    case NodeKind::negate:
      return equal_nodes(a, static_cast<std::size_t>(p.lhs), b, static_cast<std::size_t>(q.lhs));
    case NodeKind::call:
      return p.function == q.function &&
             equal_nodes(a, static_cast<std::size_t>(p.lhs), b, static_cast<std::size_t>(q.lhs));
    case NodeKind::binary:
      return p.op == q.op &&
             equal_nodes(a, static_cast<std::size_t>(p.lhs), b, static_cast<std::size_t>(q.lhs)) &&
             equal_nodes(a, static_cast<std::size_t>(p.rhs), b, static_cast<std::size_t>(q.rhs));
  }
  return false;
}

}  // namespace

ObjectiveExpr::ObjectiveExpr(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

ObjectiveExpr ObjectiveExpr::parse(std::string_view source) {
  if (source.empty()) {
    throw ParseError(ParseErrorKind::syntax, 0, "empty expression", kOperandStart);
  }
  Parser parser(source);
  auto impl = std::make_shared<Impl>();
  impl->source = std::string(source);
  impl->root = parser.parse_all();
  impl->nodes = parser.take_nodes();
  return ObjectiveExpr(std::move(impl));
}

double ObjectiveExpr::evaluate(double x, double y) const { return eval_node(impl_->nodes, impl_->root, x, y); }

const std::string& ObjectiveExpr::source() const { return impl_->source; }

std::string ObjectiveExpr::canonical() const {
  std::string out;
  write_canonical(impl_->nodes, impl_->root, out);
  return out;
}

std::string ObjectiveExpr::structure() const {
  std::string out;
  write_structure(impl_->nodes, impl_->root, out);
  return out;
}

std::span<const Node> ObjectiveExpr::nodes() const { return impl_->nodes; }

std::size_t ObjectiveExpr::root() const { return impl_->root; }

bool ObjectiveExpr::structurally_equal(const ObjectiveExpr& other) const {
  return equal_nodes(impl_->nodes, impl_->root, other.impl_->nodes, other.impl_->root);
}

const std::vector<CatalogEntry>& builtin_catalog() {
  static const std::vector<CatalogEntry> catalog = {
      {"sphere", "x^2+y^2"},
      {"bowl_0_100", "x^2+(y-100)^2"},
      {"bowl_234_-100", "(x-234)^2+(y+100)^2"},
      {"booth", "(x+2*y-7)^2+(2*x+y-5)^2"},
      {"matyas", "0.26*(x^2+y^2)-0.48*x*y"},
      {"himmelblau", "(x^2+y-11)^2+(x+y^2-7)^2"},
      {"rastrigin", "20+x^2-10*cos(2*3.141592653589793*x)+y^2-10*cos(2*3.141592653589793*y)"},
  };
  return catalog;
}

}  // namespace swarmlab::expr
