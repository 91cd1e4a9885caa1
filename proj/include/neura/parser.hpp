// Parser for the textual IR. The grammar is a frozen line-oriented subset:
//
//   module  := func+
//   func    := "func" "@"id "(" params? ")" ("->" type)? "{" block+ "}"
//   block   := label ("(" blockargs ")")? ":" op-line*
//   op-line := (results "=")? opcode items attrs? (":" types)?
//
// One op per line; comments run from "//" to end of line. Opcode names may
// carry the "neura." prefix (the printer always emits it). Values and blocks
// may use any names; they are renumbered canonically on print.
#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "neura/ir.hpp"

namespace neura {

class ParseError : public IrError {
public:
  ParseError(const SourceSpan &span, const std::string &msg)
      : IrError(span, msg) {}
};

namespace detail {

enum class TokKind {
  Ident,      // func, bb0, neura.add, i64
  ValueRef,   // %0, %arg0
  AtIdent,    // @main
  Int,        // 42, -7
  Float,      // 1.5, -2e3
  Str,        // "slt"
  Punct,      // ( ) { } < > , = : ! ->
  Newline,
  Eof,
};

struct Token {
  TokKind kind = TokKind::Eof;
  std::string text;
  int64_t intVal = 0;
  double floatVal = 0.0;
  SourceSpan span;
};

class Lexer {
public:
  Lexer(std::string text, std::string file)
      : text_(std::move(text)), file_(std::move(file)) {}

  std::vector<Token> run() {
    std::vector<Token> toks;
    bool lineHasContent = false;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\n') {
        if (lineHasContent) toks.push_back(make(TokKind::Newline, "\\n"));
        lineHasContent = false;
        advance();
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
        continue;
      }
      lineHasContent = true;
      if (c == '%') {
        toks.push_back(lexValueRef());
      } else if (c == '@') {
        toks.push_back(lexAtIdent());
      } else if (c == '"') {
        toks.push_back(lexString());
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        toks.push_back(lexIdent());
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '-' && pos_ + 1 < text_.size() &&
                  (std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
                   text_[pos_ + 1] == '.'))) {
        toks.push_back(lexNumber());
      } else if (c == '-' && pos_ + 1 < text_.size() &&
                 text_[pos_ + 1] == '>') {
        Token t = make(TokKind::Punct, "->");
        advance();
        advance();
        toks.push_back(t);
      } else if (std::string("(){}<>,=:!").find(c) != std::string::npos) {
        Token t = make(TokKind::Punct, std::string(1, c));
        advance();
        toks.push_back(t);
      } else {
        throw ParseError(here(), std::string("unexpected character '") + c +
                                     "'");
      }
    }
    if (lineHasContent) toks.push_back(make(TokKind::Newline, "\\n"));
    toks.push_back(make(TokKind::Eof, "<eof>"));
    return toks;
  }

private:
  SourceSpan here() const { return {file_, line_, col_}; }
  Token make(TokKind k, std::string text) const {
    Token t;
    t.kind = k;
    t.text = std::move(text);
    t.span = here();
    return t;
  }
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  Token lexIdent() {
    Token t = make(TokKind::Ident, "");
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
          c == '.') {
        t.text += c;
        advance();
      } else {
        break;
      }
    }
    return t;
  }

  Token lexValueRef() {
    Token t = make(TokKind::ValueRef, "%");
    advance();
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        t.text += c;
        advance();
      } else {
        break;
      }
    }
    if (t.text == "%") throw ParseError(t.span, "expected name after '%'");
    return t;
  }

  Token lexAtIdent() {
    Token t = make(TokKind::AtIdent, "");
    advance();
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        t.text += c;
        advance();
      } else {
        break;
      }
    }
    if (t.text.empty()) throw ParseError(t.span, "expected name after '@'");
    return t;
  }

  Token lexString() {
    Token t = make(TokKind::Str, "");
    advance();  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"' && text_[pos_] != '\n') {
      t.text += text_[pos_];
      advance();
    }
    if (pos_ >= text_.size() || text_[pos_] != '"')
      throw ParseError(t.span, "unterminated string literal");
    advance();
    return t;
  }

  Token lexNumber() {
    Token t = make(TokKind::Int, "");
    bool isFloat = false;
    if (text_[pos_] == '-') {
      t.text += '-';
      advance();
    }
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        t.text += c;
        advance();
      } else if (c == '.' || c == 'e' || c == 'E') {
        // Only part of the number when followed by a digit or sign.
        if (c == '.' &&
            (pos_ + 1 >= text_.size() ||
             !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))))
          break;
        isFloat = true;
        t.text += c;
        advance();
        if ((c == 'e' || c == 'E') && pos_ < text_.size() &&
            (text_[pos_] == '+' || text_[pos_] == '-')) {
          t.text += text_[pos_];
          advance();
        }
      } else {
        break;
      }
    }
    if (isFloat) {
      t.kind = TokKind::Float;
      t.floatVal = std::strtod(t.text.c_str(), nullptr);
    } else {
      t.intVal = std::strtoll(t.text.c_str(), nullptr, 10);
    }
    return t;
  }

  std::string text_;
  std::string file_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
public:
  Parser(std::string text, std::string file)
      : toks_(Lexer(std::move(text), file).run()), file_(std::move(file)) {}

  Module parseModule() {
    Module m;
    skipNewlines();
    if (peek().kind == TokKind::Eof)
      throw ParseError(peek().span, "expected 'func'");
    while (peek().kind != TokKind::Eof) {
      m.functions.push_back(parseFunction());
      skipNewlines();
    }
    return m;
  }

private:
  const Token &peek(int ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  Token eat() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  void skipNewlines() {
    while (peek().kind == TokKind::Newline) eat();
  }
  Token expect(TokKind k, const std::string &what) {
    if (peek().kind != k)
      throw ParseError(peek().span,
                       "expected " + what + ", got '" + peek().text + "'");
    return eat();
  }
  Token expectPunct(const std::string &p) {
    if (peek().kind != TokKind::Punct || peek().text != p)
      throw ParseError(peek().span,
                       "expected '" + p + "', got '" + peek().text + "'");
    return eat();
  }
  bool atPunct(const std::string &p) const {
    return peek().kind == TokKind::Punct && peek().text == p;
  }

  ScalarType parseScalarType() {
    Token t = expect(TokKind::Ident, "a type");
    if (t.text == "index") return ScalarType::index();
    if (t.text.size() >= 2 && (t.text[0] == 'i' || t.text[0] == 'f')) {
      std::string digits = t.text.substr(1);
      if (digits.find_first_not_of("0123456789") == std::string::npos) {
        int w = std::stoi(digits);
        if (t.text[0] == 'i' && (w == 1 || w == 32 || w == 64))
          return {TypeKind::Int, w};
        if (t.text[0] == 'f' && (w == 32 || w == 64))
          return {TypeKind::Float, w};
      }
    }
    throw ParseError(t.span, "unknown type '" + t.text + "'");
  }

  PredicatedType parseType() {
    if (atPunct("!")) {
      eat();
      Token kw = expect(TokKind::Ident, "'pred'");
      if (kw.text != "pred")
        throw ParseError(kw.span, "expected 'pred' after '!'");
      expectPunct("<");
      ScalarType inner = parseScalarType();
      expectPunct(">");
      return PredicatedType::pred(inner);
    }
    return PredicatedType::plain(parseScalarType());
  }

  ValueId valueFor(const std::string &name, const SourceSpan &span) {
    auto it = values_.find(name);
    if (it != values_.end()) return it->second;
    ValueId v = fn_->freshValue();
    values_[name] = v;
    pendingValues_[v] = span;  // must be defined somewhere in the function
    return v;
  }
  void defineValue(const std::string &name, ValueId v) {
    pendingValues_.erase(v);
    (void)name;
  }
  BlockId blockFor(const std::string &name) {
    auto it = blockIds_.find(name);
    if (it != blockIds_.end()) return it->second;
    BlockId b = fn_->freshBlock();
    blockIds_[name] = b;
    return b;
  }

  Attribute parseAttrValue() {
    Attribute a;
    if (peek().kind == TokKind::Int) {
      a = Attribute::intVal(eat().intVal);
    } else if (peek().kind == TokKind::Float) {
      a = Attribute::floatVal(eat().floatVal);
    } else if (peek().kind == TokKind::Str) {
      return Attribute::strVal(eat().text);
    } else if (peek().kind == TokKind::Ident &&
               (peek().text == "nan" || peek().text == "inf")) {
      a = Attribute::floatVal(peek().text == "nan"
                                  ? std::nan("")
                                  : std::numeric_limits<double>::infinity());
      eat();
    } else {
      throw ParseError(peek().span, "expected attribute literal");
    }
    if (atPunct(":")) {
      eat();
      a.type = parseScalarType();
    }
    return a;
  }

  Function parseFunction() {
    Function fn;
    fn_ = &fn;
    values_.clear();
    blockIds_.clear();
    pendingValues_.clear();

    Token kw = expect(TokKind::Ident, "'func'");
    if (kw.text != "func") throw ParseError(kw.span, "expected 'func'");
    Token name = expect(TokKind::AtIdent, "function name");
    fn.name = name.text;
    expectPunct("(");
    while (!atPunct(")")) {
      Token v = expect(TokKind::ValueRef, "parameter name");
      expectPunct(":");
      PredicatedType t = parseType();
      ValueId id = fn.freshValue();
      values_[v.text] = id;
      fn.params.push_back({id, t});
      if (atPunct(",")) eat();
    }
    expectPunct(")");
    if (atPunct("->")) {
      eat();
      fn.returnType = parseType();
    }
    expectPunct("{");
    skipNewlines();
    while (!atPunct("}")) parseBlock();
    expectPunct("}");
    if (peek().kind == TokKind::Newline) eat();

    if (!pendingValues_.empty()) {
      auto first = pendingValues_.begin();
      throw ParseError(first->second, "value referenced but never defined");
    }
    inferForm(fn);
    auto report = verify(fn);
    if (!report.empty())
      throw IrError("function @" + fn.name +
                    " parsed but is ill-formed:\n" + violationSummary(report));
    return fn;
  }

  void parseBlock() {
    Token label = expect(TokKind::Ident, "a block label");
    if (opcodeOf(label.text))
      throw ParseError(label.span,
                       "block label collides with opcode '" + label.text +
                           "'");
    Block b;
    b.id = blockFor(label.text);
    if (atPunct("(")) {
      eat();
      while (!atPunct(")")) {
        Token v = expect(TokKind::ValueRef, "block argument");
        expectPunct(":");
        PredicatedType t = parseType();
        ValueId id = valueFor(v.text, v.span);
        defineValue(v.text, id);
        b.args.push_back({id, t});
        if (atPunct(",")) eat();
      }
      expectPunct(")");
    }
    expectPunct(":");
    skipNewlines();
    while (!atPunct("}") && !isBlockHeader()) {
      b.ops.push_back(parseOperation());
      skipNewlines();
    }
    fn_->blocks.push_back(std::move(b));
  }

  static std::optional<Opcode> opcodeOf(const std::string &ident) {
    std::string name = ident;
    if (name.rfind("neura.", 0) == 0) name = name.substr(6);
    return opcodeByName(name);
  }

  bool isBlockHeader() const {
    return peek().kind == TokKind::Ident && !opcodeOf(peek().text);
  }

  Operation parseOperation() {
    Operation op;
    op.id = fn_->freshOp();
    op.span = peek().span;

    std::vector<std::string> resultNames;
    if (peek().kind == TokKind::ValueRef) {
      resultNames.push_back(eat().text);
      while (atPunct(",")) {
        eat();
        resultNames.push_back(expect(TokKind::ValueRef, "result name").text);
      }
      expectPunct("=");
    }

    Token opTok = expect(TokKind::Ident, "an opcode");
    auto opc = opcodeOf(opTok.text);
    if (!opc)
      throw ParseError(opTok.span, "unknown opcode '" + opTok.text + "'");
    op.opcode = *opc;

    // Items: operands, successors, and (for constant) an inline literal.
    bool expectItem = true;
    while (peek().kind != TokKind::Newline && !atPunct("{") &&
           !atPunct(":") && !atPunct("}")) {
      if (!expectItem) break;
      if (peek().kind == TokKind::ValueRef) {
        op.operands.push_back(valueFor(peek().text, peek().span));
        eat();
      } else if (peek().kind == TokKind::Ident) {
        SuccessorRef succ;
        succ.block = blockFor(eat().text);
        if (atPunct("(")) {
          eat();
          while (!atPunct(")")) {
            Token v = expect(TokKind::ValueRef, "successor argument");
            succ.args.push_back(valueFor(v.text, v.span));
            if (atPunct(",")) eat();
          }
          expectPunct(")");
        }
        op.successors.push_back(std::move(succ));
      } else if (peek().kind == TokKind::Int || peek().kind == TokKind::Float) {
        if (op.opcode != Opcode::Constant)
          throw ParseError(peek().span,
                           "inline literals are only valid on constant");
        Attribute a = peek().kind == TokKind::Int
                          ? Attribute::intVal(eat().intVal)
                          : Attribute::floatVal(eat().floatVal);
        op.attributes["value"] = a;
      } else {
        throw ParseError(peek().span, "expected operand, successor or '{'");
      }
      expectItem = atPunct(",");
      if (expectItem) eat();
    }

    if (atPunct("{")) {
      eat();
      while (!atPunct("}")) {
        Token key = expect(TokKind::Ident, "attribute name");
        expectPunct("=");
        op.attributes[key.text] = parseAttrValue();
        if (atPunct(",")) eat();
      }
      expectPunct("}");
    }

    std::vector<PredicatedType> resultTypes;
    if (atPunct(":")) {
      eat();
      resultTypes.push_back(parseType());
      while (atPunct(",")) {
        eat();
        resultTypes.push_back(parseType());
      }
    }
    if (resultTypes.size() != resultNames.size())
      throw ParseError(op.span, "result/type count mismatch");
    for (size_t i = 0; i < resultNames.size(); ++i) {
      ValueId v = valueFor(resultNames[i], op.span);
      defineValue(resultNames[i], v);
      op.results.push_back({v, resultTypes[i]});
    }
    // The inline constant literal inherits the result type.
    if (op.opcode == Opcode::Constant && op.hasAttr("value") &&
        !op.attributes["value"].type && !op.results.empty())
      op.attributes["value"].type = op.results[0].type.payload;

    if (peek().kind == TokKind::Newline) eat();
    return op;
  }

  // A parsed function is dataflow form when it is a single block free of
  // branches that either uses dataflow-only ops or is fully predicated.
  static void inferForm(Function &fn) {
    bool branches = false, dataflowOps = false, allPred = true, anyVal = false;
    for (const auto &b : fn.blocks) {
      for (const auto &op : b.ops) {
        if (isBranch(op.opcode)) branches = true;
        switch (op.opcode) {
        case Opcode::GrantOnce:
        case Opcode::GrantPredicate:
        case Opcode::Phi:
        case Opcode::Reserve:
        case Opcode::CtrlMov:
        case Opcode::LoopControl:
          dataflowOps = true;
          break;
        default: break;
        }
        for (const auto &r : op.results) {
          anyVal = true;
          allPred = allPred && r.type.predicated;
        }
      }
    }
    fn.form = (fn.blocks.size() == 1 && !branches &&
               (dataflowOps || (anyVal && allPred)))
                  ? IrForm::Dataflow
                  : IrForm::Cdfg;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  std::string file_;
  Function *fn_ = nullptr;
  std::unordered_map<std::string, ValueId> values_;
  std::unordered_map<std::string, BlockId> blockIds_;
  std::unordered_map<ValueId, SourceSpan> pendingValues_;
};

}  // namespace detail

inline Module parseModule(const std::string &text,
                          const std::string &file = "<memory>") {
  return detail::Parser(text, file).parseModule();
}

}  // namespace neura
