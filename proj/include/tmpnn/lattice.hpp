#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tmpnn/elements.hpp"
#include "tmpnn/error.hpp"

namespace tmpnn {

// Parsed lattice file.  `sequence` references definitions by name; the same
// definition may appear many times.
struct LatticeDoc {
  std::string title;
  int dim = 4;
  bool ring = false;
  std::vector<ElementSpec> definitions;
  std::vector<std::string> sequence;

  const ElementSpec* find(std::string_view name) const {
    for (const auto& d : definitions)
      if (d.name == name) return &d;
    return nullptr;
  }

  // Sequence with every reference resolved.
  std::vector<ElementSpec> elements() const {
    std::vector<ElementSpec> out;
    out.reserve(sequence.size());
    for (const auto& n : sequence) {
      const auto* d = find(n);
      if (!d) throw ParseError("unresolved element '" + n + "'");
      out.push_back(*d);
    }
    return out;
  }

  double total_length() const {
    double s = 0.0;
    for (const auto& e : elements()) s += e.length;
    return s;
  }

  friend bool operator==(const LatticeDoc&, const LatticeDoc&) = default;
};

namespace detail {

enum class Tok { ident, number, colon, comma, equals, lparen, rparen, semicolon, newline, end };

struct Token {
  Tok kind;
  std::string_view text;
  std::size_t line;
  std::size_t column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    for (;;) {
      if (pos_ >= src_.size()) return make(Tok::end, pos_, 0);
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (c == '\n') {
        Token t = make(Tok::newline, pos_, 1);
        advance();
        return t;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    const char c = src_[pos_];
    auto single = [&](Tok k) {
      Token t = make(k, start, 1);
      advance();
      return t;
    };
    switch (c) {
      case ':': return single(Tok::colon);
      case ',': return single(Tok::comma);
      case '=': return single(Tok::equals);
      case '(': return single(Tok::lparen);
      case ')': return single(Tok::rparen);
      case ';': return single(Tok::semicolon);
      default: break;
    }
    if (is_ident_start(c)) {
      Token t = make(Tok::ident, start, 0);
      while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
      t.text = src_.substr(start, pos_ - start);
      return t;
    }
    if (is_digit(c) || c == '.' || c == '-' || c == '+') {
      Token t = make(Tok::number, start, 0);
      while (pos_ < src_.size()) {
        const char d = src_[pos_];
        const bool exp_sign = (d == '-' || d == '+') && pos_ > start &&
                              (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E');
        if (is_digit(d) || d == '.' || d == 'e' || d == 'E' || exp_sign ||
            ((d == '-' || d == '+') && pos_ == start))
          advance();
        else
          break;
      }
      t.text = src_.substr(start, pos_ - start);
      return t;
    }
    throw ParseError(std::string("unexpected character '") + printable(c) + "'", line_, col_);
  }

 private:
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c) || c == '.'; }
  static std::string printable(char c) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x20 && u < 0x7f) return std::string(1, c);
    char buf[8];
    std::snprintf(buf, sizeof buf, "\\x%02x", u);
    return buf;
  }

  Token make(Tok k, std::size_t start, std::size_t len) {
    return {k, src_.substr(start, len), line_, col_};
  }
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class LatticeParser {
 public:
  explicit LatticeParser(std::string_view text) : lex_(text) { tok_ = lex_.next(); }

  LatticeDoc parse() {
    for (;;) {
      skip_terminators();
      if (tok_.kind == Tok::end) break;
      statement();
    }
    for (std::size_t i = 0; i < doc_.sequence.size(); ++i) {
      if (!doc_.find(doc_.sequence[i])) {
        const auto& at = seq_pos_[i];
        throw ParseError("unresolved element '" + doc_.sequence[i] + "'", at.first, at.second);
      }
    }
    double total = 0.0;
    for (const auto& n : doc_.sequence) total += doc_.find(n)->length;
    if (!std::isfinite(total)) throw ParseError("total lattice length is not finite");
    return doc_;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, const Token& t) const {
    throw ParseError(msg, t.line, t.column);
  }
  [[noreturn]] void fail(const std::string& msg) const { fail(msg, tok_); }

  void bump() { tok_ = lex_.next(); }

  Token expect(Tok k, const char* what) {
    if (tok_.kind != k) fail(std::string("expected ") + what + ", found " + describe(tok_));
    Token t = tok_;
    bump();
    return t;
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::ident: return "'" + std::string(t.text) + "'";
      case Tok::number: return "number " + std::string(t.text);
      case Tok::newline: return "end of line";
      case Tok::end: return "end of input";
      default: return "'" + std::string(t.text) + "'";
    }
  }

  void skip_terminators() {
    while (tok_.kind == Tok::newline || tok_.kind == Tok::semicolon) bump();
  }
  void skip_newlines() {
    while (tok_.kind == Tok::newline) bump();
  }

  void end_statement() {
    if (tok_.kind == Tok::semicolon || tok_.kind == Tok::newline || tok_.kind == Tok::end) {
      if (tok_.kind != Tok::end) bump();
      return;
    }
    fail("expected ';' or end of line, found " + describe(tok_));
  }

  double number(const Token& t) const {
    std::string_view s = t.text;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      fail("malformed number '" + std::string(t.text) + "'", t);
    if (!std::isfinite(v)) fail("number out of range '" + std::string(t.text) + "'", t);
    return v;
  }

  bool boolean(const Token& t) const {
    if (t.kind == Tok::ident && t.text == "true") return true;
    if (t.kind == Tok::ident && t.text == "false") return false;
    if (t.kind == Tok::number && t.text == "1") return true;
    if (t.kind == Tok::number && t.text == "0") return false;
    fail("expected true or false, found " + describe(t), t);
  }

  void statement() {
    const Token name = expect(Tok::ident, "element or sequence name");
    expect(Tok::colon, "':'");
    const Token kind = expect(Tok::ident, "element kind");
    if (kind.text == "sequence") {
      sequence(name);
      return;
    }
    ElementKind k;
    if (!element_kind_from_string(std::string(kind.text), k))
      fail("unknown element kind '" + std::string(kind.text) + "'", kind);
    if (names_.count(std::string(name.text)))
      fail("duplicate definition of '" + std::string(name.text) + "'", name);
    ElementSpec e;
    e.name = std::string(name.text);
    e.kind = k;
    std::set<std::string> seen;
    while (tok_.kind == Tok::comma) {
      bump();
      skip_newlines();
      const Token attr = expect(Tok::ident, "attribute name");
      expect(Tok::equals, "'='");
      const Token value = tok_;
      bump();
      const std::string a(attr.text);
      if (!seen.insert(a).second) fail("attribute '" + a + "' given twice", attr);
      set_attribute(e, a, attr, value);
    }
    end_statement();
    validate(e, name);
    names_.insert(e.name);
    doc_.definitions.push_back(std::move(e));
  }

  static bool allowed(ElementKind k, const std::string& a) {
    using K = ElementKind;
    if (a == "l") return true;
    if (a == "dx" || a == "dy") return k == K::quadrupole || k == K::sbend || k == K::sextupole;
    if (a == "k1" || a == "parametric") return k == K::quadrupole;
    if (a == "k2") return k == K::sextupole;
    if (a == "angle") return k == K::sbend;
    if (a == "kick") return k == K::hcorrector || k == K::vcorrector;
    if (a == "at") return k == K::monitor || k == K::marker;
    return false;
  }

  void set_attribute(ElementSpec& e, const std::string& a, const Token& attr, const Token& value) {
    static const std::set<std::string> known = {"l", "k1", "k2", "angle", "kick", "dx", "dy", "parametric", "at"};
    if (!known.count(a)) fail("unknown attribute '" + a + "' on '" + e.name + "'", attr);
    if (!allowed(e.kind, a))
      fail("attribute '" + a + "' is not valid for " + to_string(e.kind) + " '" + e.name + "'", attr);
    if (a == "parametric") {
      e.parametric = boolean(value);
      return;
    }
    if (value.kind != Tok::number) fail("expected a number for '" + a + "', found " + describe(value), value);
    const double v = number(value);
    if (a == "l") {
      if (v < 0) fail("negative length l=" + std::string(value.text) + " for element '" + e.name + "'", value);
      e.length = v;
    } else if (a == "dx") {
      e.dx = v;
    } else if (a == "dy") {
      e.dy = v;
    } else if (a == "at") {
      if (v < 0) fail("negative position at=" + std::string(value.text) + " for element '" + e.name + "'", value);
      e.at = v;
    } else {
      e.strength = v;
    }
  }

  void validate(const ElementSpec& e, const Token& where) const {
    using K = ElementKind;
    const bool zero_length = e.kind == K::monitor || e.kind == K::marker || e.kind == K::hcorrector ||
                             e.kind == K::vcorrector;
    if (zero_length && e.length != 0.0)
      fail(std::string(to_string(e.kind)) + " '" + e.name + "' must have l=0", where);
  }

  void sequence(const Token& name) {
    if (have_sequence_) fail("only one sequence is supported", name);
    have_sequence_ = true;
    doc_.title = std::string(name.text);
    std::set<std::string> seen;
    while (tok_.kind == Tok::comma) {
      bump();
      skip_newlines();
      const Token flag = expect(Tok::ident, "sequence flag");
      expect(Tok::equals, "'='");
      const Token value = tok_;
      bump();
      if (!seen.insert(std::string(flag.text)).second)
        fail("flag '" + std::string(flag.text) + "' given twice", flag);
      if (flag.text == "ring") {
        doc_.ring = boolean(value);
      } else if (flag.text == "dim") {
        if (value.kind != Tok::number || (value.text != "2" && value.text != "4"))
          fail("dim must be 2 or 4", value);
        doc_.dim = value.text == "2" ? 2 : 4;
      } else {
        fail("unknown sequence flag '" + std::string(flag.text) + "'", flag);
      }
    }
    expect(Tok::equals, "'='");
    skip_newlines();
    expect(Tok::lparen, "'('");
    skip_newlines();
    for (;;) {
      const Token item = expect(Tok::ident, "element name");
      doc_.sequence.emplace_back(item.text);
      seq_pos_.emplace_back(item.line, item.column);
      skip_newlines();
      if (tok_.kind == Tok::comma) {
        bump();
        skip_newlines();
        continue;
      }
      expect(Tok::rparen, "',' or ')'");
      break;
    }
    end_statement();
  }

  Lexer lex_;
  Token tok_{};
  LatticeDoc doc_;
  std::set<std::string> names_;
  std::vector<std::pair<std::size_t, std::size_t>> seq_pos_;
  bool have_sequence_ = false;
};

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace detail

inline LatticeDoc parse_lattice(std::string_view text) { return detail::LatticeParser(text).parse(); }

// Shortest round-trip text for the document.
inline std::string serialize_lattice(const LatticeDoc& doc) {
  using detail::format_double;
  std::string out;
  for (const auto& e : doc.definitions) {
    out += e.name + ": " + to_string(e.kind);
    const bool zero_length = e.kind == ElementKind::monitor || e.kind == ElementKind::marker ||
                             e.kind == ElementKind::hcorrector || e.kind == ElementKind::vcorrector;
    if (!zero_length) out += ", l=" + format_double(e.length);
    switch (e.kind) {
      case ElementKind::quadrupole: out += ", k1=" + format_double(e.strength); break;
      case ElementKind::sextupole: out += ", k2=" + format_double(e.strength); break;
      case ElementKind::sbend: out += ", angle=" + format_double(e.strength); break;
      case ElementKind::hcorrector:
      case ElementKind::vcorrector: out += ", kick=" + format_double(e.strength); break;
      default: break;
    }
    if (e.dx != 0.0) out += ", dx=" + format_double(e.dx);
    if (e.dy != 0.0) out += ", dy=" + format_double(e.dy);
    if (e.parametric) out += ", parametric=true";
    if (e.at >= 0.0) out += ", at=" + format_double(e.at);
    out += ";\n";
  }
  if (!doc.title.empty() || !doc.sequence.empty()) {
    out += (doc.title.empty() ? std::string("lattice") : doc.title) + ": sequence";
    if (doc.ring) out += ", ring=true";
    if (doc.dim != 4) out += ", dim=" + std::to_string(doc.dim);
    out += " = (";
    for (std::size_t i = 0; i < doc.sequence.size(); ++i) {
      if (i > 0) out += (i % 8 == 0) ? ",\n  " : ", ";
      out += doc.sequence[i];
    }
    out += ");\n";
  }
  return out;
}

// Replaces every drift followed by monitors/markers carrying `at=` with drift
// pieces around them.  Positions are measured from the start of that drift.
inline LatticeDoc split_at_monitors(const LatticeDoc& doc) {
  LatticeDoc out = doc;
  out.sequence.clear();
  std::set<std::string> names;
  for (const auto& d : doc.definitions) names.insert(d.name);
  std::map<std::pair<std::string, double>, std::string> pieces;
  auto piece = [&](const ElementSpec& parent, double length) {
    const auto key = std::make_pair(parent.name, length);
    if (auto it = pieces.find(key); it != pieces.end()) return it->second;
    std::string name;
    for (int i = 1;; ++i) {
      name = parent.name + "." + std::to_string(i);
      if (!names.count(name)) break;
    }
    names.insert(name);
    ElementSpec e = parent;
    e.name = name;
    e.length = length;
    out.definitions.push_back(e);
    pieces.emplace(key, name);
    return name;
  };
  for (auto& d : out.definitions) d.at = -1.0;

  const auto seq = doc.elements();
  std::size_t i = 0;
  while (i < seq.size()) {
    const auto& e = seq[i];
    auto positioned = [&](std::size_t j) {
      return j < seq.size() && (seq[j].kind == ElementKind::monitor || seq[j].kind == ElementKind::marker) &&
             seq[j].at >= 0.0;
    };
    if (positioned(i)) {
      throw BuildError("monitor '" + e.name + "' has a position but does not follow a drift");
    }
    if (e.kind != ElementKind::drift || !positioned(i + 1)) {
      out.sequence.push_back(e.name);
      ++i;
      continue;
    }
    double s = 0.0;
    std::size_t j = i + 1;
    for (; positioned(j); ++j) {
      const double at = seq[j].at;
      if (at < s || at > e.length)
        throw BuildError("monitor '" + seq[j].name + "' at=" + detail::format_double(at) +
                         " lies outside drift '" + e.name + "'");
      if (at > s) out.sequence.push_back(piece(e, at - s));
      out.sequence.push_back(seq[j].name);
      s = at;
    }
    if (e.length > s) out.sequence.push_back(piece(e, e.length - s));
    i = j;
  }
  return out;
}

enum class MergePolicy { per_element, minimal };

struct Segment {
  std::vector<std::size_t> elements;  // indices into LatticeDoc::elements()
  bool tap = false;
  bool trainable = false;
  bool parametric = false;
  std::string label;
};

struct SegmentPlan {
  std::vector<Segment> segments;
};

// per_element: one segment per magnet or drift.  minimal: one segment per
// stretch between monitors.  Correctors and parametric elements always get
// a segment of their own.  Monitors close the segment they end (tap) and are
// kept as its last element.
inline SegmentPlan plan_segments(const LatticeDoc& doc, MergePolicy policy) {
  const auto seq = doc.elements();
  SegmentPlan plan;
  Segment cur;
  auto flush = [&] {
    if (cur.elements.empty()) return;
    if (cur.label.empty()) cur.label = seq[cur.elements.back()].name;
    plan.segments.push_back(std::move(cur));
    cur = Segment{};
  };
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto& e = seq[i];
    switch (e.kind) {
      case ElementKind::monitor:
        if (cur.elements.empty() && !plan.segments.empty() && !plan.segments.back().tap &&
            !plan.segments.back().trainable && !plan.segments.back().parametric) {
          plan.segments.back().elements.push_back(i);
          plan.segments.back().tap = true;
          plan.segments.back().label = e.name;
          break;
        }
        cur.elements.push_back(i);
        cur.tap = true;
        cur.label = e.name;
        flush();
        break;
      case ElementKind::marker:
        if (cur.elements.empty() && !plan.segments.empty()) {
          plan.segments.back().elements.push_back(i);
        } else {
          cur.elements.push_back(i);
        }
        break;
      case ElementKind::hcorrector:
      case ElementKind::vcorrector:
        flush();
        cur.elements.push_back(i);
        cur.trainable = true;
        cur.label = e.name;
        flush();
        break;
      default:
        if (e.parametric) {
          flush();
          cur.elements.push_back(i);
          cur.parametric = true;
          cur.label = e.name;
          flush();
        } else if (policy == MergePolicy::per_element) {
          flush();
          cur.elements.push_back(i);
          cur.label = e.name;
          flush();
        } else {
          cur.elements.push_back(i);
        }
        break;
    }
  }
  flush();
  return plan;
}

}  // namespace tmpnn
