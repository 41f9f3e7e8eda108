#include "sqg/regex.hpp"

#include <algorithm>
#include <memory>

#include "sqg/error.hpp"

namespace sqg {

char32_t decode_utf8(std::string_view text, std::size_t pos, std::size_t* length) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= text.size()) return -1;
    const auto b = static_cast<unsigned char>(text[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    *length = 1;
    return b0;
  }
  int need = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    need = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    need = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    need = 3;
    cp = b0 & 0x07;
  } else {
    *length = 1;
    return b0;
  }
  for (int i = 1; i <= need; ++i) {
    const int c = cont(static_cast<std::size_t>(i));
    if (c < 0) {
      *length = 1;
      return b0;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  *length = static_cast<std::size_t>(need) + 1;
  return cp;
}

namespace {

constexpr int kMaxRepeat = 1000;
constexpr std::size_t kMaxProgram = 20000;
constexpr char32_t kMaxCodePoint = 0x10FFFF;

using Range = Regex::Range;

struct Node {
  enum class Kind { kEmpty, kClass, kAny, kBol, kEol, kConcat, kAlt, kRepeat };
  Kind kind = Kind::kEmpty;
  std::vector<Range> ranges;
  bool negated = false;
  std::vector<std::unique_ptr<Node>> children;
  int min = 0;
  int max = 0;  // -1 = unbounded
  bool greedy = true;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make(Node::Kind kind) {
  auto n = std::make_unique<Node>();
  n->kind = kind;
  return n;
}

void append_class(std::string_view name, std::vector<Range>* out) {
  if (name == "d") {
    out->push_back({'0', '9'});
  } else if (name == "w") {
    out->insert(out->end(), {{'0', '9'},
                             {'A', 'Z'},
                             {'_', '_'},
                             {'a', 'z'},
                             {0x1100, 0x11FF},
                             {0x3130, 0x318F},
                             {0xAC00, 0xD7A3}});
  } else if (name == "s") {
    out->insert(out->end(), {{'\t', '\r'}, {' ', ' '}});
  }
}

std::vector<Range> normalize(std::vector<Range> ranges) {
  std::sort(ranges.begin(), ranges.end(), [](Range a, Range b) { return a.lo < b.lo; });
  std::vector<Range> out;
  for (const Range r : ranges) {
    if (!out.empty() && r.lo <= out.back().hi + 1) {
      out.back().hi = std::max(out.back().hi, r.hi);
    } else {
      out.push_back(r);
    }
  }
  return out;
}

std::vector<Range> complement(const std::vector<Range>& ranges) {
  std::vector<Range> out;
  char32_t next = 0;
  for (const Range r : normalize(ranges)) {
    if (r.lo > next) out.push_back({next, r.lo - 1});
    next = r.hi + 1;
  }
  if (next <= kMaxCodePoint) out.push_back({next, kMaxCodePoint});
  return out;
}

std::vector<Range> fold_ascii(const std::vector<Range>& ranges) {
  std::vector<Range> out = ranges;
  for (const Range r : ranges) {
    const char32_t lo_l = std::max<char32_t>(r.lo, 'a'), hi_l = std::min<char32_t>(r.hi, 'z');
    if (lo_l <= hi_l) out.push_back({lo_l - 32, hi_l - 32});
    const char32_t lo_u = std::max<char32_t>(r.lo, 'A'), hi_u = std::min<char32_t>(r.hi, 'Z');
    if (lo_u <= hi_u) out.push_back({lo_u + 32, hi_u + 32});
  }
  return normalize(std::move(out));
}

class Parser {
 public:
  explicit Parser(std::string_view pattern) {
    for (std::size_t i = 0; i < pattern.size();) {
      std::size_t len = 1;
      cps_.push_back(decode_utf8(pattern, i, &len));
      i += len;
    }
  }

  bool case_insensitive() const { return case_insensitive_; }

  NodePtr parse() {
    if (lookahead("(?i)")) {
      pos_ += 4;
      case_insensitive_ = true;
    }
    NodePtr n = parse_alt();
    if (pos_ < cps_.size()) fail("unmatched ')'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::kInvalidPattern, why + " at position " + std::to_string(pos_));
  }

  bool at_end() const { return pos_ >= cps_.size(); }
  char32_t peek() const { return cps_[pos_]; }
  bool lookahead(std::string_view s) const {
    if (pos_ + s.size() > cps_.size()) return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (cps_[pos_ + i] != static_cast<char32_t>(s[i])) return false;
    }
    return true;
  }

  NodePtr parse_alt() {
    NodePtr first = parse_concat();
    if (at_end() || peek() != '|') return first;
    auto alt = make(Node::Kind::kAlt);
    alt->children.push_back(std::move(first));
    while (!at_end() && peek() == '|') {
      ++pos_;
      alt->children.push_back(parse_concat());
    }
    return alt;
  }

  NodePtr parse_concat() {
    auto cat = make(Node::Kind::kConcat);
    while (!at_end() && peek() != '|' && peek() != ')') {
      cat->children.push_back(parse_repeat());
    }
    return cat;
  }

  // Parses "{n}", "{n,}", "{n,m}" at pos_; leaves pos_ untouched and
  // returns false if the brace does not start a quantifier.
  bool parse_braces(int* min, int* max) {
    std::size_t p = pos_ + 1;
    auto number = [&](int* out) {
      const std::size_t start = p;
      long v = 0;
      while (p < cps_.size() && cps_[p] >= '0' && cps_[p] <= '9') {
        v = v * 10 + static_cast<long>(cps_[p] - '0');
        if (v > kMaxRepeat) fail("repeat count exceeds " + std::to_string(kMaxRepeat));
        ++p;
      }
      *out = static_cast<int>(v);
      return p > start;
    };
    if (!number(min)) return false;
    if (p < cps_.size() && cps_[p] == '}') {
      *max = *min;
    } else if (p < cps_.size() && cps_[p] == ',') {
      ++p;
      if (p < cps_.size() && cps_[p] == '}') {
        *max = -1;
      } else if (!number(max) || p >= cps_.size() || cps_[p] != '}') {
        return false;
      }
    } else {
      return false;
    }
    if (*max != -1 && *max < *min) fail("repeat bounds out of order");
    pos_ = p + 1;
    return true;
  }

  NodePtr parse_repeat() {
    NodePtr atom = parse_atom();
    while (!at_end()) {
      int min = 0, max = 0;
      const char32_t c = peek();
      if (c == '*') {
        min = 0, max = -1, ++pos_;
      } else if (c == '+') {
        min = 1, max = -1, ++pos_;
      } else if (c == '?') {
        min = 0, max = 1, ++pos_;
      } else if (c == '{' && parse_braces(&min, &max)) {
      } else {
        break;
      }
      if (atom->kind == Node::Kind::kBol || atom->kind == Node::Kind::kEol) {
        fail("quantifier applied to an anchor");
      }
      if (atom->kind == Node::Kind::kRepeat) fail("nested quantifier");
      auto rep = make(Node::Kind::kRepeat);
      rep->min = min;
      rep->max = max;
      if (!at_end() && peek() == '?') {
        rep->greedy = false;
        ++pos_;
      }
      rep->children.push_back(std::move(atom));
      atom = std::move(rep);
    }
    return atom;
  }

  char32_t parse_escape_literal(char32_t c) {
    switch (c) {
      case 'n': return '\n';
      case 't': return '\t';
      case 'r': return '\r';
      case 'f': return '\f';
      case 'v': return '\v';
      default: break;
    }
    if (c >= '1' && c <= '9') fail("backreferences are not supported");
    if (c == 'b' || c == 'B') fail("word boundaries are not supported");
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) {
      fail(std::string("unknown escape \\") + static_cast<char>(c));
    }
    return c;
  }

  // Handles \d \w \s and their negations; returns false if `c` is not a class escape.
  bool class_escape(char32_t c, std::vector<Range>* ranges) {
    const char lower = static_cast<char>(c | 0x20);
    if (c >= 0x80 || (lower != 'd' && lower != 'w' && lower != 's')) return false;
    std::vector<Range> base;
    append_class(std::string_view(&lower, 1), &base);
    if (c >= 'A' && c <= 'Z') base = complement(base);
    ranges->insert(ranges->end(), base.begin(), base.end());
    return true;
  }

  NodePtr parse_atom() {
    if (at_end()) fail("unexpected end of pattern");
    const char32_t c = peek();
    switch (c) {
      case '(': {
        ++pos_;
        if (lookahead("?:")) {
          pos_ += 2;
        } else if (!at_end() && peek() == '?') {
          fail("unsupported group construct");
        }
        NodePtr inner = parse_alt();
        if (at_end() || peek() != ')') fail("missing ')'");
        ++pos_;
        return inner;
      }
      case ')': fail("unmatched ')'");
      case '*':
      case '+':
      case '?': fail("quantifier without operand");
      case '.': ++pos_; return make(Node::Kind::kAny);
      case '^': ++pos_; return make(Node::Kind::kBol);
      case '$': ++pos_; return make(Node::Kind::kEol);
      case '[': return parse_class();
      case '\\': {
        ++pos_;
        if (at_end()) fail("trailing backslash");
        const char32_t e = peek();
        ++pos_;
        auto n = make(Node::Kind::kClass);
        if (!class_escape(e, &n->ranges)) {
          const char32_t lit = parse_escape_literal(e);
          n->ranges.push_back({lit, lit});
        }
        return n;
      }
      default: {
        ++pos_;
        auto n = make(Node::Kind::kClass);
        n->ranges.push_back({c, c});
        return n;
      }
    }
  }

  char32_t class_char() {
    if (at_end()) fail("missing ']'");
    char32_t c = peek();
    ++pos_;
    if (c == '\\') {
      if (at_end()) fail("trailing backslash");
      c = peek();
      ++pos_;
      return parse_escape_literal(c);
    }
    return c;
  }

  NodePtr parse_class() {
    ++pos_;  // '['
    auto n = make(Node::Kind::kClass);
    if (!at_end() && peek() == '^') {
      n->negated = true;
      ++pos_;
    }
    bool first = true;
    while (true) {
      if (at_end()) fail("missing ']'");
      if (peek() == ']') {
        if (first) fail("empty character class");
        ++pos_;
        break;
      }
      first = false;
      if (peek() == '\\' && pos_ + 1 < cps_.size() && class_escape(cps_[pos_ + 1], &n->ranges)) {
        pos_ += 2;
        continue;
      }
      const char32_t lo = class_char();
      if (!at_end() && peek() == '-' && pos_ + 1 < cps_.size() && cps_[pos_ + 1] != ']') {
        ++pos_;
        const char32_t hi = class_char();
        if (hi < lo) fail("character range out of order");
        n->ranges.push_back({lo, hi});
      } else {
        n->ranges.push_back({lo, lo});
      }
    }
    return n;
  }

  std::vector<char32_t> cps_;
  std::size_t pos_ = 0;
  bool case_insensitive_ = false;
};

using Inst = Regex::Inst;
using Op = Regex::Op;

class Compiler {
 public:
  Compiler(std::vector<Inst>* program, std::vector<Range>* ranges, bool fold)
      : prog_(*program), ranges_(*ranges), fold_(fold) {}

  void emit_node(const Node& n) {
    if (prog_.size() > kMaxProgram) {
      throw Error(ErrorCode::kInvalidPattern, "pattern too large");
    }
    switch (n.kind) {
      case Node::Kind::kEmpty: break;
      case Node::Kind::kAny: {
        // '.' excludes newline.
        add_class({{'\n', '\n'}}, true);
        break;
      }
      case Node::Kind::kClass: add_class(n.ranges, n.negated); break;
      case Node::Kind::kBol: prog_.push_back({Op::kBol}); break;
      case Node::Kind::kEol: prog_.push_back({Op::kEol}); break;
      case Node::Kind::kConcat:
        for (const auto& c : n.children) emit_node(*c);
        break;
      case Node::Kind::kAlt: emit_alt(n, 0); break;
      case Node::Kind::kRepeat: emit_repeat(n); break;
    }
  }

 private:
  int pc() const { return static_cast<int>(prog_.size()); }

  void add_class(std::vector<Range> ranges, bool negated) {
    ranges = fold_ ? fold_ascii(ranges) : normalize(std::move(ranges));
    Inst inst{Op::kClass, negated, static_cast<int>(ranges_.size()),
              static_cast<int>(ranges.size())};
    ranges_.insert(ranges_.end(), ranges.begin(), ranges.end());
    prog_.push_back(inst);
  }

  void emit_alt(const Node& n, std::size_t i) {
    if (i + 1 == n.children.size()) {
      emit_node(*n.children[i]);
      return;
    }
    const int split = pc();
    prog_.push_back({Op::kSplit});
    prog_[split].x = pc();
    emit_node(*n.children[i]);
    const int jmp = pc();
    prog_.push_back({Op::kJmp});
    prog_[split].y = pc();
    emit_alt(n, i + 1);
    prog_[jmp].x = pc();
  }

  // Split whose preferred branch is `body` when greedy.
  void set_split(int split, int body, int skip, bool greedy) {
    prog_[split].x = greedy ? body : skip;
    prog_[split].y = greedy ? skip : body;
  }

  void emit_repeat(const Node& n) {
    const Node& body = *n.children[0];
    for (int i = 0; i < n.min; ++i) emit_node(body);
    if (n.max == -1) {
      // L: split body, out; body; jmp L
      const int split = pc();
      prog_.push_back({Op::kSplit});
      emit_node(body);
      prog_.push_back({Op::kJmp, false, split});
      set_split(split, split + 1, pc(), n.greedy);
      return;
    }
    std::vector<int> splits;
    for (int i = n.min; i < n.max; ++i) {
      const int split = pc();
      splits.push_back(split);
      prog_.push_back({Op::kSplit});
      emit_node(body);
      prog_[split].x = split + 1;
    }
    const int out = pc();
    for (const int s : splits) set_split(s, s + 1, out, n.greedy);
  }

  std::vector<Inst>& prog_;
  std::vector<Range>& ranges_;
  bool fold_;
};

bool in_ranges(const std::vector<Range>& ranges, int first, int count, char32_t c) {
  const auto begin = ranges.begin() + first;
  const auto end = begin + count;
  auto it = std::upper_bound(begin, end, c, [](char32_t v, Range r) { return v < r.lo; });
  if (it == begin) return false;
  --it;
  return c <= it->hi;
}

}  // namespace

Regex Regex::compile(std::string_view pattern) {
  Regex re;
  re.pattern_ = std::string(pattern);
  Parser parser(pattern);
  NodePtr root = parser.parse();
  Compiler compiler(&re.program_, &re.ranges_, parser.case_insensitive());
  compiler.emit_node(*root);
  re.program_.push_back({Op::kMatch});
  return re;
}

std::optional<Regex::Match> Regex::search(std::string_view text) const {
  const std::size_t n_inst = program_.size();
  struct Thread {
    int pc;
    std::size_t start;
  };
  std::vector<Thread> clist, nlist;
  clist.reserve(n_inst);
  nlist.reserve(n_inst);
  // Generation stamp per instruction; avoids clearing a visited set each step.
  std::vector<std::size_t> mark(n_inst, SIZE_MAX);
  std::vector<int> stack;

  auto add = [&](std::vector<Thread>& list, int pc0, std::size_t start, std::size_t pos,
                 std::size_t stamp) {
    stack.clear();
    stack.push_back(pc0);
    while (!stack.empty()) {
      const int pc = stack.back();
      stack.pop_back();
      if (mark[pc] == stamp) continue;
      mark[pc] = stamp;
      const Inst& inst = program_[pc];
      switch (inst.op) {
        case Op::kJmp: stack.push_back(inst.x); break;
        case Op::kSplit:
          stack.push_back(inst.y);
          stack.push_back(inst.x);
          break;
        case Op::kBol:
          if (pos == 0) stack.push_back(pc + 1);
          break;
        case Op::kEol:
          if (pos == text.size()) stack.push_back(pc + 1);
          break;
        default: list.push_back({pc, start}); break;
      }
    }
  };

  std::optional<Match> best;
  std::size_t pos = 0;
  std::size_t stamp = 0;
  add(clist, 0, 0, 0, stamp);
  while (true) {
    std::size_t len = 0;
    char32_t c = 0;
    if (pos < text.size()) c = decode_utf8(text, pos, &len);
    ++stamp;
    nlist.clear();
    for (const Thread& t : clist) {
      const Inst& inst = program_[t.pc];
      if (inst.op == Op::kMatch) {
        best = Match{t.start, pos};
        break;  // lower-priority threads are cut
      }
      if (pos >= text.size()) continue;
      bool ok = true;
      if (inst.op == Op::kClass) {
        ok = in_ranges(ranges_, inst.x, inst.y, c) != inst.negated;
      }
      if (ok) add(nlist, t.pc + 1, t.start, pos + len, stamp);
    }
    if (pos >= text.size()) break;
    pos += len;
    if (!best) add(nlist, 0, pos, pos, stamp);
    if (nlist.empty() && best) break;
    std::swap(clist, nlist);
  }
  return best;
}

std::string regex_escape(std::string_view literal) {
  static constexpr std::string_view kMeta = R"(\^$.|?*+()[]{}-)";
  std::string out;
  out.reserve(literal.size() * 2);
  for (const char ch : literal) {
    if (kMeta.find(ch) != std::string_view::npos) out.push_back('\\');
    out.push_back(ch);
  }
  return out;
}

}  // namespace sqg
