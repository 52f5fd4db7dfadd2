#include "ack/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#include "ack/error.hpp"

namespace ack {

namespace {

struct Token {
  std::string text;
  std::size_t column;
};

struct Option {
  std::string key;
  std::string value;
  std::size_t column;
  bool used = false;
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#') ++i;
    tokens.push_back({std::string(line.substr(start, i - start)), start + 1});
  }
  return tokens;
}

class LineParser {
 public:
  LineParser(std::size_t line, std::vector<Token> tokens) : line_(line), tokens_(std::move(tokens)) {}

  const std::string& directive() const { return tokens_.front().text; }

  [[noreturn]] void fail(std::size_t column, const std::string& what) const { throw ParseError(line_, column, what); }

  std::size_t positional_int(std::size_t index, const char* what) const {
    if (index >= tokens_.size()) fail(tokens_.back().column + tokens_.back().text.size(), std::string("missing ") + what);
    return to_int(tokens_[index].text, tokens_[index].column, what);
  }

  void expect_arity(std::size_t count) const {
    if (tokens_.size() > count) fail(tokens_[count].column, "unexpected token '" + tokens_[count].text + "'");
  }

  // Splits tokens[1..] into options; `keys` lists the keys this directive accepts.
  void parse_options(const std::vector<std::string>& keys) {
    auto known = [&](const std::string& k) { return std::find(keys.begin(), keys.end(), k) != keys.end(); };
    for (std::size_t i = 1; i < tokens_.size(); ++i) {
      const Token& t = tokens_[i];
      Option opt{"", "", t.column};
      if (auto colon = t.text.find(':'); colon != std::string::npos) {
        opt.key = t.text.substr(0, colon);
        opt.value = t.text.substr(colon + 1);
        if (opt.value.empty()) fail(t.column, "option '" + opt.key + "' has no value");
      } else if (known(t.text)) {
        if (i + 1 >= tokens_.size()) fail(t.column, "option '" + t.text + "' has no value");
        opt.key = t.text;
        opt.value = tokens_[++i].text;
      } else {
        auto digit = std::find_if(t.text.begin(), t.text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
        if (digit == t.text.begin() || digit == t.text.end()) fail(t.column, "malformed option '" + t.text + "'");
        opt.key = std::string(t.text.begin(), digit);
        opt.value = std::string(digit, t.text.end());
      }
      if (opt.key.empty()) fail(t.column, "option without a name");
      if (!known(opt.key)) fail(t.column, "unknown option '" + opt.key + "' for " + directive());
      for (const Option& o : options_) {
        if (o.key == opt.key) fail(t.column, "duplicate option '" + opt.key + "'");
      }
      options_.push_back(std::move(opt));
    }
  }

  Option* find(const std::string& key) {
    for (Option& o : options_) {
      if (o.key == key) {
        o.used = true;
        return &o;
      }
    }
    return nullptr;
  }

  std::size_t required_int(const std::string& key) {
    Option* o = find(key);
    if (!o) fail(tokens_.front().column, directive() + " requires option '" + key + "'");
    return to_int(o->value, o->column, key.c_str());
  }

  std::size_t int_or(const std::string& key, std::size_t fallback) {
    Option* o = find(key);
    return o ? to_int(o->value, o->column, key.c_str()) : fallback;
  }

  std::optional<Size2> size_opt(const std::string& key) {
    Option* o = find(key);
    if (!o) return std::nullopt;
    auto x = o->value.find('x');
    if (x == std::string::npos) {
      std::size_t v = to_int(o->value, o->column, key.c_str());
      return Size2{v, v};
    }
    return Size2{to_int(o->value.substr(0, x), o->column, key.c_str()),
                 to_int(o->value.substr(x + 1), o->column, key.c_str())};
  }

  template <typename E>
  E choice(const std::string& key, const std::vector<std::pair<std::string, E>>& values, E fallback) {
    Option* o = find(key);
    if (!o) return fallback;
    for (const auto& [name, v] : values) {
      if (o->value == name) return v;
    }
    fail(o->column, "invalid value '" + o->value + "' for option '" + key + "'");
  }

  std::size_t line() const { return line_; }
  std::size_t column() const { return tokens_.front().column; }
  const std::vector<Token>& tokens() const { return tokens_; }
  Option* raw(const std::string& key) { return find(key); }

 private:
  std::size_t to_int(const std::string& text, std::size_t column, const char* what) const {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      fail(column, std::string("malformed number '") + text + "' for " + what);
    }
    return v;
  }

  std::size_t line_;
  std::vector<Token> tokens_;
  std::vector<Option> options_;
};

const std::vector<std::pair<std::string, Activation>> kActivations = {{"relu", Activation::kRelu},
                                                                      {"none", Activation::kNone}};

std::string act_name(Activation a) { return a == Activation::kRelu ? "relu" : "none"; }

std::string size_text(const Size2& s) {
  return s.h == s.w ? std::to_string(s.h) : std::to_string(s.h) + "x" + std::to_string(s.w);
}

[[noreturn]] void fail_at(const NetworkSpec& spec, std::size_t index, const std::string& what) {
  std::size_t line = index < spec.lines.size() ? spec.lines[index] : 0;
  throw ParseError(line, 1, what);
}

}  // namespace

std::string layer_kind(const LayerSpec& layer) {
  struct {
    std::string operator()(const InputLayer&) const { return "input"; }
    std::string operator()(const ConvLayerSpec&) const { return "conv"; }
    std::string operator()(const VacConfig&) const { return "vac"; }
    std::string operator()(const PepeConfig&) const { return "pepe"; }
    std::string operator()(const ResidualBegin&) const { return "res{"; }
    std::string operator()(const ResidualEnd&) const { return "}res"; }
    std::string operator()(const GlobalAvgPool&) const { return "gap"; }
    std::string operator()(const FullyConnected&) const { return "fc"; }
    std::string operator()(const Softmax&) const { return "softmax"; }
  } visitor;
  return std::visit(visitor, layer);
}

std::size_t NetworkSpec::classes() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (auto* fc = std::get_if<FullyConnected>(&*it)) return fc->out;
  }
  throw ConfigError("network has no fully connected layer");
}

std::string NetworkSpec::to_text() const {
  std::ostringstream os;
  std::size_t depth = 0;
  for (const LayerSpec& layer : layers) {
    if (std::holds_alternative<ResidualEnd>(layer) && depth > 0) --depth;
    os << std::string(2 * depth, ' ');
    if (auto* in = std::get_if<InputLayer>(&layer)) {
      os << "input " << in->c << ' ' << in->h << ' ' << in->w;
    } else if (auto* cv = std::get_if<ConvLayerSpec>(&layer)) {
      const ConvSpec& s = cv->conv;
      os << "conv c:" << s.c_out << " k:" << size_text(s.kernel) << " s:" << size_text(s.stride)
         << " p:" << size_text(s.padding) << " g:" << s.groups << " act:" << act_name(cv->activation);
    } else if (auto* v = std::get_if<VacConfig>(&layer)) {
      os << "vac dm:" << v->c_down << " e1:" << v->e1 << " e2:" << v->e2 << " um:" << v->c_up
         << " pool:" << size_text(v->pool.kernel) << " pstride:" << size_text(v->pool.stride)
         << " ek:" << v->embed_kernel << " g:" << v->embed_groups
         << " expand:" << (v->expansion == Expansion::kMaxUnpool ? "unpool" : "nearest")
         << " scale:" << (v->scale_mode == ScaleMode::kScalar ? "scalar" : "channel")
         << " down_act:" << act_name(v->down_activation) << " up_act:" << act_name(v->up_activation);
    } else if (auto* p = std::get_if<PepeConfig>(&layer)) {
      os << "pepe p1:" << p->p1 << " e1:" << p->e1 << " p2:" << p->p2 << " e2:" << p->e2 << " k:" << p->dw_kernel
         << " s:" << p->stride << " act:" << act_name(p->activation);
    } else if (std::holds_alternative<ResidualBegin>(layer)) {
      os << "res{";
      ++depth;
    } else if (std::holds_alternative<ResidualEnd>(layer)) {
      os << "}res";
    } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
      os << "gap";
    } else if (auto* fc = std::get_if<FullyConnected>(&layer)) {
      os << "fc " << fc->out;
    } else {
      os << "softmax";
    }
    os << '\n';
  }
  return os.str();
}

NetworkSpec parse_dsl(std::string_view text) {
  NetworkSpec spec;
  std::size_t channels = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    LineParser p(line_no, std::move(tokens));
    const std::string& d = p.directive();

    if (spec.layers.empty() && d != "input") p.fail(p.column(), "first directive must be 'input', got '" + d + "'");

    LayerSpec layer;
    if (d == "input") {
      if (!spec.layers.empty()) p.fail(p.column(), "'input' may appear only once, as the first directive");
      InputLayer in{p.positional_int(1, "input channels"), p.positional_int(2, "input height"),
                    p.positional_int(3, "input width")};
      p.expect_arity(4);
      if (in.c == 0 || in.h == 0 || in.w == 0) p.fail(p.column(), "input dimensions must be >= 1");
      channels = in.c;
      layer = in;
    } else if (d == "conv") {
      p.parse_options({"c", "k", "s", "p", "g", "act"});
      ConvLayerSpec cv;
      cv.conv.c_in = channels;
      cv.conv.c_out = p.required_int("c");
      auto k = p.size_opt("k");
      if (!k) p.fail(p.column(), "conv requires option 'k'");
      cv.conv.kernel = *k;
      cv.conv.stride = p.size_opt("s").value_or(Size2{1, 1});
      if (Option* pad = p.raw("p"); pad && pad->value == "same") {
        if (k->h % 2 == 0 || k->w % 2 == 0) p.fail(pad->column, "p:same needs an odd kernel");
        cv.conv.padding = {k->h / 2, k->w / 2};
      } else {
        cv.conv.padding = p.size_opt("p").value_or(Size2{0, 0});
      }
      cv.conv.groups = p.int_or("g", 1);
      cv.activation = p.choice("act", kActivations, Activation::kRelu);
      channels = cv.conv.c_out;
      layer = cv;
    } else if (d == "vac") {
      p.parse_options({"dm", "e1", "e2", "um", "pool", "pstride", "ek", "g", "expand", "scale", "down_act", "up_act"});
      VacConfig v;
      v.c_in = channels;
      v.c_down = p.required_int("dm");
      v.e1 = p.required_int("e1");
      v.e2 = p.required_int("e2");
      v.c_up = p.required_int("um");
      v.pool.kernel = p.size_opt("pool").value_or(Size2{2, 2});
      v.pool.stride = p.size_opt("pstride").value_or(v.pool.kernel);
      v.embed_kernel = p.int_or("ek", 3);
      v.embed_groups = p.int_or("g", 1);
      v.expansion = p.choice<Expansion>("expand", {{"unpool", Expansion::kMaxUnpool}, {"nearest", Expansion::kNearest}},
                                        Expansion::kMaxUnpool);
      v.scale_mode = p.choice<ScaleMode>("scale", {{"scalar", ScaleMode::kScalar}, {"channel", ScaleMode::kPerChannel}},
                                         ScaleMode::kScalar);
      v.down_activation = p.choice("down_act", kActivations, Activation::kRelu);
      v.up_activation = p.choice("up_act", kActivations, Activation::kRelu);
      channels = v.c_up;
      layer = v;
    } else if (d == "pepe") {
      p.parse_options({"p1", "e1", "p2", "e2", "k", "s", "act"});
      PepeConfig c;
      c.c_in = channels;
      c.p1 = p.required_int("p1");
      c.e1 = p.required_int("e1");
      c.p2 = p.required_int("p2");
      c.e2 = p.required_int("e2");
      c.dw_kernel = p.int_or("k", 3);
      c.stride = p.int_or("s", 1);
      c.activation = p.choice("act", kActivations, Activation::kRelu);
      channels = c.e2;
      layer = c;
    } else if (d == "res{") {
      p.expect_arity(1);
      layer = ResidualBegin{};
    } else if (d == "}res") {
      p.expect_arity(1);
      layer = ResidualEnd{};
    } else if (d == "gap") {
      p.expect_arity(1);
      layer = GlobalAvgPool{};
    } else if (d == "fc") {
      FullyConnected fc{channels, p.positional_int(1, "fc output count")};
      p.expect_arity(2);
      if (fc.out == 0) p.fail(p.column(), "fc needs at least one output");
      channels = fc.out;
      layer = fc;
    } else if (d == "softmax") {
      p.expect_arity(1);
      layer = Softmax{};
    } else {
      p.fail(p.column(), "unknown directive '" + d + "'");
    }
    spec.layers.push_back(layer);
    spec.lines.push_back(line_no);
  }
  if (spec.layers.empty()) throw ParseError(1, 1, "empty network description");
  validate(spec);
  return spec;
}

NetworkSpec parse_dsl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open network description '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dsl(ss.str());
}

std::vector<Shape> layer_output_shapes(const NetworkSpec& spec, const Shape& input) {
  if (spec.layers.empty() || !std::holds_alternative<InputLayer>(spec.layers.front())) {
    fail_at(spec, 0, "network must start with an 'input' directive");
  }
  const InputLayer& in = spec.input();
  // Spatial size may differ from the declared input (everything before gap is
  // convolutional); the channel count may not.
  if (input.c != in.c) {
    throw DimensionError("input " + input.str() + " has " + std::to_string(input.c) + " channels, the description declares " +
                         std::to_string(in.c));
  }
  std::vector<Shape> shapes;
  std::vector<std::pair<Shape, std::size_t>> residual_stack;
  Shape cur = input;
  const std::size_t count = spec.layers.size();
  for (std::size_t i = 0; i < count; ++i) {
    const LayerSpec& layer = spec.layers[i];
    const std::string kind = layer_kind(layer);
    auto where = [&](const std::string& what) { fail_at(spec, i, kind + ": " + what); };
    const bool in_tail = i + 3 >= count;
    try {
      if (i > 0 && std::holds_alternative<InputLayer>(layer)) where("'input' may appear only once");
      if (auto* cv = std::get_if<ConvLayerSpec>(&layer)) {
        if (cv->conv.c_in != cur.c) {
          where("expects " + std::to_string(cv->conv.c_in) + " input channels but receives " + std::to_string(cur.c));
        }
        cur = cv->conv.output_shape(cur);
      } else if (auto* v = std::get_if<VacConfig>(&layer)) {
        if (v->c_in != cur.c) {
          where("expects " + std::to_string(v->c_in) + " input channels but receives " + std::to_string(cur.c));
        }
        v->validate();
        pool_output_shape(Shape{cur.n, v->c_down, cur.h, cur.w}, v->pool);
      } else if (auto* pe = std::get_if<PepeConfig>(&layer)) {
        if (pe->c_in != cur.c) {
          where("expects " + std::to_string(pe->c_in) + " input channels but receives " + std::to_string(cur.c));
        }
        pe->validate();
        cur = pe->expand2_spec().output_shape(
            pe->project2_spec().output_shape(pe->expand1_spec().output_shape(pe->project1_spec().output_shape(cur))));
      } else if (std::holds_alternative<ResidualBegin>(layer)) {
        residual_stack.emplace_back(cur, i);
      } else if (std::holds_alternative<ResidualEnd>(layer)) {
        if (residual_stack.empty()) where("no matching 'res{'");
        if (residual_stack.back().first != cur) {
          where("residual group changes shape from " + residual_stack.back().first.str() + " to " + cur.str());
        }
        residual_stack.pop_back();
      } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
        if (i + 3 != count) where("global average pooling is only allowed as the start of the gap -> fc -> softmax tail");
        cur = {cur.n, cur.c, 1, 1};
      } else if (auto* fc = std::get_if<FullyConnected>(&layer)) {
        if (i + 2 != count || !std::holds_alternative<GlobalAvgPool>(spec.layers[i - 1])) {
          where("a fully connected layer is only allowed between gap and softmax");
        }
        if (fc->in != cur.c) {
          where("expects " + std::to_string(fc->in) + " inputs but receives " + std::to_string(cur.c));
        }
        if (fc->out == 0) where("needs at least one output");
        cur = {cur.n, fc->out, 1, 1};
      } else if (std::holds_alternative<Softmax>(layer)) {
        if (i + 1 != count) where("softmax must be the last layer");
      }
      if (in_tail && !residual_stack.empty() &&
          (std::holds_alternative<GlobalAvgPool>(layer) || std::holds_alternative<FullyConnected>(layer))) {
        fail_at(spec, residual_stack.back().second, "res{: residual group is never closed");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      where(e.what());
    }
    shapes.push_back(cur);
  }
  if (!residual_stack.empty()) fail_at(spec, residual_stack.back().second, "res{: residual group is never closed");
  auto tail_ok = [&](std::size_t back, auto tag) {
    return count > back && std::holds_alternative<decltype(tag)>(spec.layers[count - 1 - back]);
  };
  const std::size_t last = count - 1;
  if (!tail_ok(0, Softmax{})) fail_at(spec, last, "missing softmax tail: network must end with gap -> fc -> softmax");
  if (!tail_ok(1, FullyConnected{})) fail_at(spec, last, "missing fc tail: network must end with gap -> fc -> softmax");
  if (!tail_ok(2, GlobalAvgPool{})) fail_at(spec, last, "missing gap tail: network must end with gap -> fc -> softmax");
  return shapes;
}

void validate(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw ParseError(0, 1, "empty network description");
  layer_output_shapes(spec, spec.input_shape());
}

}  // namespace ack
