#include "ack/complexity.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "ack/error.hpp"
#include "ack/quant.hpp"

namespace ack {

namespace {

std::uint64_t conv_params(const ConvSpec& s) { return s.weight_count() + s.c_out; }

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::uint64_t conv_mult_adds(const ConvSpec& spec, const Shape& input) {
  const Shape out = spec.output_shape(input);
  return static_cast<std::uint64_t>(spec.kernel.h * spec.kernel.w * (spec.c_in / spec.groups)) * spec.c_out *
         out.h * out.w;
}

std::uint64_t ComplexityReport::bytes(std::uint64_t params) const { return weight_memory_bytes(params, bits); }

ComplexityReport count_mult_adds(const NetworkSpec& spec, const Shape& input, unsigned bits, CountOptions options) {
  if (bits != 8 && bits != 32) throw DomainError("weight precision must be 8 or 32 bits");
  const Shape in1{1, input.c, input.h, input.w};
  const std::vector<Shape> shapes = layer_output_shapes(spec, in1);
  ComplexityReport report;
  report.input = in1;
  report.bits = bits;

  Shape cur = in1;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    ComplexityRow row{std::to_string(i) + ":" + layer_kind(layer), 0, 0};
    auto bias_adds = [&](const ConvSpec& s, const Shape& x) {
      if (!options.bias_adds) return std::uint64_t{0};
      const Shape o = s.output_shape(x);
      return static_cast<std::uint64_t>(o.c) * o.h * o.w;
    };
    auto conv = [&](const ConvSpec& s, const Shape& x) {
      row.params += conv_params(s);
      row.mult_adds += conv_mult_adds(s, x) + bias_adds(s, x);
      return s.output_shape(x);
    };
    if (auto* cv = std::get_if<ConvLayerSpec>(&layer)) {
      conv(cv->conv, cur);
    } else if (auto* v = std::get_if<VacConfig>(&layer)) {
      const Shape mixed = conv(v->down_spec(), cur);
      const Shape condensed = pool_output_shape(mixed, v->pool);
      conv(v->embed_pointwise_spec(), conv(v->embed_grouped_spec(), condensed));
      row.params += v->scale_count();
      row.mult_adds += 2 * static_cast<std::uint64_t>(mixed.size());
      conv(v->up_spec(), mixed);
    } else if (auto* p = std::get_if<PepeConfig>(&layer)) {
      conv(p->expand2_spec(), conv(p->project2_spec(), conv(p->expand1_spec(), conv(p->project1_spec(), cur))));
    } else if (auto* fc = std::get_if<FullyConnected>(&layer)) {
      row.params = static_cast<std::uint64_t>(fc->in) * fc->out + fc->out;
      row.mult_adds = static_cast<std::uint64_t>(fc->in) * fc->out + (options.bias_adds ? fc->out : 0);
    }
    cur = shapes[i];
    report.total_params += row.params;
    report.total_mult_adds += row.mult_adds;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::uint64_t count_params(const NetworkSpec& spec) { return count_mult_adds(spec, spec.input_shape()).total_params; }

std::string ComplexityReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(14) << "layer" << std::right << std::setw(12) << "params" << std::setw(14)
     << "mult_adds" << std::setw(6) << "bits" << std::setw(12) << "bytes" << '\n';
  auto line = [&](const std::string& name, std::uint64_t p, std::uint64_t m) {
    os << std::left << std::setw(14) << name << std::right << std::setw(12) << p << std::setw(14) << m
       << std::setw(6) << bits << std::setw(12) << bytes(p) << '\n';
  };
  for (const auto& r : rows) line(r.name, r.params, r.mult_adds);
  line("total", total_params, total_mult_adds);
  return os.str();
}

std::string ComplexityReport::csv() const {
  std::ostringstream os;
  os << "name,params,mult_adds,bits,bytes\n";
  for (const auto& r : rows) os << r.name << ',' << r.params << ',' << r.mult_adds << ',' << bits << ',' << bytes(r.params) << '\n';
  os << "total," << total_params << ',' << total_mult_adds << ',' << bits << ',' << total_bytes() << '\n';
  return os.str();
}

RatioRow ratio(const ModelRow& a, const ModelRow& b) {
  if (b.params == 0.0 || b.mult_adds == 0.0 || b.bits == 0) {
    throw DomainError("cannot take a ratio against '" + b.name + "': zero denominator");
  }
  return RatioRow{a.name, b.name, a.params / b.params, a.mult_adds / b.mult_adds, a.memory_bits() / b.memory_bits()};
}

std::vector<RatioRow> compare(const std::vector<ModelRow>& models) {
  if (models.size() < 2) throw ConfigError("compare needs at least two models");
  std::vector<RatioRow> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = 0; j < models.size(); ++j) {
      if (i != j) out.push_back(ratio(models[i], models[j]));
    }
  }
  return out;
}

double parse_count(const std::string& text) {
  std::string t = text;
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
  if (t.empty()) throw ConfigError("empty count");
  double mult = 1.0;
  switch (t.back()) {
    case 'K': case 'k': mult = 1e3; t.pop_back(); break;
    case 'M': case 'm': mult = 1e6; t.pop_back(); break;
    case 'G': case 'g': mult = 1e9; t.pop_back(); break;
    default: break;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("malformed count '" + text + "'");
  }
  if (used != t.size() || !std::isfinite(v)) throw ConfigError("malformed count '" + text + "'");
  return v * mult;
}

std::vector<ModelRow> parse_model_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<ModelRow> rows;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (header) {
      header = false;
      if (cells.size() != 4 || cells[0] != "name" || cells[1] != "params" || cells[2] != "mult_adds" || cells[3] != "bits") {
        throw ParseError(line_no, 1, "expected header name,params,mult_adds,bits");
      }
      continue;
    }
    if (cells.size() != 4) throw ParseError(line_no, 1, "expected 4 columns, got " + std::to_string(cells.size()));
    try {
      double bits = parse_count(cells[3]);
      if (bits != 8 && bits != 32) throw ConfigError("bits must be 8 or 32");
      rows.push_back(ModelRow{cells[0], parse_count(cells[1]), parse_count(cells[2]), static_cast<unsigned>(bits)});
    } catch (const ConfigError& e) {
      throw ParseError(line_no, 1, e.what());
    }
  }
  return rows;
}

std::string format_ratio_table(const std::vector<RatioRow>& rows) {
  std::size_t w = 11;
  for (const auto& r : rows) w = std::max({w, r.numerator.size(), r.denominator.size()});
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w + 2)) << "numerator" << std::setw(static_cast<int>(w + 2))
     << "denominator" << std::right << std::setw(10) << "params" << std::setw(11) << "mult_adds" << std::setw(10)
     << "memory" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(w + 2)) << r.numerator << std::setw(static_cast<int>(w + 2))
       << r.denominator << std::right << std::setw(9) << fixed2(r.params) << 'x' << std::setw(10)
       << fixed2(r.mult_adds) << 'x' << std::setw(9) << fixed2(r.memory) << "x\n";
  }
  return os.str();
}

std::string format_ratio_csv(const std::vector<RatioRow>& rows) {
  std::ostringstream os;
  os << "numerator,denominator,params_ratio,mult_adds_ratio,memory_ratio\n";
  for (const auto& r : rows) {
    os << r.numerator << ',' << r.denominator << ',' << fixed2(r.params) << ',' << fixed2(r.mult_adds) << ','
       << fixed2(r.memory) << '\n';
  }
  return os.str();
}

}  // namespace ack
