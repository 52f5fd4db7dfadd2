#include "ack/explore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "ack/complexity.hpp"
#include "ack/error.hpp"
#include "ack/rng.hpp"

namespace ack {

void IndicatorConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  if (bits != 8 && bits != 32) throw ConfigError("required precision must be 8 or 32 bits");
}

void PerformanceFunction::validate() const {
  if (!(kappa >= 0.0 && beta >= 0.0 && gamma >= 0.0)) throw ConfigError("score exponents must be >= 0");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("score scale must be positive");
}

bool indicator(const CandidateResult& result, const IndicatorConfig& config) {
  return result.top1 >= config.tau && result.bits <= config.bits;
}

double score(double top1, double params, double mult_adds, const PerformanceFunction& pf) {
  if (!(top1 > 0.0 && top1 <= 1.0)) throw DomainError("top1 must lie in (0, 1]");
  if (!(params > 0.0) || !(mult_adds > 0.0)) throw DomainError("params and mult-adds must be positive");
  const double log_acc = std::log10(100.0 * top1);
  const double log_p = std::log10(params / 1e6);
  const double log_m = std::log10(mult_adds / 1e6);
  return pf.scale * (pf.kappa * log_acc - pf.beta * log_p - pf.gamma * log_m);
}

std::uint64_t SearchSpace::size() const {
  std::uint64_t n = 1;
  for (const auto& s : slots) {
    if (s.empty()) throw ConfigError("search slot with no choices");
    if (n > UINT64_MAX / s.size()) throw ConfigError("search space too large");
    n *= s.size();
  }
  return n;
}

Candidate SearchSpace::realize(std::uint64_t id) const {
  if (id >= size()) throw ConfigError("candidate id " + std::to_string(id) + " out of range");
  Candidate c;
  c.id = id;
  std::string text = stem;
  if (!text.empty() && text.back() != '\n') text += '\n';
  // Slot 0 is the least significant digit.
  std::uint64_t rest = id;
  for (const auto& slot : slots) {
    const std::size_t pick = rest % slot.size();
    rest /= slot.size();
    c.choices.push_back(pick);
    text += slot[pick];
    if (text.back() != '\n') text += '\n';
  }
  text += "gap\nfc " + std::to_string(classes) + "\nsoftmax\n";
  try {
    c.spec = parse_dsl(text);
  } catch (const ConfigError& e) {
    throw ConfigError("candidate " + std::to_string(id) + " is not a valid network: " + e.what());
  }
  c.text = c.spec.to_text();
  return c;
}

void SearchSpace::validate(std::uint64_t limit) const {
  if (seeds.empty()) throw ConfigError("search space needs at least one seed");
  if (classes == 0) throw ConfigError("classes must be positive");
  const std::uint64_t n = size();
  if (n > limit) {
    realize(0);
    realize(n - 1);
    return;
  }
  for (std::uint64_t i = 0; i < n; ++i) realize(i);
}

SearchSpace SearchSpace::from_json(const std::string& text) {
  SearchSpace space;
  try {
    const auto j = nlohmann::json::parse(text);
    space.stem = j.at("stem").get<std::string>();
    space.slots = j.at("slots").get<std::vector<std::vector<std::string>>>();
    if (j.contains("classes")) space.classes = j["classes"].get<std::size_t>();
    if (j.contains("seeds")) space.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  space.validate();
  return space;
}

std::string spec_hash(const std::string& canonical_text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical_text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string AuditRecord::json() const {
  nlohmann::ordered_json j;
  j["candidate_id"] = candidate_id;
  j["spec_hash"] = spec_hash;
  j["top1"] = top1;
  j["params"] = params;
  j["mult_adds"] = mult_adds;
  j["feasible"] = feasible;
  j["U"] = u ? nlohmann::ordered_json(*u) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

std::string SearchResult::audit_ndjson() const {
  std::string out;
  for (const auto& r : audit) out += r.json() + '\n';
  return out;
}

bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  const double ua = a.u.value_or(-INFINITY);
  const double ub = b.u.value_or(-INFINITY);
  if (ua != ub) return ua > ub;
  if (a.params != b.params) return a.params < b.params;
  return a.candidate.text < b.candidate.text;
}

namespace {

std::vector<std::uint64_t> visit_order(std::uint64_t size, std::uint64_t budget, std::uint64_t seed) {
  const std::uint64_t take = std::min(budget, size);
  Rng rng(seed);
  if (size <= (1u << 20)) {
    std::vector<std::uint64_t> all(size);
    std::iota(all.begin(), all.end(), std::uint64_t{0});
    rng.shuffle(std::span<std::uint64_t>(all));
    all.resize(take);
    return all;
  }
  std::vector<std::uint64_t> order;
  std::unordered_set<std::uint64_t> seen;
  while (order.size() < take) {
    const std::uint64_t id = rng.below(size);
    if (seen.insert(id).second) order.push_back(id);
  }
  return order;
}

}  // namespace

SearchResult search(const SearchSpace& space, std::uint64_t budget, const IndicatorConfig& indicator_cfg,
                    const PerformanceFunction& pf, const EvalFn& eval_fn, std::uint64_t seed) {
  if (budget < 1) throw ConfigError("search budget must be at least 1");
  indicator_cfg.validate();
  pf.validate();
  if (space.seeds.empty()) throw ConfigError("search space needs at least one seed");

  SearchResult result;
  for (std::uint64_t id : visit_order(space.size(), budget, seed)) {
    ScoredCandidate sc;
    sc.candidate = space.realize(id);
    const ComplexityReport report = count_mult_adds(sc.candidate.spec, sc.candidate.spec.input_shape());
    sc.params = report.total_params;
    sc.mult_adds = report.total_mult_adds;

    bool first = true;
    for (std::uint64_t s : space.seeds) {
      const CandidateResult r = eval_fn(sc.candidate, s);
      if (!(r.top1 >= 0.0 && r.top1 <= 1.0)) throw DomainError("eval returned top1 outside [0, 1]");
      if (first || r.top1 < sc.top1) sc.top1 = r.top1;
      sc.bits = first ? r.bits : std::max(sc.bits, r.bits);
      first = false;
    }
    sc.feasible = indicator(CandidateResult{sc.top1, sc.bits}, indicator_cfg);
    if (sc.top1 > 0.0) sc.u = score(sc.top1, static_cast<double>(sc.params), static_cast<double>(sc.mult_adds), pf);

    result.audit.push_back(AuditRecord{id, spec_hash(sc.candidate.text), sc.top1, sc.params, sc.mult_adds,
                                       sc.feasible, sc.u});
    if (sc.feasible) result.ranked.push_back(std::move(sc));
  }
  std::sort(result.ranked.begin(), result.ranked.end(), ranks_before);
  return result;
}

}  // namespace ack
