#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ack/dsl.hpp"

// Constrained architecture search: seeded random search without replacement
// over a fixed prototype with per-slot block choices, filtered by a feasibility
// indicator and ranked by a log-scaled accuracy / size / compute score.
namespace ack {

struct IndicatorConfig {
  double tau = 0.9;       // minimum top-1 (fraction)
  unsigned bits = 8;      // required weight precision

  void validate() const;
};

struct PerformanceFunction {
  double kappa = 2.0;   // accuracy exponent
  double beta = 0.5;    // parameter exponent
  double gamma = 0.5;   // mult-add exponent
  double scale = 20.0;  // applied to log10

  void validate() const;
};

struct CandidateResult {
  double top1 = 0.0;
  unsigned bits = 32;
};

bool indicator(const CandidateResult& result, const IndicatorConfig& config);

// scale * log10((100 top1)^kappa / (params_M^beta * mult_adds_M^gamma)).
// Throws DomainError unless top1 in (0, 1] and params, mult_adds > 0.
double score(double top1, double params, double mult_adds, const PerformanceFunction& pf);

struct Candidate {
  std::uint64_t id = 0;             // mixed-radix index of the slot choices
  std::vector<std::size_t> choices;  // one per slot
  std::string text;                  // canonical DSL
  NetworkSpec spec;
};

// Prototype = stem + one fragment per slot + (gap, fc classes, softmax).
// Fragments are DSL lines; input channels chain automatically.
struct SearchSpace {
  std::string stem;
  std::vector<std::vector<std::string>> slots;
  std::size_t classes = 10;
  std::vector<std::uint64_t> seeds{0};

  std::uint64_t size() const;
  Candidate realize(std::uint64_t id) const;
  // Realizes every candidate (when size() <= limit) so a bad space fails early.
  void validate(std::uint64_t limit = 4096) const;

  // {"stem": "...", "slots": [[...], ...], "classes": 10, "seeds": [..]}
  static SearchSpace from_json(const std::string& text);
};

std::string spec_hash(const std::string& canonical_text);

struct ScoredCandidate {
  Candidate candidate;
  double top1 = 0.0;  // minimum over the space's seeds
  unsigned bits = 32;
  std::uint64_t params = 0;
  std::uint64_t mult_adds = 0;
  bool feasible = false;
  std::optional<double> u;  // empty when top1 == 0
};

struct AuditRecord {
  std::uint64_t candidate_id = 0;
  std::string spec_hash;
  double top1 = 0.0;
  std::uint64_t params = 0;
  std::uint64_t mult_adds = 0;
  bool feasible = false;
  std::optional<double> u;

  std::string json() const;
};

struct SearchResult {
  std::vector<ScoredCandidate> ranked;  // feasible only, best first
  std::vector<AuditRecord> audit;       // every evaluation, in evaluation order

  bool found() const { return !ranked.empty(); }
  std::string audit_ndjson() const;
};

// Evaluates a candidate trained/measured with the given seed.
using EvalFn = std::function<CandidateResult(const Candidate&, std::uint64_t seed)>;

// Orders by U descending, then fewer params, then spec text.
bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b);

// Visits min(budget, space.size()) distinct candidates in a permutation drawn
// from `seed`. A candidate's top1 is its worst result across space.seeds.
SearchResult search(const SearchSpace& space, std::uint64_t budget, const IndicatorConfig& indicator_cfg,
                    const PerformanceFunction& pf, const EvalFn& eval_fn, std::uint64_t seed);

}  // namespace ack
