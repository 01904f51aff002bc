#pragma once

// Thinning functions and the two-thinning engine.
//
// The engine sees candidates one at a time. For each output index n it
// evaluates the strategy's keep probability at the candidate, draws one
// uniform U, and keeps the candidate when U <= keep probability. After a
// rejection the next candidate is kept unconditionally, so at most one of any
// two consecutive candidates is ever rejected.

#include <bit>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thinning/dyadic_haar.hpp"
#include "thinning/haar_state.hpp"
#include "thinning/point.hpp"

namespace thinning {

enum class StrategyKind { monte_carlo, haar, greedy, greedy_paper_sign };

inline std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::monte_carlo: return "monte_carlo";
    case StrategyKind::haar: return "haar";
    case StrategyKind::greedy: return "greedy";
    case StrategyKind::greedy_paper_sign: return "greedy_paper_sign";
  }
  return "unknown";
}

inline StrategyKind parse_strategy(std::string_view name) {
  for (StrategyKind k : {StrategyKind::monte_carlo, StrategyKind::haar, StrategyKind::greedy,
                         StrategyKind::greedy_paper_sign})
    if (name == to_string(k)) return k;
  if (name == "mc") return StrategyKind::monte_carlo;
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

/// Which sign of the signed Haar sum the greedy rule keeps.
/// `balance` keeps where the sum is positive, i.e. where the Haar density is
/// above 1. `paper_sign` keeps where it is negative.
enum class GreedyConvention { balance, paper_sign };

struct StrategyConfig {
  StrategyKind kind = StrategyKind::haar;
  double beta = 1.0;
  std::size_t dim = 1;

  void validate() const {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in (0,1]");
    if (dim == 0 || dim > 64) throw std::invalid_argument("dimension must lie in 1..64");
  }
  bool uses_table() const { return kind != StrategyKind::monte_carlo; }
};

struct DensityValue {
  double lambda = 1.0;     // conditional density of the next output at x
  double keep_prob = 1.0;  // lambda - beta/2
};

/// floor(log2 n) for n >= 1: the largest Haar order used when placing output n.
inline unsigned order_for_output(std::size_t n) {
  return n <= 1 ? 0u : static_cast<unsigned>(std::bit_width(n) - 1);
}

inline DensityValue haar_keep_prob(const CoefficientTable& table, double beta, PointView x) {
  if (table.max_order() == 0) {
    check_unit_cube(x);
    return {1.0, 1.0 - beta / 2.0};
  }
  const double w = static_cast<double>(shape_count(table.max_order(), static_cast<unsigned>(table.dim())));
  // r = S/W is exactly +-1 at the extremes; written this way both lambda and
  // the keep probability land on their bounds without rounding past them.
  const double r = static_cast<double>(table.signed_sum(x)) / w;
  return {1.0 + beta / 2.0 * r, 1.0 - beta / 2.0 * (1.0 - r)};
}

inline double greedy_keep_prob(const CoefficientTable& table, double beta, PointView x,
                               GreedyConvention convention = GreedyConvention::balance) {
  long long s = table.signed_sum(x);
  if (convention == GreedyConvention::paper_sign) s = -s;
  if (s > 0) return 1.0;
  if (s < 0) return 1.0 - beta;
  return 1.0 - beta / 2.0;
}

inline double monte_carlo_keep_prob(PointView) { return 1.0; }

/// Deterministic uniform stream on [0,1) with 53 random bits per draw.
class UniformStream {
 public:
  UniformStream(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    gen_.seed(seq);
  }
  double next() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  void fill(std::span<double> out) {
    for (double& v : out) v = next();
  }

 private:
  std::mt19937_64 gen_;
};

/// Seed for replication `index` of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x7e5eedu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

inline constexpr std::uint32_t kDecisionStream = 0;
inline constexpr std::uint32_t kCandidateStream = 1;

class CandidateSource {
 public:
  virtual ~CandidateSource() = default;
  /// Fills `out` with the next candidate; false once the source is exhausted.
  virtual bool next(std::span<double> out) = 0;
};

/// I.i.d. uniform candidates on [0,1)^d.
class UniformCandidates final : public CandidateSource {
 public:
  explicit UniformCandidates(std::uint64_t seed) : stream_(seed, kCandidateStream) {}
  bool next(std::span<double> out) override {
    stream_.fill(out);
    return true;
  }

 private:
  UniformStream stream_;
};

class PointSetCandidates final : public CandidateSource {
 public:
  explicit PointSetCandidates(const PointSet& points) : points_(&points) {}
  bool next(std::span<double> out) override {
    if (next_ >= points_->size()) return false;
    const PointView p = (*points_)[next_++];
    std::copy(p.begin(), p.end(), out.begin());
    return true;
  }

 private:
  const PointSet* points_;
  std::size_t next_ = 0;
};

class CandidateExhausted : public std::runtime_error {
 public:
  explicit CandidateExhausted(std::size_t produced)
      : std::runtime_error("candidate source exhausted after " + std::to_string(produced) + " outputs"),
        outputs_produced(produced) {}
  std::size_t outputs_produced;
};

struct DecisionRecord {
  std::size_t output_index = 0;     // n of the output being placed
  std::size_t candidate_index = 0;  // 1-based position in the candidate stream
  Point candidate;
  double keep_prob = 1.0;
  bool kept = true;
  bool forced = false;
};

class ThinningEngine {
 public:
  ThinningEngine(StrategyConfig config, std::uint64_t seed,
                 GreedyConvention convention = GreedyConvention::balance)
      : config_(config), convention_(convention), uniforms_(seed, kDecisionStream), outputs_(checked(config).dim) {
    if (config_.kind == StrategyKind::greedy_paper_sign) convention_ = GreedyConvention::paper_sign;
    if (config_.kind == StrategyKind::greedy && convention == GreedyConvention::paper_sign)
      config_.kind = StrategyKind::greedy_paper_sign;
    if (config_.uses_table()) table_.emplace(config_.dim);
  }

  const StrategyConfig& config() const { return config_; }
  std::size_t next_output_index() const { return n_next_; }
  bool rejected_previous() const { return rejected_previous_; }
  std::size_t candidates_consumed() const { return consumed_; }
  std::size_t rejections() const { return consumed_ - outputs_.size(); }
  const PointSet& outputs() const { return outputs_; }
  const CoefficientTable* table() const { return table_ ? &*table_ : nullptr; }

  /// Keep probability of a non-forced decision at x in the current state.
  double keep_probability(PointView x) {
    sync_order();
    switch (config_.kind) {
      case StrategyKind::monte_carlo: check_unit_cube(x); return monte_carlo_keep_prob(x);
      case StrategyKind::haar: return haar_keep_prob(*table_, config_.beta, x).keep_prob;
      case StrategyKind::greedy:
      case StrategyKind::greedy_paper_sign: return greedy_keep_prob(*table_, config_.beta, x, convention_);
    }
    return 1.0;
  }

  /// Decide a single candidate.
  DecisionRecord offer(PointView candidate) {
    if (candidate.size() != config_.dim) throw std::invalid_argument("candidate dimension mismatch");
    check_unit_cube(candidate);
    DecisionRecord rec;
    rec.output_index = n_next_;
    rec.candidate_index = ++consumed_;
    rec.candidate.assign(candidate.begin(), candidate.end());
    if (rejected_previous_) {
      rec.forced = true;
      rec.kept = true;
      rec.keep_prob = 1.0;
    } else {
      rec.keep_prob = keep_probability(candidate);
      rec.kept = uniforms_.next() <= rec.keep_prob;
    }
    if (rec.kept) {
      sync_order();
      if (table_) table_->insert(candidate);
      outputs_.push_back(candidate);
      ++n_next_;
      rejected_previous_ = false;
    } else {
      rejected_previous_ = true;
    }
    return rec;
  }

  /// Produce the next output, pulling one or two candidates. Returns the
  /// decision for the kept candidate; a preceding rejection goes to `rejected`.
  DecisionRecord step(CandidateSource& source, DecisionRecord* rejected = nullptr) {
    if (rejected_previous_) throw std::logic_error("step: engine is mid-step after a rejection");
    Point buf(config_.dim);
    if (!source.next(buf)) throw CandidateExhausted(outputs_.size());
    DecisionRecord first = offer(buf);
    if (first.kept) return first;
    if (rejected) *rejected = first;
    if (!source.next(buf)) throw CandidateExhausted(outputs_.size());
    DecisionRecord second = offer(buf);
    if (!second.kept) throw std::logic_error("two consecutive rejections");
    return second;
  }

 private:
  static const StrategyConfig& checked(const StrategyConfig& c) {
    c.validate();
    return c;
  }

  void sync_order() {
    if (!table_) return;
    const unsigned h = order_for_output(n_next_);
    if (h > table_->max_order()) table_->grow(h);
  }

  StrategyConfig config_;
  GreedyConvention convention_;
  UniformStream uniforms_;
  PointSet outputs_;
  std::optional<CoefficientTable> table_;
  std::size_t n_next_ = 1;
  std::size_t consumed_ = 0;
  bool rejected_previous_ = false;
};

struct RunResult {
  PointSet outputs;
  std::vector<DecisionRecord> decisions;  // every candidate, in stream order (when recorded)
  std::size_t candidates_consumed = 0;
};

/// Run a strategy until n_max outputs exist.
inline RunResult run(const StrategyConfig& config, std::uint64_t seed, std::size_t n_max, CandidateSource& source,
                     bool record_decisions = true) {
  ThinningEngine engine(config, seed);
  RunResult result;
  if (record_decisions) result.decisions.reserve(n_max + n_max / 4);
  DecisionRecord rejected;
  while (engine.outputs().size() < n_max) {
    rejected.kept = true;
    DecisionRecord kept = engine.step(source, &rejected);
    if (record_decisions) {
      if (!rejected.kept) result.decisions.push_back(std::move(rejected));
      result.decisions.push_back(std::move(kept));
    }
  }
  result.candidates_consumed = engine.candidates_consumed();
  result.outputs = engine.outputs();
  return result;
}

/// Run against the synthetic uniform candidate stream derived from `seed`.
inline RunResult run(const StrategyConfig& config, std::uint64_t seed, std::size_t n_max, bool record_decisions = true) {
  UniformCandidates source(seed);
  return run(config, seed, n_max, source, record_decisions);
}

}  // namespace thinning
