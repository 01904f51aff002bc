#pragma once

// Replicated simulation runs, CSV emission and the table presets.
//
// Output of a simulation is a raw block (one row per run, checkpoint and
// metric) followed by a blank line and a summary block (one row per strategy,
// checkpoint and metric). Rows are emitted in canonical order regardless of
// how many worker threads run the replications.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "thinning/discrepancy.hpp"
#include "thinning/dyadic_haar.hpp"
#include "thinning/point.hpp"
#include "thinning/strategies.hpp"

namespace thinning {

inline constexpr std::string_view kRowHeader = "strategy,d,beta,seed,run,n,metric,value,seconds";
inline constexpr std::string_view kSummaryHeader = "strategy,d,n,metric,mean,std,stderr,reps";

/// Six significant digits, '.' separator, independent of the C locale.
inline std::string format_value(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  return std::string(buf, end);
}

/// RFC 4180 quoting for fields that contain separators.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

// ---------------------------------------------------------------------------
// Point streams

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

/// Parses "x1,x2,...,xd" into out; throws std::invalid_argument / std::domain_error.
inline void parse_point(std::string_view line, std::span<double> out) {
  std::size_t axis = 0;
  while (true) {
    const auto comma = line.find(',');
    if (axis == out.size()) throw std::invalid_argument("expected " + std::to_string(out.size()) + " coordinates");
    out[axis++] = parse_double(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  if (axis != out.size()) throw std::invalid_argument("expected " + std::to_string(out.size()) + " coordinates");
  check_unit_cube(out);
}

inline bool blank_line(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

/// Candidates read lazily from a text stream, one point per line. Blank lines
/// and lines starting with '#' are skipped.
class StreamCandidates final : public CandidateSource {
 public:
  StreamCandidates(std::istream& in) : in_(&in) {}
  bool next(std::span<double> out) override {
    std::string line;
    while (std::getline(*in_, line)) {
      ++line_;
      if (blank_line(line) || line.front() == '#') continue;
      try {
        parse_point(line, out);
      } catch (const std::exception& e) {
        throw ParseError(line_, e.what());
      }
      return true;
    }
    return false;
  }
  std::size_t line() const { return line_; }

 private:
  std::istream* in_;
  std::size_t line_ = 0;
};

inline PointSet read_points(std::istream& in, std::size_t dim) {
  PointSet points(dim);
  StreamCandidates source(in);
  Point buf(dim);
  while (source.next(buf)) points.push_back(buf);
  return points;
}

inline void write_points(std::ostream& out, const PointSet& points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointView p = points[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (k) out << ',';
      out << format_exact(p[k]);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Configuration and rows

struct MetricSpec {
  enum class Kind { discrepancy, bias } kind = Kind::discrepancy;
  RectSpec rect;  // for bias

  std::string name() const { return kind == Kind::discrepancy ? "disc" : "bias(" + format_rect(rect) + ")"; }
  static MetricSpec disc() { return {}; }
  static MetricSpec bias(RectSpec r) { return {Kind::bias, std::move(r)}; }
};

struct ExperimentConfig {
  std::vector<StrategyKind> strategies{StrategyKind::haar};
  std::size_t dim = 1;
  double beta = 1.0;
  GreedyConvention convention = GreedyConvention::balance;
  std::uint64_t master_seed = 1;
  std::size_t reps = 1;
  std::vector<std::size_t> checkpoints{1024};
  std::vector<MetricSpec> metrics{MetricSpec::disc()};
  std::optional<unsigned> lattice_order;      // d >= 2 discrepancy
  std::optional<std::string> candidates_path;  // external candidates instead of the synthetic stream
  bool timing = false;                         // report wall time; off keeps output byte-reproducible
  unsigned threads = 1;

  void validate() const {
    StrategyConfig{StrategyKind::haar, beta, dim}.validate();
    if (strategies.empty()) throw std::invalid_argument("at least one strategy is required");
    if (reps < 1) throw std::invalid_argument("reps must be at least 1");
    if (checkpoints.empty()) throw std::invalid_argument("at least one checkpoint is required");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      if (checkpoints[i] == 0) throw std::invalid_argument("checkpoints must be positive");
      if (i && checkpoints[i] <= checkpoints[i - 1]) throw std::invalid_argument("checkpoints must be strictly increasing");
    }
    if (metrics.empty()) throw std::invalid_argument("at least one metric is required");
    for (const MetricSpec& m : metrics) {
      if (m.kind == MetricSpec::Kind::bias) {
        m.rect.validate();
        if (m.rect.dim() != dim) throw std::invalid_argument("bias rectangle dimension does not match --dim");
      }
    }
  }
};

struct ResultRow {
  std::string strategy;
  std::size_t d = 1;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::size_t run = 0;
  std::size_t n = 0;
  std::string metric;
  double value = 0.0;
  double wall_seconds = 0.0;
};

inline void write_row(std::ostream& out, const ResultRow& r) {
  out << r.strategy << ',' << r.d << ',' << format_value(r.beta) << ',' << r.seed << ',' << r.run << ',' << r.n << ','
      << csv_field(r.metric) << ',' << format_value(r.value) << ',' << format_value(r.wall_seconds) << '\n';
}

struct Stats {
  double mean = 0.0;
  double std = 0.0;     // sample standard deviation (n - 1); 0 for a single value
  double stderr_ = 0.0;  // std / sqrt(count)
  std::size_t count = 0;
};

inline Stats stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("stats: empty group");
  Stats s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  s.stderr_ = s.std / std::sqrt(static_cast<double>(s.count));
  return s;
}

struct SummaryRow {
  std::string strategy;
  std::size_t d = 1;
  std::size_t n = 0;
  std::string metric;
  Stats stats;
};

/// Groups rows by (strategy, d, n, metric) in order of first appearance.
inline std::vector<SummaryRow> summarize(std::span<const ResultRow> rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<double>> values;
  std::map<std::tuple<std::string, std::size_t, std::size_t, std::string>, std::size_t> index;
  for (const ResultRow& r : rows) {
    auto key = std::make_tuple(r.strategy, r.d, r.n, r.metric);
    auto [it, inserted] = index.emplace(key, out.size());
    if (inserted) {
      out.push_back({r.strategy, r.d, r.n, r.metric, {}});
      values.emplace_back();
    }
    values[it->second].push_back(r.value);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].stats = stats(values[i]);
  return out;
}

inline void write_summary(std::ostream& out, std::span<const SummaryRow> rows) {
  out << kSummaryHeader << '\n';
  for (const SummaryRow& s : rows)
    out << s.strategy << ',' << s.d << ',' << s.n << ',' << csv_field(s.metric) << ',' << format_value(s.stats.mean)
        << ',' << format_value(s.stats.std) << ',' << format_value(s.stats.stderr_) << ',' << s.stats.count << '\n';
}

// ---------------------------------------------------------------------------
// Replications

inline double evaluate_metric(const MetricSpec& metric, const PointSet& points, std::optional<unsigned> lattice_order) {
  if (metric.kind == MetricSpec::Kind::bias) return rect_bias(points, metric.rect);
  return discrepancy(points, lattice_order).value;
}

struct ReplicateResult {
  std::vector<ResultRow> rows;
  std::optional<std::string> error;  // set when candidates ran out; rows hold the checkpoints reached
};

inline std::string strategy_label(StrategyKind kind, GreedyConvention convention) {
  if (kind == StrategyKind::greedy && convention == GreedyConvention::paper_sign)
    return std::string(to_string(StrategyKind::greedy_paper_sign));
  return std::string(to_string(kind));
}

/// One run of one strategy through every checkpoint.
inline ReplicateResult run_replicate(const ExperimentConfig& config, StrategyKind kind, std::size_t run_index) {
  const std::uint64_t seed = derive_seed(config.master_seed, run_index);
  ThinningEngine engine(StrategyConfig{kind, config.beta, config.dim}, seed, config.convention);

  std::unique_ptr<std::ifstream> file;
  std::unique_ptr<CandidateSource> source;
  if (config.candidates_path) {
    file = std::make_unique<std::ifstream>(*config.candidates_path);
    if (!*file) throw std::runtime_error("cannot open candidates file '" + *config.candidates_path + "'");
    source = std::make_unique<StreamCandidates>(*file);
  } else {
    source = std::make_unique<UniformCandidates>(seed);
  }

  ReplicateResult result;
  const std::string label = strategy_label(kind, config.convention);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t checkpoint : config.checkpoints) {
    try {
      while (engine.outputs().size() < checkpoint) engine.step(*source);
    } catch (const CandidateExhausted& e) {
      result.error = label + " run " + std::to_string(run_index) + ": " + e.what();
      return result;
    }
    const double elapsed =
        config.timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() : 0.0;
    for (const MetricSpec& metric : config.metrics) {
      result.rows.push_back({label, config.dim, config.beta, seed, run_index, checkpoint, metric.name(),
                             evaluate_metric(metric, engine.outputs(), config.lattice_order), elapsed});
    }
  }
  return result;
}

struct SimulationOutcome {
  std::vector<ResultRow> rows;
  std::vector<std::string> errors;
  bool complete() const { return errors.empty(); }
};

/// Runs every (strategy, replication) of each config, streaming raw rows to
/// `out` in canonical order (config, strategy, run, checkpoint, metric), then
/// appends the summary block.
inline SimulationOutcome simulate(std::span<const ExperimentConfig> configs, std::ostream& out) {
  struct Task {
    const ExperimentConfig* config;
    StrategyKind kind;
    std::size_t run;
  };
  std::vector<Task> tasks;
  unsigned threads = 1;
  for (const ExperimentConfig& c : configs) {
    c.validate();
    threads = std::max(threads, c.threads);
    for (StrategyKind k : c.strategies)
      for (std::size_t r = 0; r < c.reps; ++r) tasks.push_back({&c, k, r});
  }

  std::vector<std::optional<ReplicateResult>> done(tasks.size());
  std::vector<std::exception_ptr> failures(tasks.size());
  std::mutex mutex;
  std::condition_variable ready;
  std::size_t next_task = 0;

  auto worker = [&] {
    while (true) {
      std::size_t t;
      {
        std::lock_guard lock(mutex);
        if (next_task == tasks.size()) return;
        t = next_task++;
      }
      std::optional<ReplicateResult> result;
      std::exception_ptr failure;
      try {
        result = run_replicate(*tasks[t].config, tasks[t].kind, tasks[t].run);
      } catch (...) {
        failure = std::current_exception();
        result.emplace();
      }
      {
        std::lock_guard lock(mutex);
        done[t] = std::move(result);
        failures[t] = failure;
      }
      ready.notify_all();
    }
  };

  std::vector<std::jthread> pool;
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks.size())));
  for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);

  SimulationOutcome outcome;
  std::exception_ptr first_failure;
  out << kRowHeader << '\n';
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    ReplicateResult result;
    {
      std::unique_lock lock(mutex);
      ready.wait(lock, [&] { return done[t].has_value(); });
      result = std::move(*done[t]);
      if (failures[t] && !first_failure) first_failure = failures[t];
    }
    for (const ResultRow& r : result.rows) write_row(out, r);
    out.flush();
    if (result.error) outcome.errors.push_back(*result.error);
    outcome.rows.insert(outcome.rows.end(), std::make_move_iterator(result.rows.begin()),
                        std::make_move_iterator(result.rows.end()));
  }
  pool.clear();
  if (first_failure) std::rethrow_exception(first_failure);

  if (!outcome.rows.empty()) {
    out << '\n';
    write_summary(out, summarize(outcome.rows));
  }
  out.flush();
  return outcome;
}

inline SimulationOutcome simulate(const ExperimentConfig& config, std::ostream& out) {
  return simulate(std::span<const ExperimentConfig>(&config, 1), out);
}

// ---------------------------------------------------------------------------
// Presets

inline constexpr std::uint64_t kPresetSeed = 2024;

/// Discrepancy in d = 1, beta = 1, 20 replications, n = 2^7, 2^9, ..., 2^19.
inline ExperimentConfig table1_config() {
  ExperimentConfig c;
  c.strategies = {StrategyKind::monte_carlo, StrategyKind::haar, StrategyKind::greedy};
  c.dim = 1;
  c.beta = 1.0;
  c.master_seed = kPresetSeed;
  c.reps = 20;
  c.checkpoints.clear();
  for (unsigned k = 7; k <= 19; k += 2) c.checkpoints.push_back(std::size_t{1} << k);
  c.metrics = {MetricSpec::disc()};
  return c;
}

inline constexpr std::string_view kTable1Note =
    "# table1: exact 1-D discrepancy, d=1, beta=1, 20 reps, checkpoints 2^7..2^19 (odd powers); "
    "n=56 does not fit the 2^k schedule and is omitted";

inline RectSpec cube_rect(std::size_t d, double lo, double hi) {
  return {std::vector<double>(d, lo), std::vector<double>(d, hi)};
}

/// Fixed-rectangle biases for [0,1/2)^d and [1/3,5/6)^d, d = 1 and 2, n = 10..10^5.
inline std::vector<ExperimentConfig> table2_configs() {
  std::vector<ExperimentConfig> out;
  for (std::size_t d : {1, 2}) {
    ExperimentConfig c;
    c.strategies = {StrategyKind::monte_carlo, StrategyKind::haar, StrategyKind::greedy};
    c.dim = d;
    c.beta = 1.0;
    c.master_seed = kPresetSeed;
    c.reps = 20;
    c.checkpoints = {10, 100, 1000, 10000, 100000};
    c.metrics = {MetricSpec::bias(cube_rect(d, 0.0, 0.5)), MetricSpec::bias(cube_rect(d, 1.0 / 3.0, 5.0 / 6.0))};
    out.push_back(std::move(c));
  }
  return out;
}

inline constexpr std::string_view kTable2Note =
    "# table2: bias |nu(R) - n|R|| for R = [0,1/2)^d and [1/3,5/6)^d, d in {1,2}, beta=1, 20 reps";

// ---------------------------------------------------------------------------
// Streaming thinning of external candidates

struct ThinSummary {
  std::size_t candidates = 0;
  std::size_t kept = 0;
  std::size_t rejected() const { return candidates - kept; }
};

/// Decides every candidate line of `in`, writing "<index>,<keep|reject>" per
/// candidate to `decisions` and, optionally, kept points to `kept`.
inline ThinSummary thin_stream(const StrategyConfig& config, std::uint64_t seed, std::istream& in,
                               std::ostream& decisions, std::ostream* kept = nullptr,
                               GreedyConvention convention = GreedyConvention::balance) {
  ThinningEngine engine(config, seed, convention);
  StreamCandidates source(in);
  Point buf(config.dim);
  ThinSummary summary;
  while (source.next(buf)) {
    const DecisionRecord rec = engine.offer(buf);
    ++summary.candidates;
    decisions << rec.candidate_index << ',' << (rec.kept ? "keep" : "reject") << '\n';
    if (rec.kept) {
      ++summary.kept;
      if (kept) {
        for (std::size_t k = 0; k < buf.size(); ++k) *kept << (k ? "," : "") << format_exact(buf[k]);
        *kept << '\n';
      }
    }
  }
  return summary;
}

inline void write_disc_report(std::ostream& out, const DiscReport& r) {
  out << to_string(r.method) << ',' << (r.lattice_order ? std::to_string(*r.lattice_order) : std::string()) << ','
      << format_value(r.value) << ',' << format_value(r.additive_error_bound) << ','
      << csv_field(format_rect(r.argmax_rect)) << '\n';
}

}  // namespace thinning
