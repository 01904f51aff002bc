// Command-line front end: simulate | thin | table1 | table2 | disc | bias.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "thinning/discrepancy.hpp"
#include "thinning/experiments.hpp"
#include "thinning/strategies.hpp"

namespace {

using namespace thinning;

struct Options {
  std::size_t dim = 1;
  double beta = 1.0;
  std::vector<std::string> strategies;
  std::size_t n = 1024;
  std::vector<std::size_t> checkpoints;
  std::size_t reps = 1;
  std::uint64_t seed = 1;
  std::optional<unsigned> lattice_order;
  std::vector<std::string> rects;
  std::string metric = "auto";
  std::string candidates;
  std::string out;
  std::string kept;
  std::string convention = "balance";
  bool brute = false;
  bool timing = false;
  unsigned threads = 1;
};

/// Output stream: the named file, or stdout when the name is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

class Input {
 public:
  explicit Input(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ifstream>(path);
      if (!*file_) throw std::runtime_error("cannot open '" + path + "'");
    }
  }
  std::istream& get() { return file_ ? *file_ : std::cin; }

 private:
  std::unique_ptr<std::ifstream> file_;
};

GreedyConvention parse_convention(const std::string& s) {
  if (s == "balance") return GreedyConvention::balance;
  if (s == "paper_sign") return GreedyConvention::paper_sign;
  throw std::invalid_argument("unknown convention '" + s + "' (expected balance or paper_sign)");
}

std::vector<StrategyKind> parse_strategies(const std::vector<std::string>& names) {
  std::vector<StrategyKind> out;
  for (const std::string& name : names) out.push_back(parse_strategy(name));
  if (out.empty()) out.push_back(StrategyKind::haar);
  return out;
}

ExperimentConfig experiment_from(const Options& o) {
  ExperimentConfig c;
  c.strategies = parse_strategies(o.strategies);
  c.dim = o.dim;
  c.beta = o.beta;
  c.convention = parse_convention(o.convention);
  c.master_seed = o.seed;
  c.reps = o.reps;
  c.checkpoints = o.checkpoints.empty() ? std::vector<std::size_t>{o.n} : o.checkpoints;
  c.lattice_order = o.lattice_order;
  if (!o.candidates.empty()) c.candidates_path = o.candidates;
  c.timing = o.timing;
  c.threads = o.threads;

  c.metrics.clear();
  const bool want_disc = o.metric == "disc" || o.metric == "all" || (o.metric == "auto" && o.rects.empty());
  const bool want_bias = o.metric == "bias" || o.metric == "all" || (o.metric == "auto" && !o.rects.empty());
  if (o.metric != "auto" && !want_disc && !want_bias)
    throw std::invalid_argument("unknown metric '" + o.metric + "' (expected disc, bias or all)");
  if (want_bias && o.rects.empty()) throw std::invalid_argument("bias metric needs at least one --rect");
  if (want_disc) c.metrics.push_back(MetricSpec::disc());
  if (want_bias)
    for (const std::string& r : o.rects) c.metrics.push_back(MetricSpec::bias(parse_rect(r)));
  return c;
}

int report(const SimulationOutcome& outcome) {
  for (const std::string& e : outcome.errors) std::cerr << "error: " << e << '\n';
  return outcome.complete() ? 0 : 1;
}

int cmd_simulate(const Options& o) {
  const ExperimentConfig config = experiment_from(o);
  Output out(o.out);
  return report(simulate(config, out.get()));
}

int cmd_table1(const Options& o) {
  ExperimentConfig config = table1_config();
  if (!o.checkpoints.empty()) config.checkpoints = o.checkpoints;
  config.threads = o.threads;
  config.timing = o.timing;
  Output out(o.out);
  out.get() << kTable1Note << '\n';
  return report(simulate(config, out.get()));
}

int cmd_table2(const Options& o) {
  std::vector<ExperimentConfig> configs = table2_configs();
  for (ExperimentConfig& c : configs) {
    if (!o.checkpoints.empty()) c.checkpoints = o.checkpoints;
    c.threads = o.threads;
    c.timing = o.timing;
  }
  Output out(o.out);
  out.get() << kTable2Note << '\n';
  return report(simulate(configs, out.get()));
}

int cmd_thin(const Options& o) {
  const StrategyConfig config{parse_strategies(o.strategies).front(), o.beta, o.dim};
  Input in(o.candidates);
  Output out(o.out);
  std::unique_ptr<std::ofstream> kept;
  if (!o.kept.empty()) {
    kept = std::make_unique<std::ofstream>(o.kept);
    if (!*kept) throw std::runtime_error("cannot open '" + o.kept + "' for writing");
  }
  const ThinSummary s = thin_stream(config, o.seed, in.get(), out.get(), kept.get(), parse_convention(o.convention));
  std::cerr << s.candidates << " candidates, " << s.kept << " kept, " << s.rejected() << " rejected\n";
  return 0;
}

int cmd_disc(const Options& o) {
  Input in(o.candidates);
  const PointSet points = read_points(in.get(), o.dim);
  const DiscReport r = o.brute ? brute_disc_oracle(points) : discrepancy(points, o.lattice_order);
  Output out(o.out);
  out.get() << kDiscCsvHeader << '\n';
  write_disc_report(out.get(), r);
  return 0;
}

int cmd_bias(const Options& o) {
  if (o.rects.empty()) throw std::invalid_argument("bias needs at least one --rect");
  Input in(o.candidates);
  const PointSet points = read_points(in.get(), o.dim);
  Output out(o.out);
  out.get() << "rect,n,count,volume,bias\n";
  for (const std::string& text : o.rects) {
    const RectSpec rect = parse_rect(text);
    if (rect.dim() != o.dim) throw std::invalid_argument("rectangle dimension does not match --dim");
    out.get() << csv_field(format_rect(rect)) << ',' << points.size() << ',' << count_in(points, rect) << ','
              << format_value(rect.volume()) << ',' << format_value(rect_bias(points, rect)) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online (1+beta)-thinning of uniform point streams: Haar and greedy-Haar strategies, "
               "discrepancy metrics and replicated experiments"};
  app.set_config("--config", "", "Read options from a key=value file");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--dim", o.dim, "Dimension d")->check(CLI::Range(1, 64));
  app.add_option("--beta", o.beta, "Rejection budget beta in (0,1]");
  app.add_option("--strategy", o.strategies, "monte_carlo | haar | greedy | greedy_paper_sign (comma list)")
      ->delimiter(',');
  app.add_option("--n", o.n, "Number of outputs when --checkpoints is not given");
  app.add_option("--checkpoints", o.checkpoints, "Comma list of strictly increasing output counts")->delimiter(',');
  app.add_option("--reps", o.reps, "Replications per strategy");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--lattice-order", o.lattice_order, "Lattice order for d >= 2 discrepancy");
  app.add_option("--rect", o.rects, "Rectangle 'lo1,hi1;lo2,hi2;...' (repeatable)");
  app.add_option("--metric", o.metric, "disc | bias | all (default: bias when --rect is given, else disc)");
  app.add_option("--candidates", o.candidates, "Point file, one comma-separated point per line ('-' for stdin)");
  app.add_option("--out", o.out, "Output file (default stdout)");
  app.add_option("--kept", o.kept, "thin: also write kept points here");
  app.add_option("--convention", o.convention, "Greedy sign convention: balance | paper_sign");
  app.add_flag("--brute", o.brute, "disc: use exhaustive enumeration");
  app.add_flag("--timing", o.timing, "Report wall-clock seconds (output is then not byte-reproducible)");
  app.add_option("--threads", o.threads, "Worker threads for replications")
      ->envname("THINNING_THREADS")
      ->check(CLI::Range(1u, 1024u));

  int (*handler)(const Options&) = nullptr;
  app.add_subcommand("simulate", "Replicated runs with metrics at checkpoints")->callback([&] { handler = cmd_simulate; });
  app.add_subcommand("thin", "Keep/reject decisions for a candidate stream")->callback([&] { handler = cmd_thin; });
  app.add_subcommand("table1", "Discrepancy preset (d=1, 2^7..2^19)")->callback([&] { handler = cmd_table1; });
  app.add_subcommand("table2", "Fixed-rectangle bias preset (d=1,2)")->callback([&] { handler = cmd_table2; });
  app.add_subcommand("disc", "Discrepancy of a point file")->callback([&] { handler = cmd_disc; });
  app.add_subcommand("bias", "Bias of a point file on rectangles")->callback([&] { handler = cmd_bias; });

  CLI11_PARSE(app, argc, argv);
  try {
    return handler(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
