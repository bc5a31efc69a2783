#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "corrprobit/aggregator.hpp"
#include "corrprobit/error.hpp"
#include "corrprobit/estimator3.hpp"
#include "corrprobit/experiments.hpp"
#include "corrprobit/io.hpp"
#include "corrprobit/witness.hpp"

namespace corrprobit::cli {
namespace {

struct Options {
  std::string model, counts, rankings, out, diagnostics, format = "json", solver = "path", regime = "0/I";
  std::uint64_t seed = 0;
  int n = 0;
  std::uint64_t samples_per_triple = 0;
  std::uint64_t mc_draws = 100000;
  std::size_t grid = 0;
  std::vector<std::string> triples;
  bool exact = false;
  // witness / lowerbound
  int count = 5;
  double nu = 0.25;
  double epsilon = 0.05;
  int i_star = 0, j_star = 1;
  // experiment
  std::uint64_t training = 100000;
  int trials = 10000;
  int mle_steps = 9000;
  bool no_moment = false;
  std::vector<int> sizes{1, 2, 3};
  std::size_t max_subsets = 0;
};

Triple parse_triple(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "bad triple '" + s + "'");
    }
  }
  if (v.size() != 3) fail(ErrorCode::InvalidArgument, "a triple needs three items: '" + s + "'");
  return {v[0], v[1], v[2]};
}

std::string sidecar(const Options& o) {
  if (!o.diagnostics.empty()) return o.diagnostics;
  return o.out + ".diagnostics.json";
}

int cmd_sample(const Options& o, std::ostream& out) {
  if (o.samples_per_triple == 0) fail(ErrorCode::InvalidArgument, "--samples-per-triple must be positive");
  const ProbitModel model = read_model_file(o.model);
  check_normalized(model);
  std::vector<Triple> triples;
  for (const auto& t : o.triples) triples.push_back(parse_triple(t));
  if (triples.empty()) triples = select_triples(build_subgraph(model.n()));
  std::vector<TripleCounts> counts;
  for (std::size_t k = 0; k < triples.size(); ++k) {
    TripleCounts c;
    c.triple = triples[k];
    c.counts = sample_triple_counts(model, triples[k], o.samples_per_triple, derive_seed(o.seed, k));
    counts.push_back(c);
  }
  std::ostringstream csv;
  write_counts_csv(csv, counts);
  write_text_file(o.out, csv.str());
  out << "sampled " << triples.size() << " triple(s) x " << o.samples_per_triple << " -> " << o.out << "\n";
  return 0;
}

int cmd_estimate(const Options& o, std::ostream& out) {
  AggregatorOptions agg;
  agg.solver = o.solver == "bisection" ? SigmaSolver::Bisection : SigmaSolver::PathPropagation;
  if (o.solver != "path" && o.solver != "bisection") fail(ErrorCode::InvalidArgument, "--solver must be path or bisection");
  ProbitModel result;
  Json diag;
  if (!o.counts.empty()) {
    const auto counts = read_counts_file(o.counts);
    if (counts.empty()) fail(ErrorCode::InvalidArgument, "counts file has no rows");
    int n = o.n;
    for (const auto& c : counts) n = std::max(n, c.triple[2] + 1);
    if (counts.size() == 1 && n == 3) {
      const auto r = estimate_triple(counts[0], agg.estimator);
      result = estimate_as_model(r.estimate);
      diag = three_item_diagnostics_to_json(r);
    } else {
      std::vector<TripleFrequencies> freqs;
      for (const auto& c : counts) freqs.push_back(TripleFrequencies::from_counts(c));
      const GlobalEstimate g = estimate_from_frequencies(n, freqs, agg);
      result = g.model;
      diag = diagnostics_to_json(g);
    }
  } else if (!o.model.empty()) {
    const ProbitModel truth = read_model_file(o.model);
    check_normalized(truth);
    GlobalEstimate g;
    if (o.exact) {
      ProbabilityOptions p;
      p.grid_resolution = o.grid;
      ExactSource src(truth, p);
      g = estimate_model(src, truth.n(), 1, agg);
    } else {
      if (o.samples_per_triple == 0) fail(ErrorCode::InvalidArgument, "--samples-per-triple must be positive");
      ModelSampleSource src(truth, o.seed);
      g = estimate_model(src, truth.n(), o.samples_per_triple, agg);
    }
    result = g.model;
    diag = diagnostics_to_json(g);
  } else {
    fail(ErrorCode::InvalidArgument, "estimate needs --counts or --model");
  }
  write_text_file(o.out, model_to_json(result).dump(2) + "\n");
  const std::string side = sidecar(o);
  if (!side.empty()) write_text_file(side, diag.dump(2) + "\n");
  out << "estimated model over " << result.n() << " items -> " << o.out << "\n";
  return 0;
}

int cmd_ingest(const Options& o, std::ostream& out) {
  const RankingDataset data = read_rankings_file(o.rankings);
  IngestOptions opt;
  opt.seed = o.seed;
  if (o.max_subsets > 0) opt.max_subsets_per_row = o.max_subsets;
  const auto counts = ingest_rankings(data, opt);
  std::ostringstream csv;
  write_counts_csv(csv, counts);
  write_text_file(o.out, csv.str());
  out << "ingested " << data.rows.size() << " row(s) into " << counts.size() << " triple(s) -> " << o.out << "\n";
  return 0;
}

int cmd_witness(const Options& o, std::ostream& out) {
  const ProbitModel base = read_model_file(o.model);
  FamilyOptions opt;
  opt.count = o.count;
  opt.nu = o.nu;
  opt.seed = o.seed;
  const EquivalenceFamily fam = pairwise_equivalent_family(base, opt);
  write_text_file(o.out, family_to_json(fam).dump(2) + "\n");
  double min_gap = fam.sigma_gaps.empty() ? 0.0 : fam.sigma_gaps[0];
  for (double g : fam.sigma_gaps) min_gap = std::min(min_gap, g);
  out << "case " << static_cast<int>(fam.case_tag) << ": " << fam.members.size()
        << " member(s), min sigma gap " << min_gap << ", max pairwise deviation " << fam.max_pairwise_deviation
        << "\n";
  return 0;
}

int cmd_lowerbound(const Options& o, std::ostream& out) {
  ProbabilityOptions p;
  p.grid_resolution = o.grid;
  const LowerBoundPair lb = lowerbound_pair(o.n, o.epsilon, o.i_star, o.j_star, p);
  const Json j = lowerbound_to_json(lb);
  write_text_file(o.out, j.dump(2) + "\n");
  out << "trace " << lb.sigma1.trace() << " / " << lb.sigma2.trace() << ", gap " << lb.linf_gap << ", max KL "
        << j["max_kl"].get<double>() << " (eps^2 = " << o.epsilon * o.epsilon << ")\n";
  return 0;
}

int cmd_experiment(const Options& o, std::ostream& out) {
  const auto slash = o.regime.find('/');
  if (slash == std::string::npos) fail(ErrorCode::InvalidArgument, "--regime must look like 0/bin");
  SyntheticRegime regime;
  regime.mu_kind = parse_mean_kind(o.regime.substr(0, slash));
  regime.sigma_kind = parse_cov_kind(o.regime.substr(slash + 1));
  regime.n = o.n > 0 ? o.n : 8;
  regime.seed = o.seed;
  SyntheticConfig cfg;
  cfg.training_comparisons = o.training;
  cfg.task.trials = o.trials;
  cfg.mle.steps = o.mle_steps;
  if (o.grid > 0) cfg.mle.grid_resolution = o.grid;
  cfg.include_moment_estimator = !o.no_moment;
  cfg.seed = o.seed;
  const SyntheticResult res = run_synthetic(regime, cfg);
  std::string content;
  if (o.format == "csv") {
    std::ostringstream csv;
    write_reports_csv(csv, res.reports);
    content = csv.str();
  } else {
    Json j;
    j["regime"] = regime_label(regime);
    j["truth"] = model_to_json(res.truth);
    Json reports = Json::array();
    for (const auto& r : res.reports) reports.push_back(report_to_json(r));
    j["reports"] = reports;
    j["skipped"] = res.skipped;
    Json fitted = Json::object();
    for (const auto& m : res.methods)
      if (!m.is_logit) fitted[m.name] = model_to_json(m.model);
    j["fitted"] = fitted;
    content = j.dump(2) + "\n";
  }
  write_text_file(o.out, content);
  for (const auto& r : res.reports)
      out << r.regime << " " << r.method << ": accuracy " << r.q25 << " / " << r.q50 << " / " << r.q75 << "\n";
  return 0;
}

int cmd_welfare(const Options& o, std::ostream& out) {
  const ProbitModel model = o.model.empty() ? anticorrelated_welfare_model() : read_model_file(o.model);
  check_normalized(model);
  const std::vector<Method> methods{Method::probit("correlated_probit", model), Method::logit("top_means", model.mu)};
  const auto reports = run_welfare(model, methods, o.sizes, o.mc_draws, o.seed);
  write_text_file(o.out, welfare_to_json(reports).dump(2) + "\n");
  for (const auto& r : reports) {
      out << r.method << " size " << r.size << ": {";
      for (std::size_t k = 0; k < r.menu.size(); ++k) out << (k ? "," : "") << r.menu[k];
      out << "} value " << r.true_value << " +- " << r.true_std_error << "\n";
    }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Correlated probit estimation from best-of-three rankings"};
  app.set_config("--config", "", "INI/TOML config file; flags override it");
  app.require_subcommand(1);

  auto add_seed = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--seed", o.seed, "Random seed");
    if (required) opt->required();
  };

  auto* sample = app.add_subcommand("sample", "Sample best-of-three counts from a model");
  sample->add_option("--model", o.model, "Model JSON")->required();
  sample->add_option("--out", o.out, "Counts CSV")->required();
  sample->add_option("--samples-per-triple", o.samples_per_triple, "Draws per triple")->required();
  sample->add_option("--triple", o.triples, "Triple i,j,k (repeatable; default: subgraph triples)");
  add_seed(sample, true);

  auto* estimate = app.add_subcommand("estimate", "Estimate a model from counts or from a model source");
  estimate->add_option("--counts", o.counts, "Counts CSV");
  estimate->add_option("--model", o.model, "Model JSON used as the sample source");
  estimate->add_option("--n", o.n, "Item count (default: inferred)");
  estimate->add_option("--samples-per-triple", o.samples_per_triple, "Draws per triple when sampling");
  estimate->add_flag("--exact", o.exact, "Use integrated probabilities instead of samples");
  estimate->add_option("--grid", o.grid, "Fixed quadrature order (0: adaptive)");
  estimate->add_option("--solver", o.solver, "Covariance solver: path or bisection");
  estimate->add_option("--out", o.out, "Model JSON")->required();
  estimate->add_option("--diagnostics", o.diagnostics, "Diagnostics JSON (default: <out>.diagnostics.json)");
  add_seed(estimate, false);

  auto* ingest = app.add_subcommand("ingest", "Convert rankings to best-of-three counts");
  ingest->add_option("--rankings", o.rankings, "Rankings CSV (user,item,item,...)")->required();
  ingest->add_option("--out", o.out, "Counts CSV")->required();
  ingest->add_option("--max-subsets-per-row", o.max_subsets, "Cap on 3-subsets per row (0: all)");
  add_seed(ingest, false);

  auto* witness = app.add_subcommand("witness", "Build a pairwise-equivalent family");
  witness->add_option("--model", o.model, "Normalized base model JSON")->required();
  witness->add_option("--count", o.count, "Family size");
  witness->add_option("--nu", o.nu, "Initial perturbation scale");
  witness->add_option("--out", o.out, "Family JSON")->required();
  add_seed(witness, true);

  auto* lower = app.add_subcommand("lowerbound", "Build the lower-bound covariance pair");
  lower->add_option("--n", o.n, "Item count")->required();
  lower->add_option("--epsilon", o.epsilon, "Gap parameter in (0, 1/16]");
  lower->add_option("--i", o.i_star, "First perturbed item");
  lower->add_option("--j", o.j_star, "Second perturbed item");
  lower->add_option("--grid", o.grid, "Fixed quadrature order (0: adaptive)");
  lower->add_option("--out", o.out, "Report JSON")->required();

  auto* experiment = app.add_subcommand("experiment", "Run one synthetic accuracy regime");
  experiment->add_option("--regime", o.regime, "mean/covariance, e.g. 0/bin or r/I");
  experiment->add_option("--n", o.n, "Item count (default 8)");
  experiment->add_option("--training", o.training, "Training comparisons per data type");
  experiment->add_option("--trials", o.trials, "Evaluation trials");
  experiment->add_option("--mle-steps", o.mle_steps, "Optimizer steps per fit");
  experiment->add_option("--grid", o.grid, "Likelihood quadrature order");
  experiment->add_flag("--no-moment", o.no_moment, "Skip the moment estimator");
  experiment->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  experiment->add_option("--out", o.out, "Report file")->required();
  add_seed(experiment, true);

  auto* welfare = app.add_subcommand("welfare", "Welfare-maximizing menus");
  welfare->add_option("--model", o.model, "Model JSON (default: built-in anticorrelated model)");
  welfare->add_option("--sizes", o.sizes, "Menu sizes")->delimiter(',');
  welfare->add_option("--mc-draws", o.mc_draws, "Monte-Carlo draws");
  welfare->add_option("--out", o.out, "Report JSON")->required();
  add_seed(welfare, true);

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "{\"error\":\"ParseError\",\"message\":" << Json(std::string(e.what())).dump() << ",\"exit_code\":2}\n";
    return 2;
  }

  try {
    if (*sample) return cmd_sample(o, out);
    if (*estimate) return cmd_estimate(o, out);
    if (*ingest) return cmd_ingest(o, out);
    if (*witness) return cmd_witness(o, out);
    if (*lower) return cmd_lowerbound(o, out);
    if (*experiment) return cmd_experiment(o, out);
    if (*welfare) return cmd_welfare(o, out);
  } catch (const Error& e) {
    err << error_to_json(e).dump() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "{\"error\":\"Internal\",\"message\":" << Json(std::string(e.what())).dump() << ",\"exit_code\":3}\n";
    return 3;
  }
  return 2;
}

}  // namespace corrprobit::cli
