#include "spatialmn/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "spatialmn/config.hpp"
#include "spatialmn/downstream.hpp"
#include "spatialmn/io.hpp"
#include "spatialmn/matnorm.hpp"
#include "spatialmn/simulation.hpp"

namespace smn {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir;
};

struct FitOptions {
  std::vector<std::string> expression;
  std::vector<std::string> coords;
  std::optional<Index> m;
  std::optional<long> iterations;
  std::optional<long> burn_in;
  std::optional<double> trim;
  bool no_normalize = false;
  bool no_center = false;
  bool intersect = false;
};

struct SimOptions {
  std::optional<int> replicates;
  std::optional<Index> big_n;
  std::vector<Index> n;
  std::string scale;
  std::optional<double> rho;
  std::optional<double> range;
  std::optional<long> iterations;
  std::optional<long> burn_in;
};

struct DownstreamOptions {
  std::string input;
  std::string matrix;
  std::string coords;
  std::optional<double> cutoff;
  std::optional<Index> k;
  std::optional<Index> clusters;
  std::optional<int> restarts;
  std::optional<Index> k_max;
  std::optional<Index> clusters_max;
  std::optional<int> sample;
  std::optional<int> max_lag;
  std::optional<long> burn_in;
  bool abs_weights = false;
};

RunConfig load_config(const GlobalOptions& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : RunConfig::from_file(g.config);
  if (g.seed) cfg.set_seed(*g.seed);
  if (g.threads) cfg.set_threads(*g.threads);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  return cfg;
}

void apply_fit_options(RunConfig& cfg, const FitOptions& f) {
  require(f.expression.size() == f.coords.size(), "give one --coords per --expression");
  if (!f.expression.empty()) {
    cfg.input.samples.clear();
    for (std::size_t r = 0; r < f.expression.size(); ++r) cfg.input.samples.push_back({f.expression[r], f.coords[r]});
  }
  if (f.m) cfg.gibbs.m = *f.m;
  if (f.iterations) cfg.gibbs.iterations = *f.iterations;
  if (f.burn_in) cfg.gibbs.burn_in = *f.burn_in;
  if (f.trim) cfg.input.trim_quantile = *f.trim;
  if (f.no_normalize) cfg.input.normalize = false;
  if (f.no_center) cfg.input.center_rows = false;
  if (f.intersect) cfg.input.intersect_genes = true;
}

SpatialDataset load_sample(const SampleInput& in, const InputConfig& opts, std::ostream& err) {
  std::vector<std::string> warnings;
  SpatialDataset ds = ingest(in.expression, in.coords, &warnings);
  for (const auto& w : warnings) err << "warning: " << in.coords.string() << ": " << w << '\n';
  if (opts.trim_quantile > 0.0) ds = trim_quantile(std::move(ds), opts.trim_quantile);
  if (opts.normalize) ds = log_normalize(std::move(ds));
  return ds;
}

int do_fit(RunConfig cfg, bool multi, std::ostream& out, std::ostream& err) {
  const auto& samples_in = cfg.input.samples;
  if (multi) {
    require(samples_in.size() >= 1, "fit-multi needs --expression/--coords for each sample");
  } else {
    require(samples_in.size() == 1, "fit needs exactly one --expression and one --coords");
  }
  std::vector<SpatialDataset> data;
  for (const auto& s : samples_in) data.push_back(load_sample(s, cfg.input, err));
  if (cfg.input.intersect_genes) {
    data = intersect_genes(std::move(data));
  } else {
    require_same_genes(data);
  }
  std::vector<OrderedSample> ordered;
  SerializeContext ctx;
  for (auto& ds : data) {
    if (cfg.input.center_rows) ds = center_rows(std::move(ds));
    ds.validate();
    ordered.push_back(prepare_sample(ds.expression, ds.coords, cfg.gibbs.m));
    ctx.cell_ids.push_back(ds.cell_ids);
  }
  ctx.gene_names = data.front().gene_names;
  ctx.seed = cfg.gibbs.seed;
  ctx.config_json = cfg.to_json_text();
  ctx.iterations = cfg.gibbs.iterations;
  ctx.burn_in = cfg.gibbs.burn_in;
  const PosteriorSamples post = run_gibbs_multi(ordered, cfg.gibbs);
  serialize_posterior(cfg.out_dir, post, ctx);
  out << "fit: " << data.front().genes() << " genes, " << data.size() << " sample(s), "
      << post.draws << " draws, acceptance " << post.acceptance_rate << ", output "
      << cfg.out_dir.string() << '\n';
  return 0;
}

int do_simulate(RunConfig cfg, const SimOptions& s, std::ostream& out) {
  SimScenario& sc = cfg.scenario;
  if (s.replicates) sc.replicates = *s.replicates;
  if (s.big_n) sc.big_n = *s.big_n;
  if (!s.n.empty()) sc.n = s.n;
  if (!s.scale.empty()) sc.scale_kind = scale_kind_from_string(s.scale);
  if (s.rho) sc.rho = *s.rho;
  if (s.range) sc.range = *s.range;
  if (s.iterations) sc.gibbs.iterations = *s.iterations;
  if (s.burn_in) sc.gibbs.burn_in = *s.burn_in;
  const ScenarioResult res = run_scenario(sc);
  std::ostringstream csv;
  write_scenario_csv(csv, sc, res);
  write_text_file(cfg.out_dir / "simulation.csv", csv.str());
  out << "simulate: " << res.rows.size() << " replicates (" << res.failures << " failed), mean RE_Lambda "
      << res.re_lambda.mean << ", output " << (cfg.out_dir / "simulation.csv").string() << '\n';
  for (const auto& row : res.rows)
    if (!row.ok) out << "  replicate " << (row.replicate + 1) << " failed: " << row.error << '\n';
  return 0;
}

fs::path fit_dir(const RunConfig& cfg, const DownstreamOptions& d) {
  fs::path dir = d.input.empty() ? cfg.input.fit_dir : fs::path(d.input);
  require(!dir.empty(), "give --input <fit output directory>");
  require(fs::is_directory(dir), "fit directory not found: " + dir.string());
  return dir;
}

void apply_downstream(RunConfig& cfg, const DownstreamOptions& d) {
  auto& ds = cfg.downstream;
  if (d.cutoff) ds.cutoff = *d.cutoff;
  if (d.k) ds.k = *d.k;
  if (d.clusters) ds.clusters = *d.clusters;
  if (d.restarts) ds.restarts = *d.restarts;
  if (d.k_max) ds.k_max = *d.k_max;
  if (d.clusters_max) ds.clusters_max = *d.clusters_max;
  if (d.sample) ds.sample = *d.sample;
  if (d.max_lag) ds.max_lag = *d.max_lag;
  if (d.abs_weights) ds.negatives = NegativeWeights::absolute;
  require(ds.cutoff >= 0.0, "--cutoff must be nonnegative");
  require(ds.sample >= 1, "--sample is 1-based");
  require(ds.max_lag >= 0, "--max-lag must be nonnegative");
}

LabeledMatrix column_correlation(const RunConfig& cfg, const DownstreamOptions& d) {
  if (!d.matrix.empty()) return read_matrix_csv(fs::path(d.matrix));
  const fs::path path =
      fit_dir(cfg, d) / ("sample_" + std::to_string(cfg.downstream.sample)) / "col_corr_mean.csv";
  require(fs::exists(path), "no column correlation summary at " + path.string());
  return read_matrix_csv(path);
}

int do_network(RunConfig cfg, const DownstreamOptions& d, std::ostream& out) {
  apply_downstream(cfg, d);
  const LabeledMatrix prec = !d.matrix.empty() ? read_matrix_csv(fs::path(d.matrix))
                                               : read_matrix_csv(fit_dir(cfg, d) / "lambda_inv_mean.csv");
  require(prec.values.rows() == prec.values.cols(), "precision matrix must be square");
  const Matrix pc = partial_correlations(prec.values);
  const GeneNetwork net = threshold_network(pc, cfg.downstream.cutoff, prec.row_names);
  std::ostringstream tsv;
  tsv << "gene_i\tgene_j\tweight\n";
  for (const auto& e : net.edges)
    tsv << net.gene_names[e.i] << '\t' << net.gene_names[e.j] << '\t' << format_double(e.weight) << '\n';
  write_text_file(cfg.out_dir / "network.tsv", tsv.str());
  std::ostringstream csv;
  write_matrix_csv(csv, pc, net.gene_names, net.gene_names, "gene");
  write_text_file(cfg.out_dir / "partial_correlations.csv", csv.str());
  out << "network: " << net.edges.size() << " edges at cutoff " << net.cutoff << '\n';
  return 0;
}

int do_cluster(RunConfig cfg, const DownstreamOptions& d, std::ostream& out) {
  apply_downstream(cfg, d);
  const auto& opt = cfg.downstream;
  const LabeledMatrix sim = column_correlation(cfg, d);
  require(sim.values.rows() == sim.values.cols(), "similarity matrix must be square");
  const Index n = sim.values.rows();
  require(opt.k <= n && opt.clusters <= n, "k and clusters must not exceed the number of cells");
  const ClusterResult res =
      spectral_cluster(sim.values, opt.k, opt.clusters, cfg.gibbs.seed, opt.restarts, opt.negatives);
  const ElbowDiagnostics elbow = elbow_diagnostics(sim.values, std::min(opt.k_max, n), opt.k,
                                                   std::min(opt.clusters_max, n), cfg.gibbs.seed,
                                                   opt.restarts, opt.negatives);
  std::ostringstream labels, eig, wcss, emb;
  labels << "cell_id,label\n";
  for (Index i = 0; i < n; ++i) labels << sim.row_names[i] << ',' << (res.labels[i] + 1) << '\n';
  eig << "index,eigenvalue\n";
  for (Index i = 0; i < elbow.eigenvalues.size(); ++i) eig << (i + 1) << ',' << format_double(elbow.eigenvalues(i)) << '\n';
  wcss << "clusters,wcss\n";
  for (std::size_t c = 0; c < elbow.wcss.size(); ++c) wcss << (c + 1) << ',' << format_double(elbow.wcss[c]) << '\n';
  std::vector<std::string> cols;
  for (Index c = 0; c < opt.k; ++c) cols.push_back("v" + std::to_string(c + 1));
  write_matrix_csv(emb, res.embedding, sim.row_names, cols, "cell_id");
  write_text_file(cfg.out_dir / "cluster_labels.csv", labels.str());
  write_text_file(cfg.out_dir / "eigenvalues.csv", eig.str());
  write_text_file(cfg.out_dir / "elbow.csv", wcss.str());
  write_text_file(cfg.out_dir / "embedding.csv", emb.str());
  out << "cluster: " << n << " cells, k = " << opt.k << ", clusters = " << opt.clusters << ", WCSS "
      << res.wcss << '\n';
  return 0;
}

int do_corr_dist(RunConfig cfg, const DownstreamOptions& d, std::ostream& out) {
  apply_downstream(cfg, d);
  const LabeledMatrix corr = column_correlation(cfg, d);
  fs::path coords_path = d.coords;
  if (coords_path.empty()) {
    const auto s = static_cast<std::size_t>(cfg.downstream.sample - 1);
    require(s < cfg.input.samples.size(), "give --coords for the cells");
    coords_path = cfg.input.samples[s].coords;
  }
  std::istringstream expr_stub([&] {
    std::string header = "gene";
    for (const auto& c : corr.row_names) header += "," + c;
    std::string row = "stub";
    for (std::size_t i = 0; i < corr.row_names.size(); ++i) row += ",0";
    return header + "\n" + row + "\n";
  }());
  std::istringstream coords_text(read_text_file(coords_path));
  const SpatialDataset aligned = parse_dataset(expr_stub, coords_text);
  const auto pairs = correlation_vs_distance(corr.values, aligned.coords);
  std::ostringstream csv;
  csv << "cell_i,cell_j,distance,correlation\n";
  for (const auto& p : pairs)
    csv << corr.row_names[p.i] << ',' << corr.row_names[p.j] << ',' << format_double(p.distance) << ','
        << format_double(p.correlation) << '\n';
  write_text_file(cfg.out_dir / "corr_dist.csv", csv.str());
  out << "corr-dist: " << pairs.size() << " pairs\n";
  return 0;
}

int do_report(RunConfig cfg, const DownstreamOptions& d, std::ostream& out) {
  apply_downstream(cfg, d);
  const fs::path dir = fit_dir(cfg, d);
  std::istringstream trace_text(read_text_file(dir / "theta_trace.csv"));
  const auto trace = read_theta_trace(trace_text);
  long burn_in = 0;
  if (d.burn_in) {
    burn_in = *d.burn_in;
  } else if (fs::exists(dir / "manifest.json")) {
    const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    burn_in = manifest.value("burn_in", 0L);
  }
  require(burn_in >= 0, "--burn-in must be nonnegative");
  std::ostringstream tr;
  tr << "iteration,loglik,theta1,theta2,theta3\n";
  std::vector<double> kept;
  for (const auto& row : trace) {
    tr << row.iteration << ',' << format_double(row.loglik) << ',' << format_double(row.theta(0)) << ','
       << format_double(row.theta(1)) << ',' << format_double(row.theta(2)) << '\n';
    if (row.iteration > burn_in) kept.push_back(row.loglik);
  }
  const auto acf = autocorrelation(kept, cfg.downstream.max_lag);
  std::ostringstream ac;
  ac << "lag,acf\n";
  for (std::size_t k = 0; k < acf.size(); ++k) ac << k << ',' << format_double(acf[k]) << '\n';
  write_text_file(cfg.out_dir / "loglik_trace.csv", tr.str());
  write_text_file(cfg.out_dir / "loglik_acf.csv", ac.str());
  out << "report: " << trace.size() << " iterations, ACF over " << kept.size() << " post-burn-in draws\n";
  return 0;
}

void add_fit_options(CLI::App* sub, FitOptions& f, bool multi) {
  if (multi) {
    sub->add_option("--expression", f.expression, "Expression CSV per sample (genes x cells)");
    sub->add_option("--coords", f.coords, "Coordinates CSV per sample");
    sub->add_flag("--intersect-genes", f.intersect, "Keep only genes present in every sample");
  } else {
    sub->add_option("--expression", f.expression, "Expression CSV (genes x cells)")->expected(1);
    sub->add_option("--coords", f.coords, "Coordinates CSV (cell_id,x,y[,z])")->expected(1);
  }
  sub->add_option("--m", f.m, "Conditioning set size");
  sub->add_option("--iterations", f.iterations, "Gibbs iterations");
  sub->add_option("--burn-in", f.burn_in, "Burn-in iterations");
  sub->add_option("--trim-quantile", f.trim, "Drop cells with totals outside [q, 1-q]");
  sub->add_flag("--no-normalize", f.no_normalize, "Skip log normalization");
  sub->add_flag("--no-center", f.no_center, "Do not subtract gene means");
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Matrix-normal spatial covariance estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads");
  app.add_option("--out-dir", g.out_dir, "Output directory");

  FitOptions fit_opts, multi_opts;
  SimOptions sim;
  DownstreamOptions net_opts, clu_opts, cd_opts, rep_opts;

  auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario");
  simulate->add_option("--replicates", sim.replicates, "Replicates");
  simulate->add_option("--genes", sim.big_n, "Number of genes N");
  simulate->add_option("--cells", sim.n, "Cells per sample (several values run the multi-sample sampler)");
  simulate->add_option("--scale", sim.scale, "Scale matrix kind: AR, Equi, Banded");
  simulate->add_option("--rho", sim.rho, "Scale matrix correlation");
  simulate->add_option("--range", sim.range, "Matern range for the single-sample truth");
  simulate->add_option("--iterations", sim.iterations, "Gibbs iterations");
  simulate->add_option("--burn-in", sim.burn_in, "Burn-in iterations");

  auto* fit = app.add_subcommand("fit", "Fit one sample");
  add_fit_options(fit, fit_opts, false);
  auto* fit_multi = app.add_subcommand("fit-multi", "Fit several samples with a shared row covariance");
  add_fit_options(fit_multi, multi_opts, true);

  auto* network = app.add_subcommand("network", "Partial-correlation gene network");
  network->add_option("--input", net_opts.input, "Fit output directory");
  network->add_option("--precision", net_opts.matrix, "Precision matrix CSV instead of a fit directory");
  network->add_option("--cutoff", net_opts.cutoff, "Minimum |partial correlation| (default 0.1)");

  auto* cluster = app.add_subcommand("cluster", "Spectral clustering of cells");
  cluster->add_option("--input", clu_opts.input, "Fit output directory");
  cluster->add_option("--similarity", clu_opts.matrix, "Similarity CSV instead of a fit directory");
  cluster->add_option("--k", clu_opts.k, "Number of eigenvectors");
  cluster->add_option("--clusters", clu_opts.clusters, "Number of clusters");
  cluster->add_option("--restarts", clu_opts.restarts, "k-means restarts");
  cluster->add_option("--k-max", clu_opts.k_max, "Eigenvalues to report");
  cluster->add_option("--clusters-max", clu_opts.clusters_max, "Largest K for the WCSS curve");
  cluster->add_option("--sample", clu_opts.sample, "Sample (1-based) of a multi-sample fit");
  cluster->add_flag("--abs-weights", clu_opts.abs_weights, "Use |correlation| instead of clamping negatives");

  auto* corr_dist = app.add_subcommand("corr-dist", "Column correlation against distance");
  corr_dist->add_option("--input", cd_opts.input, "Fit output directory");
  corr_dist->add_option("--correlation", cd_opts.matrix, "Correlation CSV instead of a fit directory");
  corr_dist->add_option("--coords", cd_opts.coords, "Coordinates CSV");
  corr_dist->add_option("--sample", cd_opts.sample, "Sample (1-based) of a multi-sample fit");

  auto* report = app.add_subcommand("report", "Log-likelihood trace and autocorrelation");
  report->add_option("--input", rep_opts.input, "Fit output directory");
  report->add_option("--max-lag", rep_opts.max_lag, "Largest autocorrelation lag (default 50)");
  report->add_option("--burn-in", rep_opts.burn_in, "Iterations excluded from the autocorrelation");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  RunConfig cfg = load_config(g);
  if (*simulate) return do_simulate(std::move(cfg), sim, out);
  if (*fit) {
    apply_fit_options(cfg, fit_opts);
    return do_fit(std::move(cfg), false, out, err);
  }
  if (*fit_multi) {
    apply_fit_options(cfg, multi_opts);
    return do_fit(std::move(cfg), true, out, err);
  }
  if (*network) return do_network(std::move(cfg), net_opts, out);
  if (*cluster) return do_cluster(std::move(cfg), clu_opts, out);
  if (*corr_dist) return do_corr_dist(std::move(cfg), cd_opts, out);
  if (*report) return do_report(std::move(cfg), rep_opts, out);
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return 2;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace smn
