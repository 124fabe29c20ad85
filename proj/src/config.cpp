#include "spatialmn/config.hpp"

#include <set>

#include "json.hpp"
#include "spatialmn/io.hpp"

namespace smn {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(std::string("config section '") + section + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!ok.count(key)) {
      throw ValidationError(std::string("config section '") + section + "': unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const char* section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config ") + section + "." + key + " has the wrong type");
  }
}

Matrix read_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ValidationError(what + " must be a non-empty array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Index>(j[i].size()) != cols) {
      throw ValidationError(what + " rows must all have the same length");
    }
    for (Index k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw ValidationError(what + " entries must be numbers");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

json write_matrix(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path;
}

std::filesystem::path existing(const std::filesystem::path& p, const char* what) {
  if (!std::filesystem::exists(p)) throw ValidationError(std::string(what) + " not found: " + p.string());
  return p;
}

void parse_gibbs(const json& g, GibbsConfig& cfg) {
  check_keys(g, "gibbs",
             {"m", "iterations", "burn_in", "seed", "iw_df", "iw_scale", "theta_init", "proposal_shape",
              "target_acceptance", "threads", "factor_stride", "summarize_columns",
              "column_summary_stride", "keep_lambda_draws"});
  read(g, "m", cfg.m, "gibbs");
  read(g, "iterations", cfg.iterations, "gibbs");
  read(g, "burn_in", cfg.burn_in, "gibbs");
  read(g, "seed", cfg.seed, "gibbs");
  if (g.contains("iw_df") && !g["iw_df"].is_null()) {
    double v = 0.0;
    read(g, "iw_df", v, "gibbs");
    cfg.iw_df = v;
  }
  if (g.contains("iw_scale") && !g["iw_scale"].is_null()) cfg.iw_scale = read_matrix(g["iw_scale"], "gibbs.iw_scale");
  if (g.contains("theta_init")) {
    const Matrix t = read_matrix(json::array({g["theta_init"]}), "gibbs.theta_init");
    require(t.cols() == 3, "gibbs.theta_init must have three entries");
    cfg.theta_init = t.row(0).transpose();
  }
  if (g.contains("proposal_shape")) {
    const Matrix s = read_matrix(g["proposal_shape"], "gibbs.proposal_shape");
    require(s.rows() == 3 && s.cols() == 3, "gibbs.proposal_shape must be 3 x 3");
    cfg.proposal_shape_init = s;
  }
  read(g, "target_acceptance", cfg.target_acceptance, "gibbs");
  read(g, "threads", cfg.threads, "gibbs");
  read(g, "factor_stride", cfg.factor_stride, "gibbs");
  read(g, "summarize_columns", cfg.summarize_columns, "gibbs");
  read(g, "column_summary_stride", cfg.column_summary_stride, "gibbs");
  read(g, "keep_lambda_draws", cfg.keep_lambda_draws, "gibbs");
}

json gibbs_json(const GibbsConfig& g) {
  json j;
  j["m"] = g.m;
  j["iterations"] = g.iterations;
  j["burn_in"] = g.burn_in;
  j["seed"] = g.seed;
  j["iw_df"] = g.iw_df ? json(*g.iw_df) : json(nullptr);
  j["iw_scale"] = g.iw_scale ? write_matrix(*g.iw_scale) : json(nullptr);
  j["theta_init"] = {g.theta_init(0), g.theta_init(1), g.theta_init(2)};
  j["proposal_shape"] = write_matrix(g.proposal_shape_init);
  j["target_acceptance"] = g.target_acceptance;
  j["threads"] = g.threads;
  j["factor_stride"] = g.factor_stride;
  j["summarize_columns"] = g.summarize_columns;
  j["column_summary_stride"] = g.column_summary_stride;
  j["keep_lambda_draws"] = g.keep_lambda_draws;
  return j;
}

KernelSpec parse_kernel(const json& k) {
  check_keys(k, "scenario.kernels[]", {"family", "variance", "range", "smoothness"});
  KernelSpec spec;
  std::string family = "matern";
  read(k, "family", family, "scenario.kernels[]");
  spec.family = kernel_family_from_string(family);
  read(k, "variance", spec.variance, "scenario.kernels[]");
  read(k, "range", spec.range, "scenario.kernels[]");
  read(k, "smoothness", spec.smoothness, "scenario.kernels[]");
  spec.validate();
  return spec;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "root", {"input", "gibbs", "scenario", "downstream", "output"});
  RunConfig cfg;

  if (root.contains("input")) {
    const json& in = root["input"];
    check_keys(in, "input",
               {"expression", "coords", "samples", "normalize", "trim_quantile", "intersect_genes",
                "center_rows", "fit_dir"});
    if (in.contains("expression") || in.contains("coords")) {
      std::string e, c;
      read(in, "expression", e, "input");
      read(in, "coords", c, "input");
      require(!e.empty() && !c.empty(), "input needs both expression and coords");
      cfg.input.samples.push_back({existing(resolve(base_dir, e), "expression file"),
                                   existing(resolve(base_dir, c), "coordinates file")});
    }
    if (in.contains("samples")) {
      require(in["samples"].is_array(), "input.samples must be an array");
      for (const auto& s : in["samples"]) {
        check_keys(s, "input.samples[]", {"expression", "coords"});
        std::string e, c;
        read(s, "expression", e, "input.samples[]");
        read(s, "coords", c, "input.samples[]");
        cfg.input.samples.push_back({existing(resolve(base_dir, e), "expression file"),
                                     existing(resolve(base_dir, c), "coordinates file")});
      }
    }
    read(in, "normalize", cfg.input.normalize, "input");
    read(in, "trim_quantile", cfg.input.trim_quantile, "input");
    read(in, "intersect_genes", cfg.input.intersect_genes, "input");
    read(in, "center_rows", cfg.input.center_rows, "input");
    if (in.contains("fit_dir") && !(in["fit_dir"].is_string() && in["fit_dir"].get<std::string>().empty())) {
      std::string d;
      read(in, "fit_dir", d, "input");
      cfg.input.fit_dir = existing(resolve(base_dir, d), "fit directory");
    }
    require(cfg.input.trim_quantile >= 0.0 && cfg.input.trim_quantile < 0.5,
            "input.trim_quantile must lie in [0, 0.5)");
  }

  if (root.contains("gibbs")) parse_gibbs(root["gibbs"], cfg.gibbs);

  cfg.scenario.gibbs = cfg.gibbs;
  if (root.contains("scenario")) {
    const json& sc = root["scenario"];
    check_keys(sc, "scenario",
               {"N", "n", "kernels", "range", "scale", "rho", "truth_iw_df", "replicates", "seed",
                "threads", "gibbs"});
    read(sc, "N", cfg.scenario.big_n, "scenario");
    if (sc.contains("n")) {
      if (sc["n"].is_array()) {
        cfg.scenario.n.clear();
        for (const auto& v : sc["n"]) {
          require(v.is_number_integer(), "scenario.n entries must be integers");
          cfg.scenario.n.push_back(v.get<Index>());
        }
      } else {
        Index v = 0;
        read(sc, "n", v, "scenario");
        cfg.scenario.n = {v};
      }
    }
    if (sc.contains("kernels")) {
      require(sc["kernels"].is_array(), "scenario.kernels must be an array");
      for (const auto& k : sc["kernels"]) cfg.scenario.kernels.push_back(parse_kernel(k));
    }
    read(sc, "range", cfg.scenario.range, "scenario");
    if (sc.contains("scale")) {
      std::string kind;
      read(sc, "scale", kind, "scenario");
      cfg.scenario.scale_kind = scale_kind_from_string(kind);
    }
    read(sc, "rho", cfg.scenario.rho, "scenario");
    if (sc.contains("truth_iw_df") && !sc["truth_iw_df"].is_null()) {
      double v = 0.0;
      read(sc, "truth_iw_df", v, "scenario");
      cfg.scenario.truth_iw_df = v;
    }
    read(sc, "replicates", cfg.scenario.replicates, "scenario");
    read(sc, "seed", cfg.scenario.seed, "scenario");
    read(sc, "threads", cfg.scenario.threads, "scenario");
    if (sc.contains("gibbs")) parse_gibbs(sc["gibbs"], cfg.scenario.gibbs);
  }

  if (root.contains("downstream")) {
    const json& d = root["downstream"];
    check_keys(d, "downstream",
               {"cutoff", "k", "clusters", "restarts", "k_max", "clusters_max", "negative_weights",
                "max_lag", "sample"});
    read(d, "cutoff", cfg.downstream.cutoff, "downstream");
    read(d, "k", cfg.downstream.k, "downstream");
    read(d, "clusters", cfg.downstream.clusters, "downstream");
    read(d, "restarts", cfg.downstream.restarts, "downstream");
    read(d, "k_max", cfg.downstream.k_max, "downstream");
    read(d, "clusters_max", cfg.downstream.clusters_max, "downstream");
    read(d, "max_lag", cfg.downstream.max_lag, "downstream");
    read(d, "sample", cfg.downstream.sample, "downstream");
    if (d.contains("negative_weights")) {
      std::string w;
      read(d, "negative_weights", w, "downstream");
      if (w == "clamp") cfg.downstream.negatives = NegativeWeights::clamp;
      else if (w == "absolute") cfg.downstream.negatives = NegativeWeights::absolute;
      else throw ValidationError("downstream.negative_weights must be 'clamp' or 'absolute'");
    }
    require(cfg.downstream.cutoff >= 0.0, "downstream.cutoff must be nonnegative");
    require(cfg.downstream.k >= 1 && cfg.downstream.clusters >= 1 && cfg.downstream.restarts >= 1,
            "downstream k, clusters and restarts must be positive");
    require(cfg.downstream.max_lag >= 0, "downstream.max_lag must be nonnegative");
    require(cfg.downstream.sample >= 1, "downstream.sample is 1-based");
  }

  if (root.contains("output")) {
    const json& o = root["output"];
    check_keys(o, "output", {"dir"});
    std::string dir;
    read(o, "dir", dir, "output");
    if (!dir.empty()) cfg.out_dir = resolve(base_dir, dir);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  return from_json_text(read_text_file(path), path.parent_path());
}

std::string RunConfig::to_json_text() const {
  json root;
  json in;
  in["samples"] = json::array();
  for (const auto& s : input.samples)
    in["samples"].push_back({{"expression", s.expression.string()}, {"coords", s.coords.string()}});
  in["normalize"] = input.normalize;
  in["trim_quantile"] = input.trim_quantile;
  in["intersect_genes"] = input.intersect_genes;
  in["center_rows"] = input.center_rows;
  in["fit_dir"] = input.fit_dir.string();
  root["input"] = in;
  root["gibbs"] = gibbs_json(gibbs);
  json sc;
  sc["N"] = scenario.big_n;
  sc["n"] = scenario.n;
  sc["kernels"] = json::array();
  for (const auto& k : scenario.kernels)
    sc["kernels"].push_back({{"family", std::string(to_string(k.family))},
                             {"variance", k.variance},
                             {"range", k.range},
                             {"smoothness", k.smoothness}});
  sc["range"] = scenario.range;
  sc["scale"] = std::string(to_string(scenario.scale_kind));
  sc["rho"] = scenario.rho;
  sc["truth_iw_df"] = scenario.truth_iw_df ? json(*scenario.truth_iw_df) : json(nullptr);
  sc["replicates"] = scenario.replicates;
  sc["seed"] = scenario.seed;
  sc["threads"] = scenario.threads;
  sc["gibbs"] = gibbs_json(scenario.gibbs);
  root["scenario"] = sc;
  json d;
  d["cutoff"] = downstream.cutoff;
  d["k"] = downstream.k;
  d["clusters"] = downstream.clusters;
  d["restarts"] = downstream.restarts;
  d["k_max"] = downstream.k_max;
  d["clusters_max"] = downstream.clusters_max;
  d["negative_weights"] = downstream.negatives == NegativeWeights::clamp ? "clamp" : "absolute";
  d["max_lag"] = downstream.max_lag;
  d["sample"] = downstream.sample;
  root["downstream"] = d;
  root["output"] = {{"dir", out_dir.string()}};
  return root.dump();
}

void RunConfig::set_seed(std::uint64_t seed) {
  gibbs.seed = seed;
  scenario.seed = seed;
  scenario.gibbs.seed = seed;
}

void RunConfig::set_threads(int threads) {
  require(threads >= 1, "--threads must be positive");
  gibbs.threads = threads;
  scenario.threads = threads;
}

}  // namespace smn
