#include "spatialmn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace smn {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool next_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) return true;
  }
  return false;
}

bool looks_numeric(std::string_view s) {
  const std::string t = trim(s);
  double v = 0.0;
  const char* first = t.data();
  if (!t.empty() && t[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  return ec == std::errc() && ptr == t.data() + t.size() && !t.empty();
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericalError("could not format a double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view field, const std::string& where) {
  const std::string t = trim(field);
  if (t.empty()) throw ValidationError(where + ": empty numeric field");
  const char* first = t.data();
  if (t[0] == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ValidationError(where + ": '" + t + "' is not a number");
  }
  if (!std::isfinite(v)) throw ValidationError(where + ": '" + t + "' is not finite");
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

void SpatialDataset::validate() const {
  require(static_cast<Index>(gene_names.size()) == expression.rows(), "one gene name per row");
  require(static_cast<Index>(cell_ids.size()) == expression.cols(), "one cell id per column");
  require(coords.size() == expression.cols(), "one coordinate row per cell");
  require(expression.allFinite(), "expression contains non-finite values");
}

SpatialDataset parse_dataset(std::istream& expression, std::istream& coords,
                             std::vector<std::string>* warnings) {
  std::string line;
  if (!next_line(expression, line)) throw ValidationError("expression file is empty");
  auto header = split_csv_line(line);
  require(header.size() >= 2, "expression header needs at least one cell id");
  std::vector<std::string> cell_ids(header.begin() + 1, header.end());
  std::unordered_map<std::string, Index> cell_index;
  for (std::size_t j = 0; j < cell_ids.size(); ++j) {
    if (!cell_index.emplace(cell_ids[j], static_cast<Index>(j)).second) {
      throw ValidationError("expression header: duplicate cell id '" + cell_ids[j] + "'");
    }
  }
  std::vector<std::string> genes;
  std::vector<std::vector<double>> rows;
  std::set<std::string> seen_genes;
  long line_no = 1;
  while (next_line(expression, line)) {
    ++line_no;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError("expression line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
    }
    if (!seen_genes.insert(fields[0]).second) {
      throw ValidationError("expression line " + std::to_string(line_no) + ": duplicate gene '" +
                            fields[0] + "'");
    }
    genes.push_back(fields[0]);
    std::vector<double> values(cell_ids.size());
    for (std::size_t j = 0; j < cell_ids.size(); ++j) {
      values[j] = parse_double(fields[j + 1], "expression line " + std::to_string(line_no) +
                                                  ", column " + std::to_string(j + 2));
    }
    rows.push_back(std::move(values));
  }
  require(!genes.empty(), "expression file has no gene rows");

  std::vector<std::optional<std::vector<double>>> xyz(cell_ids.size());
  std::size_t dim = 0;
  line_no = 0;
  bool first = true;
  std::set<std::string> coord_seen;
  while (next_line(coords, line)) {
    ++line_no;
    const auto fields = split_csv_line(line);
    if (first) {
      first = false;
      if (fields.size() >= 2 && !looks_numeric(fields[1])) continue;  // header
    }
    if (fields.size() != 3 && fields.size() != 4) {
      throw ValidationError("coordinates line " + std::to_string(line_no) +
                            ": expected cell_id,x,y[,z]");
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw ValidationError("coordinates line " + std::to_string(line_no) +
                            ": inconsistent number of coordinates");
    }
    if (!coord_seen.insert(fields[0]).second) {
      throw ValidationError("coordinates line " + std::to_string(line_no) + ": duplicate cell id '" +
                            fields[0] + "'");
    }
    const auto it = cell_index.find(fields[0]);
    if (it == cell_index.end()) {
      if (warnings) warnings->push_back("coordinates for unknown cell '" + fields[0] + "' dropped");
      continue;
    }
    std::vector<double> p(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      p[k] = parse_double(fields[k + 1], "coordinates line " + std::to_string(line_no) + ", column " +
                                             std::to_string(k + 2));
    }
    xyz[it->second] = std::move(p);
  }
  std::string missing;
  for (std::size_t j = 0; j < cell_ids.size(); ++j) {
    if (!xyz[j]) missing += (missing.empty() ? "" : ", ") + cell_ids[j];
  }
  if (!missing.empty()) throw ValidationError("cells without coordinates: " + missing);

  SpatialDataset ds;
  ds.gene_names = std::move(genes);
  ds.cell_ids = std::move(cell_ids);
  ds.expression.resize(static_cast<Index>(rows.size()), static_cast<Index>(ds.cell_ids.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) ds.expression(i, j) = rows[i][j];
  Matrix c(static_cast<Index>(ds.cell_ids.size()), static_cast<Index>(dim));
  for (std::size_t j = 0; j < xyz.size(); ++j)
    for (std::size_t k = 0; k < dim; ++k) c(j, k) = (*xyz[j])[k];
  ds.coords = LocationSet(std::move(c));
  return ds;
}

SpatialDataset ingest(const std::filesystem::path& expression_path,
                      const std::filesystem::path& coords_path, std::vector<std::string>* warnings) {
  std::ifstream e(expression_path);
  if (!e) throw ValidationError("cannot open expression file " + expression_path.string());
  std::ifstream c(coords_path);
  if (!c) throw ValidationError("cannot open coordinates file " + coords_path.string());
  return parse_dataset(e, c, warnings);
}

SpatialDataset log_normalize(SpatialDataset ds) {
  const Index n = ds.cells();
  require(n >= 1, "log_normalize: no cells");
  if ((ds.expression.array() < 0.0).any()) throw ValidationError("log_normalize: negative counts");
  const Vector totals = ds.expression.colwise().sum().transpose();
  for (Index j = 0; j < n; ++j) {
    if (!(totals(j) > 0.0)) {
      throw ValidationError("log_normalize: cell '" + ds.cell_ids[j] + "' has zero total count");
    }
  }
  std::vector<double> sorted(totals.data(), totals.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (Index j = 0; j < n; ++j) {
    const double scale = median / totals(j);
    for (Index i = 0; i < ds.genes(); ++i) ds.expression(i, j) = std::log1p(ds.expression(i, j) * scale);
  }
  return ds;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

SpatialDataset select_cells(const SpatialDataset& ds, const std::vector<Index>& keep) {
  SpatialDataset out;
  out.gene_names = ds.gene_names;
  out.expression.resize(ds.genes(), static_cast<Index>(keep.size()));
  Matrix c(static_cast<Index>(keep.size()), ds.coords.dim());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.cell_ids.push_back(ds.cell_ids[keep[k]]);
    out.expression.col(k) = ds.expression.col(keep[k]);
    c.row(k) = ds.coords.coords().row(keep[k]);
  }
  out.coords = LocationSet(std::move(c));
  return out;
}

SpatialDataset select_genes(const SpatialDataset& ds, const std::vector<std::string>& genes) {
  std::unordered_map<std::string, Index> pos;
  for (std::size_t i = 0; i < ds.gene_names.size(); ++i) pos[ds.gene_names[i]] = static_cast<Index>(i);
  SpatialDataset out = ds;
  out.gene_names = genes;
  out.expression.resize(static_cast<Index>(genes.size()), ds.cells());
  for (std::size_t i = 0; i < genes.size(); ++i) out.expression.row(i) = ds.expression.row(pos.at(genes[i]));
  return out;
}

}  // namespace

SpatialDataset trim_quantile(SpatialDataset ds, double q) {
  require(q >= 0.0 && q < 0.5, "trim quantile must lie in [0, 0.5)");
  if (q == 0.0) return ds;
  const Vector totals = ds.expression.colwise().sum().transpose();
  std::vector<double> sorted(totals.data(), totals.data() + totals.size());
  std::sort(sorted.begin(), sorted.end());
  const double lo = quantile_sorted(sorted, q);
  const double hi = quantile_sorted(sorted, 1.0 - q);
  std::vector<Index> keep;
  for (Index j = 0; j < totals.size(); ++j)
    if (totals(j) >= lo && totals(j) <= hi) keep.push_back(j);
  require(keep.size() >= 2, "trimming left fewer than two cells");
  return select_cells(ds, keep);
}

SpatialDataset center_rows(SpatialDataset ds) {
  const Vector means = ds.expression.rowwise().mean();
  ds.expression.colwise() -= means;
  return ds;
}

std::vector<SpatialDataset> intersect_genes(std::vector<SpatialDataset> datasets) {
  require(!datasets.empty(), "no datasets to intersect");
  std::vector<std::string> common;
  for (const auto& g : datasets.front().gene_names) {
    bool everywhere = true;
    for (std::size_t r = 1; r < datasets.size() && everywhere; ++r) {
      const auto& names = datasets[r].gene_names;
      everywhere = std::find(names.begin(), names.end(), g) != names.end();
    }
    if (everywhere) common.push_back(g);
  }
  require(!common.empty(), "the samples share no genes");
  for (auto& ds : datasets) ds = select_genes(ds, common);
  return datasets;
}

void require_same_genes(const std::vector<SpatialDataset>& datasets) {
  for (std::size_t r = 1; r < datasets.size(); ++r) {
    if (datasets[r].gene_names != datasets.front().gene_names) {
      throw ValidationError("sample " + std::to_string(r + 1) +
                            " has a different gene list from sample 1 (use --intersect-genes)");
    }
  }
}

void write_dataset(const SpatialDataset& ds, std::ostream& expression, std::ostream& coords) {
  write_matrix_csv(expression, ds.expression, ds.gene_names, ds.cell_ids, "gene");
  coords << "cell_id,x,y" << (ds.coords.dim() == 3 ? ",z" : "") << '\n';
  for (Index j = 0; j < ds.cells(); ++j) {
    coords << quote_if_needed(ds.cell_ids[j]);
    for (Index k = 0; k < ds.coords.dim(); ++k) coords << ',' << format_double(ds.coords.coords()(j, k));
    coords << '\n';
  }
}

void write_matrix_csv(std::ostream& os, const Matrix& m, const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names, std::string_view corner) {
  require(static_cast<Index>(row_names.size()) == m.rows(), "one row name per row");
  require(static_cast<Index>(col_names.size()) == m.cols(), "one column name per column");
  os << quote_if_needed(std::string(corner));
  for (const auto& c : col_names) os << ',' << quote_if_needed(c);
  os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    os << quote_if_needed(row_names[i]);
    for (Index j = 0; j < m.cols(); ++j) os << ',' << format_double(m(i, j));
    os << '\n';
  }
}

LabeledMatrix read_matrix_csv(std::istream& is) {
  std::string line;
  if (!next_line(is, line)) throw ValidationError("matrix file is empty");
  auto header = split_csv_line(line);
  LabeledMatrix out;
  out.corner = header[0];
  out.col_names.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (next_line(is, line)) {
    ++line_no;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError("matrix line " + std::to_string(line_no) + ": wrong number of fields");
    }
    out.row_names.push_back(fields[0]);
    std::vector<double> v(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j)
      v[j - 1] = parse_double(fields[j], "matrix line " + std::to_string(line_no));
    rows.push_back(std::move(v));
  }
  out.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(out.col_names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) out.values(i, j) = rows[i][j];
  return out;
}

LabeledMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open " + path.string());
  return read_matrix_csv(is);
}

void write_factor_dump(std::ostream& os, const std::vector<FactorDraw>& draws) {
  for (const auto& draw : draws) {
    const auto& chol = draw.chol;
    os << "factor " << draw.iteration << ' ' << chol.size() << '\n';
    for (Index i = 0; i < chol.size(); ++i) {
      os << i << ' ' << format_double(chol.diag(i)) << ' ' << chol.rows[i].size();
      for (Index r : chol.rows[i]) os << ' ' << r;
      for (Index k = 0; k < chol.values[i].size(); ++k) os << ' ' << format_double(chol.values[i](k));
      os << '\n';
    }
  }
}

std::vector<FactorDraw> read_factor_dump(std::istream& is) {
  std::vector<FactorDraw> out;
  std::string line;
  long line_no = 0;
  const auto fail = [&](const std::string& what) {
    throw ValidationError("factor dump line " + std::to_string(line_no) + ": " + what);
  };
  while (next_line(is, line)) {
    ++line_no;
    std::istringstream head(line);
    std::string tag;
    long iteration = 0;
    Index n = 0;
    if (!(head >> tag >> iteration >> n) || tag != "factor" || n < 0) fail("expected 'factor <iteration> <n>'");
    FactorDraw draw;
    draw.iteration = iteration;
    draw.chol.rows.resize(n);
    draw.chol.values.resize(n);
    draw.chol.diag.resize(n);
    for (Index i = 0; i < n; ++i) {
      if (!next_line(is, line)) fail("truncated factor");
      ++line_no;
      std::istringstream ls(line);
      std::string tok;
      std::vector<std::string> toks;
      while (ls >> tok) toks.push_back(tok);
      if (toks.size() < 3) fail("too few fields");
      if (std::stol(toks[0]) != i) fail("rank out of sequence");
      draw.chol.diag(i) = parse_double(toks[1], "factor dump line " + std::to_string(line_no));
      const std::size_t k = std::stoul(toks[2]);
      if (toks.size() != 3 + 2 * k) fail("expected " + std::to_string(3 + 2 * k) + " fields");
      draw.chol.rows[i].resize(k);
      draw.chol.values[i].resize(static_cast<Index>(k));
      for (std::size_t j = 0; j < k; ++j) {
        draw.chol.rows[i][j] = std::stol(toks[3 + j]);
        draw.chol.values[i](j) = parse_double(toks[3 + k + j], "factor dump line " + std::to_string(line_no));
      }
    }
    draw.chol.validate();
    out.push_back(std::move(draw));
  }
  return out;
}

void write_theta_trace(std::ostream& os, const PosteriorSamples& samples) {
  os << "iteration,theta1,theta2,theta3,loglik,accepted\n";
  for (std::size_t t = 0; t < samples.theta_trace.size(); ++t) {
    const auto& th = samples.theta_trace[t];
    os << (t + 1) << ',' << format_double(th(0)) << ',' << format_double(th(1)) << ','
       << format_double(th(2)) << ',' << format_double(samples.loglik_trace[t]) << ','
       << static_cast<int>(samples.accepted[t]) << '\n';
  }
}

std::vector<ThetaTraceRow> read_theta_trace(std::istream& is) {
  std::string line;
  if (!next_line(is, line)) throw ValidationError("theta trace is empty");
  std::vector<ThetaTraceRow> out;
  long line_no = 1;
  while (next_line(is, line)) {
    ++line_no;
    const auto f = split_csv_line(line);
    const std::string where = "theta trace line " + std::to_string(line_no);
    if (f.size() != 6) throw ValidationError(where + ": expected 6 fields");
    ThetaTraceRow row;
    row.iteration = static_cast<long>(parse_double(f[0], where));
    for (int k = 0; k < 3; ++k) row.theta(k) = parse_double(f[1 + k], where);
    row.loglik = parse_double(f[4], where);
    row.accepted = parse_double(f[5], where) != 0.0;
    out.push_back(row);
  }
  return out;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

void serialize_posterior(const std::filesystem::path& dir, const PosteriorSamples& samples,
                         const SerializeContext& ctx) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> genes = ctx.gene_names;
  const Index big_n = samples.lambda_mean.rows();
  if (genes.empty())
    for (Index i = 0; i < big_n; ++i) genes.push_back("g" + std::to_string(i + 1));

  std::ostringstream trace;
  write_theta_trace(trace, samples);
  write_text_file(dir / "theta_trace.csv", trace.str());
  const auto dump = [&](const char* name, const Matrix& m) {
    std::ostringstream os;
    write_matrix_csv(os, m, genes, genes, "gene");
    write_text_file(dir / name, os.str());
  };
  dump("lambda_mean.csv", samples.lambda_mean);
  dump("lambda_inv_mean.csv", samples.lambda_inv_mean);
  dump("lambda_corr_mean.csv", samples.lambda_corr_mean);

  nlohmann::json manifest;
  manifest["seed"] = ctx.seed;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(ctx.config_json)));
  manifest["config_hash"] = hash;
  manifest["genes"] = big_n;
  manifest["iterations"] = ctx.iterations;
  manifest["burn_in"] = ctx.burn_in;
  manifest["draws"] = samples.draws;
  manifest["acceptance_rate"] = samples.acceptance_rate;
  manifest["nonfinite_rejections"] = samples.nonfinite_rejections;
  manifest["samples"] = nlohmann::json::array();

  for (std::size_t r = 0; r < samples.samples.size(); ++r) {
    const auto& s = samples.samples[r];
    const fs::path sdir = dir / ("sample_" + std::to_string(r + 1));
    const Index n = static_cast<Index>(s.order.size());
    std::vector<std::string> cells;
    if (r < ctx.cell_ids.size()) cells = ctx.cell_ids[r];
    if (cells.empty())
      for (Index j = 0; j < n; ++j) cells.push_back("c" + std::to_string(j + 1));
    require(static_cast<Index>(cells.size()) == n, "cell id list does not match sample size");

    std::ostringstream order;
    order << "rank,cell_index,cell_id,neighbors\n";
    for (Index k = 0; k < n; ++k) {
      order << k << ',' << s.order[k] << ',' << quote_if_needed(cells[s.order[k]]) << ',';
      for (std::size_t j = 0; j < s.neighbors[k].size(); ++j) order << (j ? " " : "") << s.neighbors[k][j];
      order << '\n';
    }
    write_text_file(sdir / "order.csv", order.str());
    std::ostringstream factors;
    write_factor_dump(factors, s.factor_draws);
    write_text_file(sdir / "factors.txt", factors.str());
    if (s.col_corr_mean.size() > 0) {
      std::ostringstream cc;
      write_matrix_csv(cc, s.col_corr_mean, cells, cells, "cell");
      write_text_file(sdir / "col_corr_mean.csv", cc.str());
    }
    manifest["samples"].push_back({{"cells", n},
                                   {"factor_draws", s.factor_draws.size()},
                                   {"column_summary_draws", s.col_corr_draws}});
  }
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<double> autocorrelation(const std::vector<double>& x, int max_lag) {
  require(max_lag >= 0, "max lag must be nonnegative");
  const std::size_t n = x.size();
  std::vector<double> out;
  if (n == 0) return out;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (double v : x) denom += (v - mean) * (v - mean);
  const std::size_t lags = std::min<std::size_t>(static_cast<std::size_t>(max_lag), n - 1);
  for (std::size_t k = 0; k <= lags; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += (x[t] - mean) * (x[t + k] - mean);
    out.push_back(denom > 0.0 ? num / denom : (k == 0 ? 1.0 : 0.0));
  }
  return out;
}

}  // namespace smn
