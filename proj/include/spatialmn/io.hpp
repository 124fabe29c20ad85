#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "spatialmn/common.hpp"
#include "spatialmn/gibbs.hpp"
#include "spatialmn/spatial.hpp"

namespace smn {

/// Genes x cells expression with cell coordinates aligned to the columns.
struct SpatialDataset {
  std::vector<std::string> gene_names;
  std::vector<std::string> cell_ids;
  Matrix expression;  ///< N x n
  LocationSet coords;

  Index genes() const { return expression.rows(); }
  Index cells() const { return expression.cols(); }
  void validate() const;
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);
/// Strict parse of a whole field; throws ValidationError naming `where`.
double parse_double(std::string_view field, const std::string& where);

std::vector<std::string> split_csv_line(std::string_view line, char sep = ',');

/// Expression CSV: header row of cell ids (first field is a label for the
/// gene column), then one row per gene. Coordinates CSV: cell_id, x, y[, z]
/// with an optional header. Cells are joined by id; coordinate rows for
/// cells absent from the expression file are dropped and reported through
/// `warnings`, expression cells without coordinates are an error.
SpatialDataset parse_dataset(std::istream& expression, std::istream& coords,
                             std::vector<std::string>* warnings = nullptr);
SpatialDataset ingest(const std::filesystem::path& expression_path,
                      const std::filesystem::path& coords_path,
                      std::vector<std::string>* warnings = nullptr);

/// x -> log(1 + x M / t_j) with t_j the total of cell j and M the median total.
SpatialDataset log_normalize(SpatialDataset ds);

/// Drops cells whose total lies outside the [q, 1 - q] quantiles of the
/// totals (linear interpolation between order statistics).
SpatialDataset trim_quantile(SpatialDataset ds, double q);

/// Subtracts each gene's mean across cells.
SpatialDataset center_rows(SpatialDataset ds);

/// Keeps the genes present in every dataset, in the order of the first.
std::vector<SpatialDataset> intersect_genes(std::vector<SpatialDataset> datasets);

/// Throws unless every dataset lists the same genes in the same order.
void require_same_genes(const std::vector<SpatialDataset>& datasets);

void write_dataset(const SpatialDataset& ds, std::ostream& expression, std::ostream& coords);

struct LabeledMatrix {
  std::string corner;
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;
  Matrix values;
};

void write_matrix_csv(std::ostream& os, const Matrix& m, const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names, std::string_view corner = "");
LabeledMatrix read_matrix_csv(std::istream& is);
LabeledMatrix read_matrix_csv(const std::filesystem::path& path);

/// Factor dump: a "factor <iteration> <n>" line per draw followed by one
/// line per rank i (0-based): "i d_i k r_1 .. r_k v_1 .. v_k".
void write_factor_dump(std::ostream& os, const std::vector<FactorDraw>& draws);
std::vector<FactorDraw> read_factor_dump(std::istream& is);

struct ThetaTraceRow {
  long iteration = 0;
  Eigen::Vector3d theta;
  double loglik = 0.0;
  bool accepted = false;
};

void write_theta_trace(std::ostream& os, const PosteriorSamples& samples);
std::vector<ThetaTraceRow> read_theta_trace(std::istream& is);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

struct SerializeContext {
  std::uint64_t seed = 0;
  std::string config_json;  ///< canonical resolved configuration
  std::vector<std::string> gene_names;
  std::vector<std::vector<std::string>> cell_ids;  ///< per sample, original order
  long burn_in = 0;
  long iterations = 0;
};

/// Writes theta_trace.csv, lambda_mean.csv, lambda_inv_mean.csv,
/// lambda_corr_mean.csv, manifest.json and, per sample r (1-based),
/// sample_r/{col_corr_mean.csv, order.csv, factors.txt}.
void serialize_posterior(const std::filesystem::path& dir, const PosteriorSamples& samples,
                         const SerializeContext& ctx);

/// Sample autocorrelation at lags 0..max_lag (fewer if the series is short).
std::vector<double> autocorrelation(const std::vector<double>& x, int max_lag);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace smn
