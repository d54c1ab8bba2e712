#pragma once

#include "gattf/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace gattf {

/// Histogram layout for one series.
struct BinningSpec {
    double width = 0.0; ///< h; 0 when the series is constant
    std::size_t count = 1; ///< k
    double min = 0.0;
    double max = 0.0;
    bool sturges_fallback = false; ///< IQR was 0 but the range was not

    bool operator==(const BinningSpec&) const = default;
};

/// Linear-interpolation ("type 7") quantile of already sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

/// Freedman-Diaconis width 2 IQR / n^(1/3). Throws InsufficientDataError for n < 2.
double fd_bin_width(std::span<const double> values);

/// ceil((max - min) / h), at least 1; 1 when h == 0 or the range is empty.
std::size_t fd_bin_count(std::span<const double> values, double h);

/// FD binning of the given observed values, with the Sturges fallback
/// (k = ceil(log2 n) + 1 over the range) when the IQR vanishes.
BinningSpec make_binning(std::span<const double> values);

/// Bin index per value: floor((v - min) / h) clamped to [0, k - 1].
std::vector<int> discretize(std::span<const double> values, const BinningSpec& spec);

/// As above; unobserved steps get index -1.
std::vector<int> discretize(const SensorSeries& series, const BinningSpec& spec);

struct MiEstimate {
    double raw = 0.0; ///< before clamping at zero
    double value = 0.0;
    std::size_t n = 0; ///< jointly observed steps
};

/// Plug-in mutual information in nats over steps where both indices are
/// non-negative. y is shifted by `lag` (pairs x[t] with y[t - lag]).
MiEstimate mutual_information_estimate(std::span<const int> x, std::span<const int> y, std::size_t kx,
                                       std::size_t ky, std::size_t lag = 0);

double mutual_information(std::span<const int> x, std::span<const int> y, std::size_t kx, std::size_t ky,
                          std::size_t lag = 0);

/// Entropy (nats) of the empirical distribution of non-negative indices.
double entropy(std::span<const int> x, std::size_t k);

/// Pairwise MI scores with the binning that produced them. Missing pairs
/// (too few joint observations) hold NaN.
class MiMatrix {
public:
    MiMatrix() = default;
    MiMatrix(std::vector<SensorId> ids, std::vector<double> scores, std::vector<std::size_t> pair_counts = {},
             std::vector<BinningSpec> binning = {});

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<SensorId>& ids() const noexcept { return ids_; }
    const std::vector<BinningSpec>& binning() const noexcept { return binning_; }

    std::size_t index_of(const SensorId& id) const;
    double at(std::size_t i, std::size_t j) const { return scores_.at(i * ids_.size() + j); }
    double score(const SensorId& a, const SensorId& b) const { return at(index_of(a), index_of(b)); }
    std::size_t pair_count(std::size_t i, std::size_t j) const;
    bool has(std::size_t i, std::size_t j) const;

    /// Table-style CSV: header row and column of ids, 4 decimals, "NA" for missing.
    std::string to_csv() const;
    nlohmann::json to_json() const;
    static MiMatrix from_json(const nlohmann::json& j);

private:
    std::vector<SensorId> ids_;
    std::vector<double> scores_;
    std::vector<std::size_t> counts_;
    std::vector<BinningSpec> binning_;
};

struct MiOptions {
    std::size_t lag = 0;
};

/// Every series binned on its own observed values; one estimate per
/// unordered pair, mirrored. Diagonal holds H(X).
MiMatrix mi_matrix(const SensorDataset& dataset, const MiOptions& options = {});

struct CovariateSelection {
    SensorId target;
    std::vector<SensorId> covariates;
    std::vector<double> scores;

    nlohmann::json to_json() const;
    static CovariateSelection from_json(const nlohmann::json& j);
    bool operator==(const CovariateSelection&) const = default;
};

/// For each target, the top_k non-target sensors by I(target, .), ties by id.
/// Every member of `targets` is excluded from every candidate list.
std::vector<CovariateSelection> select_informative_covariates(const MiMatrix& matrix,
                                                              std::span<const SensorId> targets, std::size_t top_k);

/// Bias floor of the plug-in estimator, (kx - 1)(ky - 1) / (2n).
double mi_bias_floor(const MiMatrix& matrix, std::size_t i, std::size_t j);

/// For each target, the bottom top_k sensors that are neither targets nor in
/// `exclude`, among those whose score exceeds the bias floor.
std::vector<CovariateSelection> select_less_informative(const MiMatrix& matrix, std::span<const SensorId> targets,
                                                        std::span<const SensorId> exclude, std::size_t top_k);

/// Sensors whose validation MASE exceeds the threshold, sorted by id.
std::vector<SensorId> low_predictability_targets(const std::map<SensorId, double>& validation_mase,
                                                 double threshold = 1.0);

} // namespace gattf
