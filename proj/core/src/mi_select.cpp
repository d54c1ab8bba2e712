#include "gattf/mi_select.hpp"

#include "gattf/errors.hpp"
#include "gattf/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace gattf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format4(double v)
{
    if (std::isnan(v)) {
        return "NA";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// Sum of p log(p / (px py)) over a dense joint table. Terms are sorted first
// so that transposing the table cannot change the result.
double plug_in(const std::vector<std::size_t>& joint, std::size_t kx, std::size_t ky, std::size_t n)
{
    std::vector<std::size_t> rx(kx, 0), cy(ky, 0);
    for (std::size_t a = 0; a < kx; ++a) {
        for (std::size_t b = 0; b < ky; ++b) {
            rx[a] += joint[a * ky + b];
            cy[b] += joint[a * ky + b];
        }
    }
    const double nn = static_cast<double>(n);
    std::vector<double> terms;
    terms.reserve(kx * ky);
    for (std::size_t a = 0; a < kx; ++a) {
        for (std::size_t b = 0; b < ky; ++b) {
            const std::size_t c = joint[a * ky + b];
            if (c == 0) {
                continue;
            }
            const double pxy = static_cast<double>(c) / nn;
            terms.push_back(pxy * std::log(static_cast<double>(c) * nn /
                                           (static_cast<double>(rx[a]) * static_cast<double>(cy[b]))));
        }
    }
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) {
        sum += t;
    }
    return sum;
}

} // namespace

double quantile_sorted(std::span<const double> sorted, double q)
{
    if (sorted.empty()) {
        throw InsufficientDataError("quantile of empty data");
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double fd_bin_width(std::span<const double> values)
{
    if (values.size() < 2) {
        throw InsufficientDataError("Freedman-Diaconis width needs at least 2 values, got " +
                                    std::to_string(values.size()));
    }
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
    return 2.0 * iqr / std::cbrt(static_cast<double>(s.size()));
}

std::size_t fd_bin_count(std::span<const double> values, double h)
{
    if (values.empty()) {
        throw InsufficientDataError("bin count of empty data");
    }
    if (!(h >= 0.0)) {
        throw ValidationError("bin width must be non-negative");
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (h == 0.0 || range == 0.0) {
        return 1;
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(range / h)));
}

BinningSpec make_binning(std::span<const double> values)
{
    BinningSpec spec;
    const double h = fd_bin_width(values);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    spec.min = *lo;
    spec.max = *hi;
    const double range = spec.max - spec.min;
    if (range == 0.0) {
        return spec;
    }
    if (h > 0.0) {
        spec.width = h;
        spec.count = fd_bin_count(values, h);
        return spec;
    }
    spec.sturges_fallback = true;
    spec.count = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(values.size())))) + 1;
    spec.width = range / static_cast<double>(spec.count);
    return spec;
}

std::vector<int> discretize(std::span<const double> values, const BinningSpec& spec)
{
    std::vector<int> out(values.size(), 0);
    if (spec.count <= 1 || spec.width <= 0.0) {
        return out;
    }
    const auto top = static_cast<double>(spec.count - 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double b = std::floor((values[i] - spec.min) / spec.width);
        out[i] = static_cast<int>(std::clamp(b, 0.0, top));
    }
    return out;
}

std::vector<int> discretize(const SensorSeries& series, const BinningSpec& spec)
{
    auto out = discretize(series.values(), spec);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!series.is_observed(i)) {
            out[i] = -1;
        }
    }
    return out;
}

MiEstimate mutual_information_estimate(std::span<const int> x, std::span<const int> y, std::size_t kx,
                                       std::size_t ky, std::size_t lag)
{
    if (x.size() != y.size()) {
        throw ShapeError("mutual information: lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()) + " differ");
    }
    if (kx == 0 || ky == 0) {
        throw ValidationError("mutual information: bin counts must be positive");
    }
    std::vector<std::size_t> joint(kx * ky, 0);
    std::size_t n = 0;
    for (std::size_t t = lag; t < x.size(); ++t) {
        const int a = x[t];
        const int b = y[t - lag];
        if (a < 0 || b < 0) {
            continue;
        }
        if (static_cast<std::size_t>(a) >= kx || static_cast<std::size_t>(b) >= ky) {
            throw RangeError("mutual information: bin index out of range");
        }
        ++joint[static_cast<std::size_t>(a) * ky + static_cast<std::size_t>(b)];
        ++n;
    }
    if (n < 2) {
        throw InsufficientDataError("mutual information needs at least 2 joint observations, got " +
                                    std::to_string(n));
    }
    MiEstimate est;
    est.n = n;
    est.raw = plug_in(joint, kx, ky, n);
    est.value = std::max(0.0, est.raw);
    return est;
}

double mutual_information(std::span<const int> x, std::span<const int> y, std::size_t kx, std::size_t ky,
                          std::size_t lag)
{
    return mutual_information_estimate(x, y, kx, ky, lag).value;
}

double entropy(std::span<const int> x, std::size_t k)
{
    return mutual_information(x, x, k, k);
}

MiMatrix::MiMatrix(std::vector<SensorId> ids, std::vector<double> scores, std::vector<std::size_t> pair_counts,
                   std::vector<BinningSpec> binning)
    : ids_(std::move(ids)), scores_(std::move(scores)), counts_(std::move(pair_counts)), binning_(std::move(binning))
{
    const std::size_t n = ids_.size();
    if (scores_.size() != n * n) {
        throw ShapeError("MI matrix: " + std::to_string(scores_.size()) + " scores for " + std::to_string(n) +
                         " ids");
    }
    if (!counts_.empty() && counts_.size() != n * n) {
        throw ShapeError("MI matrix: pair count table has wrong size");
    }
    if (!binning_.empty() && binning_.size() != n) {
        throw ShapeError("MI matrix: binning table has wrong size");
    }
    if (std::set<SensorId>(ids_.begin(), ids_.end()).size() != n) {
        throw ValidationError("MI matrix: duplicate sensor ids");
    }
}

std::size_t MiMatrix::index_of(const SensorId& id) const
{
    auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) {
        throw ValidationError("MI matrix has no sensor '" + id.str() + "'");
    }
    return static_cast<std::size_t>(it - ids_.begin());
}

std::size_t MiMatrix::pair_count(std::size_t i, std::size_t j) const
{
    return counts_.empty() ? 0 : counts_.at(i * ids_.size() + j);
}

bool MiMatrix::has(std::size_t i, std::size_t j) const
{
    return !std::isnan(at(i, j));
}

std::string MiMatrix::to_csv() const
{
    std::ostringstream os;
    os << "sensor";
    for (const auto& id : ids_) {
        os << ',' << id.str();
    }
    os << '\n';
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        os << ids_[i].str();
        for (std::size_t j = 0; j < ids_.size(); ++j) {
            os << ',' << format4(at(i, j));
        }
        os << '\n';
    }
    return os.str();
}

nlohmann::json MiMatrix::to_json() const
{
    nlohmann::json j;
    j["unit"] = "nats";
    j["ids"] = nlohmann::json::array();
    for (const auto& id : ids_) {
        j["ids"].push_back(id.str());
    }
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        auto row = nlohmann::json::array();
        for (std::size_t k = 0; k < ids_.size(); ++k) {
            if (has(i, k)) {
                row.push_back(at(i, k));
            } else {
                row.push_back(nullptr);
            }
        }
        rows.push_back(std::move(row));
    }
    j["scores"] = std::move(rows);
    if (!counts_.empty()) {
        j["pair_counts"] = counts_;
    }
    auto bins = nlohmann::json::array();
    for (const auto& b : binning_) {
        bins.push_back({{"width", b.width},
                        {"count", b.count},
                        {"min", b.min},
                        {"max", b.max},
                        {"sturges_fallback", b.sturges_fallback}});
    }
    j["binning"] = std::move(bins);
    return j;
}

MiMatrix MiMatrix::from_json(const nlohmann::json& j)
{
    std::vector<SensorId> ids;
    for (const auto& s : j.at("ids")) {
        ids.emplace_back(s.get<std::string>());
    }
    std::vector<double> scores;
    for (const auto& row : j.at("scores")) {
        if (row.size() != ids.size()) {
            throw FormatError("MI matrix JSON: ragged score rows");
        }
        for (const auto& v : row) {
            scores.push_back(v.is_null() ? kNaN : v.get<double>());
        }
    }
    std::vector<std::size_t> counts;
    if (j.contains("pair_counts")) {
        counts = j.at("pair_counts").get<std::vector<std::size_t>>();
    }
    std::vector<BinningSpec> binning;
    if (j.contains("binning")) {
        for (const auto& b : j.at("binning")) {
            binning.push_back(BinningSpec{b.at("width").get<double>(), b.at("count").get<std::size_t>(),
                                          b.at("min").get<double>(), b.at("max").get<double>(),
                                          b.value("sturges_fallback", false)});
        }
    }
    return MiMatrix(std::move(ids), std::move(scores), std::move(counts), std::move(binning));
}

MiMatrix mi_matrix(const SensorDataset& dataset, const MiOptions& options)
{
    const std::size_t n = dataset.size();
    if (n < 2) {
        throw InsufficientDataError("MI matrix needs at least 2 series");
    }
    std::vector<BinningSpec> binning(n);
    std::vector<std::vector<int>> bins(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto observed = dataset[i].observed_values();
        if (observed.size() < 2) {
            warn("series " + dataset[i].id().str() + " has fewer than 2 observed values; its MI entries are absent");
            bins[i].assign(dataset.length(), -1);
            continue;
        }
        binning[i] = make_binning(observed);
        bins[i] = discretize(dataset[i], binning[i]);
    }

    std::vector<double> scores(n * n, kNaN);
    std::vector<std::size_t> counts(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            try {
                const auto est = mutual_information_estimate(bins[i], bins[j], binning[i].count, binning[j].count,
                                                             i == j ? 0 : options.lag);
                scores[i * n + j] = scores[j * n + i] = est.value;
                counts[i * n + j] = counts[j * n + i] = est.n;
            } catch (const InsufficientDataError&) {
                if (i != j) {
                    warn("MI(" + dataset[i].id().str() + ", " + dataset[j].id().str() +
                         "): too few joint observations");
                }
            }
        }
    }
    return MiMatrix(dataset.ids(), std::move(scores), std::move(counts), std::move(binning));
}

nlohmann::json CovariateSelection::to_json() const
{
    nlohmann::json j;
    j["target"] = target.str();
    j["covariates"] = nlohmann::json::array();
    for (const auto& c : covariates) {
        j["covariates"].push_back(c.str());
    }
    j["scores"] = scores;
    return j;
}

CovariateSelection CovariateSelection::from_json(const nlohmann::json& j)
{
    CovariateSelection sel;
    sel.target = SensorId(j.at("target").get<std::string>());
    for (const auto& c : j.at("covariates")) {
        sel.covariates.emplace_back(c.get<std::string>());
    }
    sel.scores = j.value("scores", std::vector<double>{});
    if (sel.scores.size() != sel.covariates.size()) {
        sel.scores.assign(sel.covariates.size(), kNaN);
    }
    return sel;
}

namespace {

struct Candidate {
    double score;
    SensorId id;
};

std::vector<Candidate> candidates_for(const MiMatrix& matrix, std::size_t t, const std::set<SensorId>& excluded)
{
    std::vector<Candidate> out;
    for (std::size_t j = 0; j < matrix.size(); ++j) {
        if (excluded.count(matrix.ids()[j]) != 0 || !matrix.has(t, j)) {
            continue;
        }
        out.push_back({matrix.at(t, j), matrix.ids()[j]});
    }
    return out;
}

std::size_t clamp_top_k(std::size_t top_k, std::size_t available, const SensorId& target)
{
    if (top_k == 0) {
        throw ValidationError("top_k must be at least 1");
    }
    if (top_k > available) {
        warn("top_k " + std::to_string(top_k) + " exceeds the " + std::to_string(available) +
             " candidates for target " + target.str() + "; clamping");
        return available;
    }
    return top_k;
}

} // namespace

std::vector<CovariateSelection> select_informative_covariates(const MiMatrix& matrix,
                                                              std::span<const SensorId> targets, std::size_t top_k)
{
    const std::set<SensorId> excluded(targets.begin(), targets.end());
    std::vector<CovariateSelection> out;
    for (const auto& target : targets) {
        const std::size_t t = matrix.index_of(target);
        auto cands = candidates_for(matrix, t, excluded);
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return a.score != b.score ? a.score > b.score : a.id < b.id;
        });
        const std::size_t k = clamp_top_k(top_k, cands.size(), target);
        CovariateSelection sel{target, {}, {}};
        for (std::size_t i = 0; i < k; ++i) {
            sel.covariates.push_back(cands[i].id);
            sel.scores.push_back(cands[i].score);
        }
        out.push_back(std::move(sel));
    }
    return out;
}

double mi_bias_floor(const MiMatrix& matrix, std::size_t i, std::size_t j)
{
    const std::size_t n = matrix.pair_count(i, j);
    if (n == 0 || matrix.binning().empty()) {
        return 0.0;
    }
    const double kx = static_cast<double>(matrix.binning()[i].count);
    const double ky = static_cast<double>(matrix.binning()[j].count);
    return (kx - 1.0) * (ky - 1.0) / (2.0 * static_cast<double>(n));
}

std::vector<CovariateSelection> select_less_informative(const MiMatrix& matrix, std::span<const SensorId> targets,
                                                        std::span<const SensorId> exclude, std::size_t top_k)
{
    std::set<SensorId> excluded(targets.begin(), targets.end());
    excluded.insert(exclude.begin(), exclude.end());
    std::vector<CovariateSelection> out;
    for (const auto& target : targets) {
        const std::size_t t = matrix.index_of(target);
        auto cands = candidates_for(matrix, t, excluded);
        std::erase_if(cands, [&](const Candidate& c) {
            return !(c.score > mi_bias_floor(matrix, t, matrix.index_of(c.id)));
        });
        // Ascending score; the result is then reported in descending order
        // like every other selection.
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return a.score != b.score ? a.score < b.score : a.id < b.id;
        });
        const std::size_t k = clamp_top_k(top_k, cands.size(), target);
        std::vector<Candidate> chosen(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(chosen.begin(), chosen.end(), [](const Candidate& a, const Candidate& b) {
            return a.score != b.score ? a.score > b.score : a.id < b.id;
        });
        CovariateSelection sel{target, {}, {}};
        for (const auto& c : chosen) {
            sel.covariates.push_back(c.id);
            sel.scores.push_back(c.score);
        }
        out.push_back(std::move(sel));
    }
    return out;
}

std::vector<SensorId> low_predictability_targets(const std::map<SensorId, double>& validation_mase,
                                                 double threshold)
{
    std::vector<SensorId> out;
    for (const auto& [id, m] : validation_mase) {
        if (m > threshold) {
            out.push_back(id);
        }
    }
    return out;
}

} // namespace gattf
