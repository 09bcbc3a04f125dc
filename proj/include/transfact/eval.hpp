#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "transfact/trainer.hpp"

namespace transfact {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }
    double accuracy() const;
};

ConfusionCounts confusion(const std::vector<int>& preds, const std::vector<int>& labels, int positive_class);

struct Prf1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    // set when any ratio had a zero denominator and was reported as 0
    bool degenerate = false;
};

Prf1 prf1(const std::vector<int>& preds, const std::vector<int>& labels, int positive_class);

struct RunAggregate {
    std::string metric;
    std::vector<double> values;
    double mean = 0.0;
    double std = 0.0; // sample (n-1); 0 for a single run
};

RunAggregate aggregate_runs(const std::vector<double>& values, std::string metric = {});

/// Exact p as numerator / 2^n so callers can compare rationals.
struct WilcoxonResult {
    int n = 0;           // after dropping zeros
    double w_plus = 0.0; // rank sum of positive differences
    double w_minus = 0.0;
    std::uint64_t extreme_count = 0;
    std::uint64_t pattern_count = 0;
    double p_value = 0.0;
};

/// Full enumeration of sign patterns; average ranks on |d| ties; zeros dropped.
WilcoxonResult wilcoxon_signed_rank_exact(const std::vector<double>& differences, bool two_sided = true);

double cohens_d(const std::vector<double>& a, const std::vector<double>& b);

/// Test-set metrics for one trained model.
struct EvalMetrics {
    std::size_t videos = 0;
    double accuracy = 0.0;
    Prf1 transferable;     // positive = T
    Prf1 non_transferable; // positive = NT
    double frame_accuracy = 0.0;
};

EvalMetrics evaluate_predictions(const std::vector<Prediction>& preds);
nlohmann::json to_json(const EvalMetrics& m);

inline constexpr int kMinContext = 2;

struct SweepPoint {
    int length = 0;
    RunAggregate accuracy;
};

/// `run(length, seed_index)` trains on prefixes of `length` frames and
/// returns the test accuracy on equally truncated test videos. Calls for
/// different (length, seed) pairs are independent and run on up to `jobs`
/// threads; results are placed by index, so output is order-independent.
std::vector<SweepPoint> truncation_sweep(const std::function<double(int length, int seed_index)>& run,
                                         const std::vector<int>& lengths, int full_length, int seeds,
                                         int jobs = 1);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points);
std::vector<SweepPoint> read_sweep_csv(const std::filesystem::path& path);

/// One value per line or comma-separated; '#' comments and a non-numeric
/// header line are skipped.
std::vector<double> read_runs_csv(const std::filesystem::path& path);

} // namespace transfact
