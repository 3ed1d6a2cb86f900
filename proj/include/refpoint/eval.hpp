#pragma once

#include "refpoint/corpus.hpp"
#include "refpoint/fusion/trainer.hpp"
#include "refpoint/matching.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace refpoint {

/// Percentage of exact matches. Throws Errc::EmptyInput, Errc::ShapeMismatch.
double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Percentage of samples whose truth is among the first two ranks.
double top2_accuracy(std::span<const std::vector<int>> rankings, std::span<const int> truth);

struct AngularStats {
    double mad_deg = 0.0;
    double stdad_deg = 0.0;  // population SD
};

/// Throws Errc::ZeroVector, Errc::EmptyInput, Errc::ShapeMismatch.
AngularStats mad_metric(std::span<const Vec3> pred, std::span<const Vec3> truth);

struct Fold {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

/// Test folds partition the users; each fold validates on the next fold's test
/// users and trains on the rest.
struct SplitPlan {
    int k = 0;
    std::vector<Fold> folds;

    /// Throws Errc::SplitLeak when a user appears in two roles of one fold.
    void validate() const;
};

/// Seeded shuffle, contiguous test folds (the first n % k folds get one extra
/// user). Requires 3 <= k <= n_users. Throws Errc::TooFewUsers.
SplitPlan make_kfold_splits(std::vector<std::string> users, int k, std::uint64_t seed);

/// Throws Errc::SplitLeak when a sample of a held-out user is in the training set.
void assert_no_leak(const Fold& fold, std::span<const SampleTensor> train_samples);

struct Prediction {
    Vec3 vector = Vec3::Zero();
    int roi_id = 0;
    std::vector<int> ranking;
};

/// Fused vectors matched against every ROI of the scenario in each sample's pose.
std::vector<Prediction> predict_and_match(const fusion::FusionModel& model, std::span<const SampleTensor> samples,
                                          const Scenario& scenario, MatchMode mode = MatchMode::Algorithm1);

struct Metrics {
    std::size_t n = 0;
    double acc = 0.0;
    double top2 = 0.0;
    double mad_deg = 0.0;
    double stdad_deg = 0.0;
};

Metrics compute_metrics(std::span<const Prediction> preds, std::span<const SampleTensor> samples);

struct ExperimentConfig {
    fusion::NetworkConfig net;
    fusion::TrainConfig train;
    int folds = 5;
    std::uint64_t split_seed = 2021;
    bool pooled = false;  // pool test events across folds instead of averaging fold metrics
    MatchMode match_mode = MatchMode::Algorithm1;
    int jobs = 1;         // folds trained concurrently
};

struct CrossValResult {
    Metrics metrics;                    // averaged (or pooled) over folds
    std::vector<Metrics> per_fold;
    std::vector<std::size_t> test_index;  // sample indices in fold order
    std::vector<Prediction> predictions;  // aligned with test_index
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains one model per fold with the given branch mask. Throws Errc::EmptyFilter
/// when `samples` is empty, Errc::TooFewUsers, Errc::SplitLeak.
CrossValResult cross_validate(std::span<const SampleTensor> samples, const Scenario& scenario,
                              const std::array<bool, 3>& branches, const ExperimentConfig& cfg,
                              const ProgressFn& progress = {});

struct ReportRow {
    RefType ref_type = RefType::Volume;
    std::string pose;  // "1".."4" or "all" (one model trained on every pose)
    std::string modality;
    std::size_t n_events = 0;
    double acc = 0.0;
    double top2 = 0.0;
    double mad_deg = 0.0;
    double stdad_deg = 0.0;
};

struct EvalReport {
    std::vector<ReportRow> rows;
};

struct AblationSpec {
    std::vector<std::string> subsets{"head", "gaze", "finger", "fusion"};
    std::vector<RefType> ref_types{RefType::Volume, RefType::Point};
    std::vector<int> poses;  // empty: every pose with events of the reference type
    bool all_poses_rows = true;
};

/// One freshly trained model per (reference type, pose filter, subset) row.
/// Throws Errc::EmptyFilter when a requested filter selects no events.
EvalReport run_ablation(const Dataset& data, const AblationSpec& spec, const ExperimentConfig& cfg,
                        const ProgressFn& progress = {});

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

/// Least squares y = slope * x + intercept. Throws Errc::TooFewUsers for n < 2.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct UserRow {
    std::string user_id;
    RefType ref_type = RefType::Volume;
    int pose = 0;
    std::size_t n_events = 0;
    double acc = 0.0;
    double mad_deg = 0.0;
};

struct PoseFit {
    RefType ref_type = RefType::Volume;
    int pose = 0;
    LinearFit fit;  // accuracy against MAD
};

struct UserReport {
    std::vector<UserRow> users;
    std::vector<PoseFit> fits;
};

/// Leave-one-user-out per pose with the fusion model: one row per held-out user
/// and a linear fit of accuracy against MAD per pose.
UserReport per_user_report(const Dataset& data, RefType ref_type, const ExperimentConfig& cfg,
                           const std::vector<int>& poses = {}, const ProgressFn& progress = {});

void write_report_csv(std::ostream& out, const EvalReport& report);
void write_report_table(std::ostream& out, const EvalReport& report);
void write_user_csv(std::ostream& out, const UserReport& report);

}  // namespace refpoint
