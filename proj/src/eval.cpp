#include "refpoint/eval.hpp"

#include "refpoint/error.hpp"
#include "refpoint/seed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <ostream>
#include <random>
#include <set>

namespace refpoint {

using fusion::FusionModel;

double accuracy(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw Error(Errc::ShapeMismatch, "prediction and truth lengths differ");
    if (pred.empty()) throw Error(Errc::EmptyInput, "accuracy of zero predictions");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

double top2_accuracy(std::span<const std::vector<int>> rankings, std::span<const int> truth) {
    if (rankings.size() != truth.size()) throw Error(Errc::ShapeMismatch, "ranking and truth lengths differ");
    if (rankings.empty()) throw Error(Errc::EmptyInput, "top-2 accuracy of zero predictions");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rankings.size(); ++i) {
        const auto& r = rankings[i];
        if (r.empty()) throw Error(Errc::EmptyInput, "empty ranking");
        const std::size_t top = std::min<std::size_t>(2, r.size());
        hits += std::find(r.begin(), r.begin() + static_cast<long>(top), truth[i]) != r.begin() + static_cast<long>(top) ? 1 : 0;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(rankings.size());
}

AngularStats mad_metric(std::span<const Vec3> pred, std::span<const Vec3> truth) {
    if (pred.size() != truth.size()) throw Error(Errc::ShapeMismatch, "prediction and truth lengths differ");
    if (pred.empty()) throw Error(Errc::EmptyInput, "MAD of zero vectors");
    std::vector<double> ang(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) ang[i] = rad_to_deg(angle_between(pred[i], truth[i]));
    double mean = 0.0;
    for (double a : ang) mean += a;
    mean /= static_cast<double>(ang.size());
    double var = 0.0;
    for (double a : ang) var += (a - mean) * (a - mean);
    var /= static_cast<double>(ang.size());
    return {mean, std::sqrt(var)};
}

void SplitPlan::validate() const {
    std::set<std::string> tested;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const Fold& f = folds[i];
        std::set<std::string> train(f.train.begin(), f.train.end());
        std::set<std::string> val(f.validation.begin(), f.validation.end());
        for (const auto& u : f.test) {
            if (train.contains(u) || val.contains(u)) {
                throw Error(Errc::SplitLeak, "fold " + std::to_string(i) + ": test user " + u + " also in train/validation");
            }
            if (!tested.insert(u).second) throw Error(Errc::SplitLeak, "user " + u + " tested in two folds");
        }
        for (const auto& u : f.validation) {
            if (train.contains(u)) {
                throw Error(Errc::SplitLeak, "fold " + std::to_string(i) + ": validation user " + u + " also in train");
            }
        }
    }
}

SplitPlan make_kfold_splits(std::vector<std::string> users, int k, std::uint64_t seed) {
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    const int n = static_cast<int>(users.size());
    if (k < 3) throw Error(Errc::TooFewUsers, "user-based splits with validation need k >= 3");
    if (n < k) {
        throw Error(Errc::TooFewUsers, std::to_string(n) + " users cannot fill " + std::to_string(k) + " folds");
    }
    std::mt19937_64 rng(derive_seed(seed, 0xf01d));
    std::shuffle(users.begin(), users.end(), rng);

    std::vector<std::vector<std::string>> parts(static_cast<std::size_t>(k));
    int pos = 0;
    for (int i = 0; i < k; ++i) {
        const int size = n / k + (i < n % k ? 1 : 0);
        parts[static_cast<std::size_t>(i)].assign(users.begin() + pos, users.begin() + pos + size);
        pos += size;
    }
    SplitPlan plan;
    plan.k = k;
    for (int i = 0; i < k; ++i) {
        Fold f;
        const int v = (i + 1) % k;
        f.test = parts[static_cast<std::size_t>(i)];
        f.validation = parts[static_cast<std::size_t>(v)];
        for (int j = 0; j < k; ++j) {
            if (j == i || j == v) continue;
            const auto& p = parts[static_cast<std::size_t>(j)];
            f.train.insert(f.train.end(), p.begin(), p.end());
        }
        plan.folds.push_back(std::move(f));
    }
    plan.validate();
    return plan;
}

void assert_no_leak(const Fold& fold, std::span<const SampleTensor> train_samples) {
    std::set<std::string> held(fold.test.begin(), fold.test.end());
    held.insert(fold.validation.begin(), fold.validation.end());
    for (const auto& s : train_samples) {
        if (held.contains(s.meta.user_id)) {
            throw Error(Errc::SplitLeak, "held-out user " + s.meta.user_id + " found in a training batch");
        }
    }
}

std::vector<Prediction> predict_and_match(const FusionModel& model, std::span<const SampleTensor> samples,
                                          const Scenario& scenario, MatchMode mode) {
    const std::vector<Vec3> vecs = model.predict(samples);
    const RoiMap map = RoiMap::from_scenario(scenario);
    std::map<int, RoiMap> per_pose;
    for (const auto& p : scenario.poses) per_pose.emplace(p.id, to_car_frame(map, p.ecef_to_car));
    std::vector<Prediction> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto it = per_pose.find(samples[i].meta.pose_id);
        if (it == per_pose.end()) throw Error(Errc::UnknownPose, "pose " + std::to_string(samples[i].meta.pose_id));
        Prediction& p = out[i];
        p.vector = vecs[i];
        try {
            const MatchResult m = match_roi(vecs[i], it->second, RigidTransform::identity(), mode);
            p.roi_id = m.roi_id;
            p.ranking = m.ranking;
        } catch (const Error& e) {
            if (e.code() != Errc::ZeroVector) throw;
            throw Error(Errc::NumericalFailure, "model produced a zero vector");
        }
    }
    return out;
}

Metrics compute_metrics(std::span<const Prediction> preds, std::span<const SampleTensor> samples) {
    if (preds.size() != samples.size()) throw Error(Errc::ShapeMismatch, "predictions and samples differ in length");
    std::vector<int> pred_ids, truth;
    std::vector<std::vector<int>> ranks;
    std::vector<Vec3> pv, tv;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        pred_ids.push_back(preds[i].roi_id);
        ranks.push_back(preds[i].ranking);
        truth.push_back(samples[i].meta.roi_id);
        pv.push_back(preds[i].vector);
        tv.push_back(samples[i].label.vec());
    }
    Metrics m;
    m.n = preds.size();
    m.acc = accuracy(pred_ids, truth);
    m.top2 = top2_accuracy(ranks, truth);
    const AngularStats a = mad_metric(pv, tv);
    m.mad_deg = a.mad_deg;
    m.stdad_deg = a.stdad_deg;
    return m;
}

namespace {

std::vector<SampleTensor> select_users(std::span<const SampleTensor> samples, const std::vector<std::string>& users,
                                       std::vector<std::size_t>* index = nullptr) {
    const std::set<std::string> keep(users.begin(), users.end());
    std::vector<SampleTensor> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!keep.contains(samples[i].meta.user_id)) continue;
        out.push_back(samples[i]);
        if (index) index->push_back(i);
    }
    return out;
}

std::vector<std::string> users_of(std::span<const SampleTensor> samples) {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.meta.user_id);
    return {ids.begin(), ids.end()};
}

struct FoldOutput {
    Metrics metrics;
    std::vector<std::size_t> index;
    std::vector<Prediction> preds;
};

FoldOutput run_fold(std::span<const SampleTensor> samples, const Scenario& scenario, const Fold& fold,
                    const std::array<bool, 3>& branches, const ExperimentConfig& cfg, std::size_t fold_no) {
    const auto tr = select_users(samples, fold.train);
    const auto va = select_users(samples, fold.validation);
    FoldOutput out;
    const auto te = select_users(samples, fold.test, &out.index);
    assert_no_leak(fold, tr);
    if (te.empty()) throw Error(Errc::EmptySplit, "fold " + std::to_string(fold_no) + " has no test events");
    fusion::NetworkConfig net = cfg.net;
    net.branches = branches;
    fusion::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, 0xf0, fold_no);
    const fusion::TrainResult r = fusion::train(tr, va, net, tc);
    out.preds = predict_and_match(r.model, te, scenario, cfg.match_mode);
    out.metrics = compute_metrics(out.preds, te);
    return out;
}

}  // namespace

CrossValResult cross_validate(std::span<const SampleTensor> samples, const Scenario& scenario,
                              const std::array<bool, 3>& branches, const ExperimentConfig& cfg,
                              const ProgressFn& progress) {
    if (samples.empty()) throw Error(Errc::EmptyFilter, "no events selected for cross validation");
    const SplitPlan plan = make_kfold_splits(users_of(samples), cfg.folds, cfg.split_seed);
    std::vector<FoldOutput> outs(plan.folds.size());
    std::vector<std::exception_ptr> errors(plan.folds.size());
    const auto nf = static_cast<long>(plan.folds.size());
    const int jobs = std::max(1, cfg.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
    for (long i = 0; i < nf; ++i) {
        const auto fi = static_cast<std::size_t>(i);
        try {
            outs[fi] = run_fold(samples, scenario, plan.folds[fi], branches, cfg, fi);
        } catch (...) {
            errors[fi] = std::current_exception();
        }
        if (progress && jobs == 1) progress("fold " + std::to_string(fi + 1) + "/" + std::to_string(nf) + " done");
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    CrossValResult res;
    std::vector<SampleTensor> pooled;
    for (auto& o : outs) {
        res.per_fold.push_back(o.metrics);
        res.test_index.insert(res.test_index.end(), o.index.begin(), o.index.end());
        res.predictions.insert(res.predictions.end(), o.preds.begin(), o.preds.end());
    }
    if (cfg.pooled) {
        for (std::size_t i : res.test_index) pooled.push_back(samples[i]);
        res.metrics = compute_metrics(res.predictions, pooled);
    } else {
        Metrics m;
        for (const auto& f : res.per_fold) {
            m.n += f.n;
            m.acc += f.acc;
            m.top2 += f.top2;
            m.mad_deg += f.mad_deg;
            m.stdad_deg += f.stdad_deg;
        }
        const auto k = static_cast<double>(res.per_fold.size());
        m.acc /= k;
        m.top2 /= k;
        m.mad_deg /= k;
        m.stdad_deg /= k;
        res.metrics = m;
    }
    return res;
}

EvalReport run_ablation(const Dataset& data, const AblationSpec& spec, const ExperimentConfig& cfg,
                        const ProgressFn& progress) {
    EvalReport report;
    for (const auto& s : spec.subsets) (void)fusion::branch_mask_for(s);
    for (RefType rt : spec.ref_types) {
        std::vector<SampleTensor> of_type;
        for (const auto& s : data.samples) {
            if (s.meta.ref_type == rt) of_type.push_back(s);
        }
        std::set<int> present;
        for (const auto& s : of_type) present.insert(s.meta.pose_id);
        std::vector<int> poses;
        if (spec.poses.empty()) {
            poses.assign(present.begin(), present.end());
        } else {
            // a pose without events of this type (pose 4 has no point events) is skipped
            for (int p : spec.poses) {
                if (present.contains(p)) poses.push_back(p);
            }
        }
        if (poses.empty()) continue;

        std::vector<std::pair<std::string, std::vector<SampleTensor>>> filters;
        for (int p : poses) {
            std::vector<SampleTensor> sel;
            for (const auto& s : of_type) {
                if (s.meta.pose_id == p) sel.push_back(s);
            }
            filters.emplace_back(std::to_string(p), std::move(sel));
        }
        if (spec.all_poses_rows) {
            std::vector<SampleTensor> sel;
            const std::set<int> keep(poses.begin(), poses.end());
            for (const auto& s : of_type) {
                if (keep.contains(s.meta.pose_id)) sel.push_back(s);
            }
            filters.emplace_back("all", std::move(sel));
        }
        for (const auto& [pose, sel] : filters) {
            for (const auto& subset : spec.subsets) {
                if (progress) progress(std::string(to_string(rt)) + " pose " + pose + " " + subset);
                const CrossValResult cv = cross_validate(sel, data.scenario, fusion::branch_mask_for(subset), cfg);
                ReportRow row;
                row.ref_type = rt;
                row.pose = pose;
                row.modality = subset;
                row.n_events = sel.size();
                row.acc = cv.metrics.acc;
                row.top2 = cv.metrics.top2;
                row.mad_deg = cv.metrics.mad_deg;
                row.stdad_deg = cv.metrics.stdad_deg;
                report.rows.push_back(row);
            }
        }
    }
    if (!spec.poses.empty()) {
        for (int p : spec.poses) {
            const bool any = std::any_of(report.rows.begin(), report.rows.end(),
                                         [&](const ReportRow& r) { return r.pose == std::to_string(p); });
            if (!any) throw Error(Errc::EmptyFilter, "pose " + std::to_string(p) + " has no events of the requested types");
        }
    }
    if (report.rows.empty()) throw Error(Errc::EmptyFilter, "no events match the ablation filters");
    return report;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(Errc::ShapeMismatch, "x and y lengths differ");
    if (x.size() < 2) throw Error(Errc::TooFewUsers, "a linear fit needs at least two points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.n = x.size();
    f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += r * r;
    }
    // constant y: 1 for an exact fit, else 0
    f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
    return f;
}

UserReport per_user_report(const Dataset& data, RefType ref_type, const ExperimentConfig& cfg,
                           const std::vector<int>& poses, const ProgressFn& progress) {
    std::set<int> present;
    for (const auto& s : data.samples) {
        if (s.meta.ref_type == ref_type) present.insert(s.meta.pose_id);
    }
    std::vector<int> chosen = poses.empty() ? std::vector<int>(present.begin(), present.end()) : poses;
    UserReport rep;
    for (int p : chosen) {
        std::vector<SampleTensor> sel;
        for (const auto& s : data.samples) {
            if (s.meta.ref_type == ref_type && s.meta.pose_id == p) sel.push_back(s);
        }
        if (sel.empty()) throw Error(Errc::EmptyFilter, "pose " + std::to_string(p) + " has no events");
        const auto users = users_of(sel);
        if (users.size() < 3) throw Error(Errc::TooFewUsers, "leave-one-out needs at least 3 users");
        if (progress) progress("per-user pose " + std::to_string(p));
        ExperimentConfig loo = cfg;
        loo.folds = static_cast<int>(users.size());
        loo.pooled = true;
        const CrossValResult cv = cross_validate(sel, data.scenario, {true, true, true}, loo);

        std::map<std::string, std::pair<std::vector<Prediction>, std::vector<SampleTensor>>> by_user;
        for (std::size_t i = 0; i < cv.test_index.size(); ++i) {
            const SampleTensor& s = sel[cv.test_index[i]];
            auto& slot = by_user[s.meta.user_id];
            slot.first.push_back(cv.predictions[i]);
            slot.second.push_back(s);
        }
        std::vector<double> xs, ys;
        for (const auto& [uid, pr] : by_user) {
            const Metrics m = compute_metrics(pr.first, pr.second);
            rep.users.push_back({uid, ref_type, p, m.n, m.acc, m.mad_deg});
            xs.push_back(m.mad_deg);
            ys.push_back(m.acc);
        }
        rep.fits.push_back({ref_type, p, fit_line(xs, ys)});
    }
    return rep;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
    out << "ref_type,pose,modality,n_events,acc,top2,mad_deg,stdad_deg\n";
    char buf[256];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%zu,%.4f,%.4f,%.4f,%.4f\n", std::string(to_string(r.ref_type)).c_str(),
                      r.pose.c_str(), r.modality.c_str(), r.n_events, r.acc, r.top2, r.mad_deg, r.stdad_deg);
        out << buf;
    }
}

void write_report_table(std::ostream& out, const EvalReport& report) {
    char buf[256];
    for (RefType rt : {RefType::Volume, RefType::Point}) {
        bool header = false;
        std::string last_pose;
        for (const auto& r : report.rows) {
            if (r.ref_type != rt) continue;
            if (!header) {
                out << (rt == RefType::Volume ? "Volume-based referencing\n" : "Point-based referencing\n");
                out << "Car pose   # events  Modality    Acc.    Top-2 Acc.  MAD (Std.AD)\n";
                out << "-----------------------------------------------------------------\n";
                header = true;
            }
            const bool first = r.pose != last_pose;
            if (first && !last_pose.empty()) out << "-----------------------------------------------------------------\n";
            last_pose = r.pose;
            const std::string pose = first ? (r.pose == "all" ? "All poses" : "Pose " + r.pose) : "";
            const std::string count = first ? std::to_string(r.n_events) : "";
            std::string name = r.modality;
            if (!name.empty()) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
            std::snprintf(buf, sizeof buf, "%-10s %8s  %-10s %5.1f%%   %5.1f%%     %5.1f (%5.1f)\n", pose.c_str(),
                          count.c_str(), name.c_str(), r.acc, r.top2, r.mad_deg, r.stdad_deg);
            out << buf;
        }
        if (header) out << '\n';
    }
}

void write_user_csv(std::ostream& out, const UserReport& report) {
    out << "ref_type,pose,user_id,n_events,acc,mad_deg\n";
    char buf[256];
    for (const auto& u : report.users) {
        std::snprintf(buf, sizeof buf, "%s,%d,%s,%zu,%.4f,%.4f\n", std::string(to_string(u.ref_type)).c_str(), u.pose,
                      u.user_id.c_str(), u.n_events, u.acc, u.mad_deg);
        out << buf;
    }
    out << "\nref_type,pose,n_users,slope,intercept,r2\n";
    for (const auto& f : report.fits) {
        std::snprintf(buf, sizeof buf, "%s,%d,%zu,%.6f,%.6f,%.6f\n", std::string(to_string(f.ref_type)).c_str(), f.pose,
                      f.fit.n, f.fit.slope, f.fit.intercept, f.fit.r2);
        out << buf;
    }
}

}  // namespace refpoint
