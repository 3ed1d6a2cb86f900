#include "refpoint/cli.hpp"

#include "refpoint/corpus.hpp"
#include "refpoint/eval.hpp"
#include "refpoint/fusion/checkpoint.hpp"
#include "refpoint/matching.hpp"
#include "refpoint/synth.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace refpoint::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidArgument: return kUsage;
        case Errc::NumericalFailure:
        case Errc::ZeroPrediction: return kNumericalFailure;
        default: return kDataError;
    }
}

RunConfig::RunConfig() {
    const fusion::TrainConfig t;
    const fusion::NetworkConfig n;
    const CorpusConfig c;
    values_ = {
        {"train",
         {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"lr", t.lr},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"eps", t.eps},
          {"plateau_patience", t.plateau_patience},
          {"plateau_factor", t.plateau_factor}}},
        {"net",
         {{"feature_maps", n.feature_maps},
          {"branch_layers", n.branch_layers},
          {"joint_layers", n.joint_layers},
          {"joint_kernel", n.joint_kernel}}},
        {"eval", {{"folds", 5}, {"pooled", false}, {"match_mode", "algorithm1"}, {"jobs", 1}}},
        {"synth",
         {{"users", c.n_users},
          {"events_per_user", c.events_per_user},
          {"ref_types", "volume"},
          {"user_variation", c.user_variation},
          {"noise_scale", 1.0},
          {"occlusion", "paper"},
          {"finger_lag", DriverProfile{}.finger_lag},
          {"jitter_deg", 0.5}}},
    };
}

const json& RunConfig::at(const std::string& key) const {
    const auto dot = key.find('.');
    if (dot == std::string::npos || !values_.contains(key.substr(0, dot)) ||
        !values_.at(key.substr(0, dot)).contains(key.substr(dot + 1))) {
        throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'");
    }
    return values_.at(key.substr(0, dot)).at(key.substr(dot + 1));
}

void RunConfig::assign(const std::string& key, const json& value) {
    const json& current = at(key);
    const bool numeric = current.is_number() && value.is_number();
    if (current.type() != value.type() && !numeric) {
        throw Error(Errc::InvalidArgument, "config key '" + key + "' expects " + current.type_name() + ", got " +
                                               value.type_name());
    }
    if (current.is_number_integer() && !value.is_number_integer()) {
        throw Error(Errc::InvalidArgument, "config key '" + key + "' expects an integer");
    }
    const auto dot = key.find('.');
    values_[key.substr(0, dot)][key.substr(dot + 1)] = value;
}

void RunConfig::merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::FormatError, path + ": " + e.what());
    }
    if (!j.is_object()) throw Error(Errc::FormatError, path + ": expected a JSON object");
    for (const auto& [section, entries] : j.items()) {
        if (!entries.is_object()) throw Error(Errc::FormatError, path + ": section '" + section + "' must be an object");
        for (const auto& [name, value] : entries.items()) assign(section + "." + name, value);
    }
}

void RunConfig::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(Errc::InvalidArgument, "--set expects key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    assign(key, value);
}

std::uint64_t resolve_seed(const std::string& flag_value) {
    std::string text = flag_value;
    if (text.empty()) {
        const char* env = std::getenv("REFPOINT_SEED");
        if (env != nullptr) text = env;
    }
    if (text.empty()) return 2021;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(text, &used, 0);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw Error(Errc::InvalidArgument, "seed must be an unsigned integer, got '" + text + "'");
    }
}

namespace {

struct Common {
    std::string seed;
    std::string config_file;
    std::vector<std::string> sets;
    int jobs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Seed for every random stream (falls back to REFPOINT_SEED, then 2021)");
    cmd->add_option("--config", c.config_file, "JSON config file with train/net/eval/synth sections");
    cmd->add_option("--set", c.sets, "Override a config value, key=value (repeatable)");
    cmd->add_option("--jobs", c.jobs, "Maximum worker threads")->check(CLI::PositiveNumber);
}

RunConfig build_config(const Common& c) {
    RunConfig cfg;
    if (!c.config_file.empty()) cfg.merge_file(c.config_file);
    for (const auto& s : c.sets) cfg.set(s);
    if (c.jobs > 0) omp_set_num_threads(c.jobs);
    return cfg;
}

fusion::TrainConfig train_config(const RunConfig& cfg, std::uint64_t seed) {
    fusion::TrainConfig t;
    t.epochs = cfg.at("train.epochs").get<int>();
    t.batch_size = cfg.at("train.batch_size").get<int>();
    t.lr = cfg.at("train.lr").get<double>();
    t.beta1 = cfg.at("train.beta1").get<double>();
    t.beta2 = cfg.at("train.beta2").get<double>();
    t.eps = cfg.at("train.eps").get<double>();
    t.plateau_patience = cfg.at("train.plateau_patience").get<int>();
    t.plateau_factor = cfg.at("train.plateau_factor").get<double>();
    t.seed = seed;
    t.validate();
    return t;
}

fusion::NetworkConfig network_config(const RunConfig& cfg) {
    fusion::NetworkConfig n;
    n.feature_maps = cfg.at("net.feature_maps").get<int>();
    n.branch_layers = cfg.at("net.branch_layers").get<int>();
    n.joint_layers = cfg.at("net.joint_layers").get<int>();
    n.joint_kernel = cfg.at("net.joint_kernel").get<int>();
    n.validate();
    return n;
}

MatchMode match_mode_from(const std::string& s) {
    if (s == "algorithm1") return MatchMode::Algorithm1;
    if (s == "raybox") return MatchMode::RayBox;
    throw Error(Errc::InvalidArgument, "match mode must be algorithm1 or raybox, got '" + s + "'");
}

ExperimentConfig experiment_config(const RunConfig& cfg, std::uint64_t seed) {
    ExperimentConfig e;
    e.net = network_config(cfg);
    e.train = train_config(cfg, seed);
    e.folds = cfg.at("eval.folds").get<int>();
    e.pooled = cfg.at("eval.pooled").get<bool>();
    e.match_mode = match_mode_from(cfg.at("eval.match_mode").get<std::string>());
    e.jobs = cfg.at("eval.jobs").get<int>();
    e.split_seed = seed;
    return e;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<RefType> ref_types_from(const std::string& s) {
    std::vector<RefType> out;
    for (const auto& t : split_list(s)) {
        try {
            out.push_back(ref_type_from_string(t));
        } catch (const Error&) {
            throw Error(Errc::InvalidArgument, "reference type must be volume or point, got '" + t + "'");
        }
    }
    if (out.empty()) throw Error(Errc::InvalidArgument, "no reference type given");
    return out;
}

std::vector<int> int_list(const std::string& s) {
    std::vector<int> out;
    for (const auto& t : split_list(s)) {
        try {
            out.push_back(std::stoi(t));
        } catch (const std::exception&) {
            throw Error(Errc::InvalidArgument, "expected an integer list, got '" + s + "'");
        }
    }
    return out;
}

Vec3 parse_vector(const std::string& s) {
    const auto parts = split_list(s);
    if (parts.size() != 3) throw Error(Errc::InvalidArgument, "vector needs three comma-separated components");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        try {
            std::size_t used = 0;
            v[i] = std::stod(parts[static_cast<std::size_t>(i)], &used);
            if (used != parts[static_cast<std::size_t>(i)].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw Error(Errc::InvalidArgument, "bad vector component '" + parts[static_cast<std::size_t>(i)] + "'");
        }
    }
    return v;
}

Scenario scenario_or_default(const std::string& path) {
    return path.empty() ? build_default_scenario() : load_scenario(path);
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    Common common;
    std::string out_dir;
    std::string scenario;
    int users = 0;
    int events = 0;
    std::string ref_types;
};

int cmd_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = build_config(a.common);
    if (a.users > 0) cfg.set("synth.users=" + std::to_string(a.users));
    if (a.events > 0) cfg.set("synth.events_per_user=" + std::to_string(a.events));
    if (!a.ref_types.empty()) cfg.set("synth.ref_types=\"" + a.ref_types + "\"");

    const std::uint64_t seed = resolve_seed(a.common.seed);
    const Scenario scenario = scenario_or_default(a.scenario);
    CorpusConfig cc;
    cc.seed = seed;
    cc.n_users = cfg.at("synth.users").get<int>();
    cc.events_per_user = cfg.at("synth.events_per_user").get<int>();
    cc.ref_types = ref_types_from(cfg.at("synth.ref_types").get<std::string>());
    cc.user_variation = cfg.at("synth.user_variation").get<double>();

    auto profiles = calibrate_profile_from_table2();
    const double scale = cfg.at("synth.noise_scale").get<double>();
    if (scale < 0) throw Error(Errc::InvalidArgument, "synth.noise_scale must be >= 0");
    for (auto& [pose, p] : profiles) {
        for (auto& n : p.noise) {
            n.yaw_mean *= scale;
            n.yaw_sd *= scale;
            n.pitch_mean *= scale;
            n.pitch_sd *= scale;
        }
        p.finger_lag = cfg.at("synth.finger_lag").get<double>();
        p.jitter_sd = deg_to_rad(cfg.at("synth.jitter_deg").get<double>());
    }
    for (const auto& pose : scenario.poses) {
        if (!profiles.contains(pose.id)) {
            throw Error(Errc::InvalidArgument, "no calibrated driver profile for pose id " + std::to_string(pose.id));
        }
    }
    const std::string occ_name = cfg.at("synth.occlusion").get<std::string>();
    OcclusionModel occ;
    if (occ_name == "paper") {
        occ = OcclusionModel::paper_default();
    } else if (occ_name == "none") {
        occ = OcclusionModel::none();
    } else {
        throw Error(Errc::InvalidArgument, "synth.occlusion must be paper or none");
    }

    const auto corpus = generate_corpus(scenario, cc, profiles, occ);
    write_corpus(a.out_dir, scenario, corpus, seed);
    std::size_t total = 0, volume = 0;
    for (const auto& u : corpus) {
        for (const auto& e : u.events) {
            ++total;
            volume += e.header.target.type == RefType::Volume ? 1 : 0;
        }
    }
    out << "wrote " << total << " events (" << volume << " volume, " << total - volume << " point) for "
        << corpus.size() << " users to " << a.out_dir << '\n';
    (void)err;
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    Common common;
    std::string corpus;
    std::string out;
    std::string history;
    std::string subset = "fusion";
    int pose = 0;
    std::string ref_type = "all";
    int fold = 0;
    std::string train_users, val_users, test_users;
    bool resume = false;
};

std::vector<SampleTensor> filter_samples(const std::vector<SampleTensor>& all, const std::string& ref_type, int pose) {
    std::vector<SampleTensor> out;
    const bool any_type = ref_type == "all";
    const RefType rt = any_type ? RefType::Volume : ref_types_from(ref_type).front();
    for (const auto& s : all) {
        if (!any_type && s.meta.ref_type != rt) continue;
        if (pose != 0 && s.meta.pose_id != pose) continue;
        out.push_back(s);
    }
    return out;
}

std::vector<SampleTensor> of_users(const std::vector<SampleTensor>& all, const std::vector<std::string>& users) {
    const std::set<std::string> keep(users.begin(), users.end());
    std::vector<SampleTensor> out;
    for (const auto& s : all) {
        if (keep.contains(s.meta.user_id)) out.push_back(s);
    }
    return out;
}

Fold explicit_fold(const std::vector<std::string>& users, const TrainArgs& a) {
    Fold f;
    f.validation = split_list(a.val_users);
    f.test = split_list(a.test_users);
    const std::set<std::string> known(users.begin(), users.end());
    std::set<std::string> seen;
    auto claim = [&](const std::vector<std::string>& ids, const char* role) {
        for (const auto& u : ids) {
            if (!known.contains(u)) throw Error(Errc::EmptySplit, std::string(role) + " user " + u + " has no events");
            if (!seen.insert(u).second) {
                throw Error(Errc::EmptySplit, "user " + u + " assigned to more than one split (overlap in " + role + ")");
            }
        }
    };
    claim(f.validation, "validation");
    claim(f.test, "test");
    if (!a.train_users.empty()) {
        f.train = split_list(a.train_users);
        claim(f.train, "train");
    } else {
        for (const auto& u : users) {
            if (!seen.contains(u)) f.train.push_back(u);
        }
    }
    if (f.train.empty()) throw Error(Errc::EmptySplit, "training split is empty");
    if (f.validation.empty()) throw Error(Errc::EmptySplit, "validation split is empty");
    return f;
}

void write_history_csv(const fs::path& path, const fusion::TrainHistory& h) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    out << "epoch,train_loss_rad,val_loss_rad,lr,best\n" << std::setprecision(17);
    for (const auto& e : h.epochs) {
        out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << ','
            << (e.epoch == h.best_epoch ? 1 : 0) << '\n';
    }
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = build_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common.seed);
    const fs::path history_path = a.history.empty() ? fs::path(a.out + ".history.csv") : fs::path(a.history);

    fusion::Checkpoint prior;
    json split_json, filter_json;
    if (a.resume) {
        prior = fusion::load_checkpoint(a.out);
        split_json = prior.metrics.at("split");
        filter_json = prior.metrics.at("filter");
    }

    const Dataset data = load_corpus(a.corpus);
    const std::string ref_type = a.resume ? filter_json.at("ref_type").get<std::string>() : a.ref_type;
    const int pose = a.resume ? filter_json.at("pose").get<int>() : a.pose;
    const std::string subset = a.resume ? filter_json.at("subset").get<std::string>() : a.subset;
    const auto samples = filter_samples(data.samples, ref_type, pose);
    if (samples.empty()) throw Error(Errc::EmptyFilter, "no events match the requested filter");

    Fold fold;
    if (a.resume) {
        fold.train = split_json.at("train").get<std::vector<std::string>>();
        fold.validation = split_json.at("validation").get<std::vector<std::string>>();
        fold.test = split_json.at("test").get<std::vector<std::string>>();
    } else {
        std::set<std::string> ids;
        for (const auto& s : samples) ids.insert(s.meta.user_id);
        const std::vector<std::string> users(ids.begin(), ids.end());
        if (!a.val_users.empty() || !a.train_users.empty() || !a.test_users.empty()) {
            fold = explicit_fold(users, a);
        } else {
            const SplitPlan plan = make_kfold_splits(users, cfg.at("eval.folds").get<int>(), seed);
            if (a.fold < 0 || a.fold >= plan.k) throw Error(Errc::InvalidArgument, "fold index out of range");
            fold = plan.folds[static_cast<std::size_t>(a.fold)];
        }
    }
    const auto tr = of_users(samples, fold.train);
    const auto va = of_users(samples, fold.validation);
    assert_no_leak(fold, tr);

    fusion::NetworkConfig net = network_config(cfg);
    net.branches = fusion::branch_mask_for(subset);
    fusion::TrainConfig tc = train_config(cfg, seed);
    fusion::TrainResult resume_from;
    if (a.resume) {
        net = prior.model.net;
        const int epochs = tc.epochs;
        tc = prior.train;
        tc.epochs = epochs;
        resume_from = prior.as_resume();
        if (tc.epochs <= resume_from.state.epochs_done) {
            throw Error(Errc::InvalidArgument, "checkpoint already has " + std::to_string(resume_from.state.epochs_done) +
                                                   " epochs; raise train.epochs to continue");
        }
        err << "resuming after epoch " << resume_from.state.epochs_done << '\n';
    }

    err << "training " << subset << " on " << tr.size() << " events (" << fold.train.size() << " users), validating on "
        << va.size() << " (" << fold.validation.size() << " users)\n";
    const auto log = [&](const fusion::EpochRecord& r) {
        err << "epoch " << r.epoch << "  train " << std::fixed << std::setprecision(3) << rad_to_deg(r.train_loss)
            << " deg  val " << rad_to_deg(r.val_loss) << " deg  lr " << std::defaultfloat << r.lr << '\n';
    };
    const fusion::TrainResult r = fusion::train(tr, va, net, tc, a.resume ? &resume_from : nullptr, log);

    fusion::Checkpoint ckpt;
    ckpt.model = r.model;
    ckpt.train = tc;
    ckpt.history = r.history;
    ckpt.state = r.state;
    ckpt.metrics = {
        {"split", {{"train", fold.train}, {"validation", fold.validation}, {"test", fold.test}}},
        {"filter", {{"ref_type", ref_type}, {"pose", pose}, {"subset", subset}}},
        {"best_val_mad_deg", rad_to_deg(r.state.best_val)},
        {"n_train", tr.size()},
        {"n_val", va.size()},
    };
    fusion::save_checkpoint(a.out, ckpt);
    write_history_csv(history_path, r.history);
    out << "best epoch " << r.history.best_epoch << " of " << r.history.epochs.size() << ", validation MAD "
        << std::fixed << std::setprecision(2) << rad_to_deg(r.state.best_val) << " deg; wrote " << a.out << " and "
        << history_path.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    Common common;
    std::string corpus;
    std::string checkpoint;
    bool ablation = false;
    bool per_user = false;
    std::string subsets = "head,gaze,finger,fusion";
    std::string poses;
    std::string ref_types = "volume,point";
    std::string users;
    std::string out_prefix;
};

EvalReport evaluate_checkpoint(const Dataset& data, const fusion::Checkpoint& ckpt, const EvalArgs& a,
                               MatchMode mode) {
    const json filter = ckpt.metrics.value("filter", json::object());
    const std::string ref_type = filter.value("ref_type", std::string("all"));
    const int pose_filter = filter.value("pose", 0);
    std::vector<std::string> users = split_list(a.users);
    if (users.empty() && ckpt.metrics.contains("split")) {
        users = ckpt.metrics.at("split").at("test").get<std::vector<std::string>>();
    }
    auto samples = filter_samples(data.samples, ref_type, pose_filter);
    if (!users.empty()) samples = of_users(samples, users);
    if (samples.empty()) throw Error(Errc::EmptyFilter, "no held-out events to evaluate");

    const auto preds = predict_and_match(ckpt.model, samples, data.scenario, mode);
    EvalReport rep;
    const std::string modality = fusion::subset_name(ckpt.model.net.branches);
    for (RefType rt : {RefType::Volume, RefType::Point}) {
        std::map<int, std::pair<std::vector<Prediction>, std::vector<SampleTensor>>> by_pose;
        std::vector<Prediction> all_p;
        std::vector<SampleTensor> all_s;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].meta.ref_type != rt) continue;
            by_pose[samples[i].meta.pose_id].first.push_back(preds[i]);
            by_pose[samples[i].meta.pose_id].second.push_back(samples[i]);
            all_p.push_back(preds[i]);
            all_s.push_back(samples[i]);
        }
        auto add = [&](const std::string& pose, const std::vector<Prediction>& p, const std::vector<SampleTensor>& s) {
            const Metrics m = compute_metrics(p, s);
            rep.rows.push_back({rt, pose, modality, m.n, m.acc, m.top2, m.mad_deg, m.stdad_deg});
        };
        for (const auto& [pose, ps] : by_pose) add(std::to_string(pose), ps.first, ps.second);
        if (!all_s.empty()) add("all", all_p, all_s);
    }
    return rep;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig cfg = build_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common.seed);
    if (a.checkpoint.empty() == !a.ablation) {
        throw Error(Errc::InvalidArgument, "eval needs exactly one of --checkpoint or --ablation");
    }
    const ExperimentConfig ec = experiment_config(cfg, seed);
    std::optional<fusion::Checkpoint> ckpt;
    if (!a.checkpoint.empty()) ckpt = fusion::load_checkpoint(a.checkpoint);
    const Dataset data = load_corpus(a.corpus);
    if (data.dropped > 0) err << "skipped " << data.dropped << " events without window coverage\n";

    EvalReport report;
    const auto progress = [&](const std::string& msg) { err << msg << '\n'; };
    if (ckpt) {
        report = evaluate_checkpoint(data, *ckpt, a, ec.match_mode);
    } else {
        AblationSpec spec;
        spec.subsets = split_list(a.subsets);
        spec.ref_types = ref_types_from(a.ref_types);
        spec.poses = int_list(a.poses);
        report = run_ablation(data, spec, ec, progress);
    }
    write_report_table(out, report);

    if (!a.out_prefix.empty()) {
        std::ofstream csv(a.out_prefix + ".csv");
        std::ofstream txt(a.out_prefix + ".txt");
        if (!csv || !txt) throw Error(Errc::IoError, "cannot write report files with prefix " + a.out_prefix);
        write_report_csv(csv, report);
        write_report_table(txt, report);
    }
    if (a.per_user) {
        UserReport users;
        for (RefType rt : ref_types_from(a.ref_types)) {
            const bool any = std::any_of(data.samples.begin(), data.samples.end(),
                                         [&](const SampleTensor& s) { return s.meta.ref_type == rt; });
            if (!any) continue;
            UserReport part = per_user_report(data, rt, ec, int_list(a.poses), progress);
            users.users.insert(users.users.end(), part.users.begin(), part.users.end());
            users.fits.insert(users.fits.end(), part.fits.begin(), part.fits.end());
        }
        if (a.out_prefix.empty()) {
            write_user_csv(out, users);
        } else {
            std::ofstream ucsv(a.out_prefix + ".users.csv");
            if (!ucsv) throw Error(Errc::IoError, "cannot write " + a.out_prefix + ".users.csv");
            write_user_csv(ucsv, users);
        }
    }
    return kOk;
}

// ---------------------------------------------------------------- match / transform

struct MatchArgs {
    std::string vector;
    std::string scenario;
    int pose = 0;
    std::string mode = "algorithm1";
};

int cmd_match(const MatchArgs& a, std::ostream& out) {
    const Vec3 v = parse_vector(a.vector);
    const Scenario s = scenario_or_default(a.scenario);
    const CarPose& pose = s.pose(a.pose);
    const MatchResult m = match_roi(v, RoiMap::from_scenario(s), pose.ecef_to_car, match_mode_from(a.mode));
    json scores = json::array();
    for (const auto& sc : m.scores) {
        scores.push_back({{"id", sc.id}, {"distance", sc.distance}, {"centroid_angle_deg", rad_to_deg(sc.centroid_angle)}});
    }
    const json j = {{"pose", a.pose}, {"roi", m.roi_id}, {"ranking", m.ranking}, {"scores", scores}};
    out << j.dump(2) << '\n';
    return kOk;
}

struct TransformArgs {
    double lat = 0, lon = 0, alt = 0;
    std::string scenario;
    int pose = 0;
};

int cmd_transform(const TransformArgs& a, std::ostream& out) {
    const GeodeticPoint g = GeodeticPoint::from_degrees(a.lat, a.lon, a.alt);
    if (!g.is_valid()) throw Error(Errc::InvalidArgument, "latitude must lie in [-90, 90] and longitude in [-180, 180]");
    json j;
    if (a.pose != 0) {
        const Scenario s = scenario_or_default(a.scenario);
        const EcefPoint e = wgs84_to_ecef(g, s.ellipsoid);
        const CarVector c = ecef_to_car(e, s.pose(a.pose).ecef_to_car);
        j["ecef"] = {e.x, e.y, e.z};
        j["car"] = {c.x, c.y, c.z};
        j["pose"] = a.pose;
    } else {
        const EcefPoint e = wgs84_to_ecef(g);
        j["ecef"] = {e.x, e.y, e.z};
    }
    out << std::setprecision(15) << j.dump(2) << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multimodal driver referencing: synthetic corpora, fusion training, evaluation and ROI matching",
                 "refpoint"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a synthetic corpus");
    add_common(g, gen.common);
    g->add_option("--out", gen.out_dir, "Output directory (created; its parent must exist)")->required();
    g->add_option("--scenario", gen.scenario, "Scenario JSON (default: built-in four-pose site)");
    g->add_option("--users", gen.users, "Number of users")->check(CLI::PositiveNumber);
    g->add_option("--events", gen.events, "Events per user")->check(CLI::PositiveNumber);
    g->add_option("--ref-types", gen.ref_types, "Comma list of volume,point");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train one model on a user split");
    add_common(t, tr.common);
    t->add_option("--corpus", tr.corpus, "Corpus directory")->required();
    t->add_option("--out", tr.out, "Checkpoint path")->required();
    t->add_option("--history", tr.history, "History CSV (default: <out>.history.csv)");
    t->add_option("--subset", tr.subset, "fusion, head, gaze or finger");
    t->add_option("--pose", tr.pose, "Restrict to one car pose (0: all)");
    t->add_option("--ref-type", tr.ref_type, "volume, point or all");
    t->add_option("--fold", tr.fold, "Fold of the seeded k-fold plan to train on");
    t->add_option("--train-users", tr.train_users, "Explicit comma list of training users");
    t->add_option("--val-users", tr.val_users, "Explicit comma list of validation users");
    t->add_option("--test-users", tr.test_users, "Explicit comma list of held-out test users");
    t->add_flag("--resume", tr.resume, "Continue from the Adam state stored in --out");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint or run the ablation protocol");
    add_common(e, ev.common);
    e->add_option("--corpus", ev.corpus, "Corpus directory")->required();
    e->add_option("--checkpoint", ev.checkpoint, "Evaluate this checkpoint on its held-out users");
    e->add_flag("--ablation", ev.ablation, "Cross-validated ablation over subsets and poses");
    e->add_flag("--per-user", ev.per_user, "Also run the leave-one-user-out per-user report");
    e->add_option("--subsets", ev.subsets, "Comma list of head,gaze,finger,fusion");
    e->add_option("--poses", ev.poses, "Comma list of pose ids (default: all with events)");
    e->add_option("--ref-types", ev.ref_types, "Comma list of volume,point");
    e->add_option("--users", ev.users, "Users to evaluate a checkpoint on (default: its test split)");
    e->add_option("--out", ev.out_prefix, "Write <prefix>.csv, <prefix>.txt (and <prefix>.users.csv)");

    MatchArgs ma;
    auto* m = app.add_subcommand("match", "Match a car-frame direction to the scenario ROIs");
    m->add_option("--vector", ma.vector, "x,y,z in the car frame (use --vector=-1,0,0 for a leading minus)")->required();
    m->add_option("--pose", ma.pose, "Car pose id")->required();
    m->add_option("--scenario", ma.scenario, "Scenario JSON (default: built-in)");
    m->add_option("--mode", ma.mode, "algorithm1 or raybox");

    TransformArgs tf;
    auto* x = app.add_subcommand("transform", "Geodetic to ECEF (and optionally car frame) conversion");
    x->add_option("--lat", tf.lat, "Latitude, degrees")->required();
    x->add_option("--lon", tf.lon, "Longitude, degrees")->required();
    x->add_option("--alt", tf.alt, "Ellipsoidal height, meters");
    x->add_option("--pose", tf.pose, "Also express the point in this pose's car frame");
    x->add_option("--scenario", tf.scenario, "Scenario JSON (default: built-in)");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    if (!argv_rev.empty()) argv_rev.pop_back();  // program name
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& pe) {
        err << "usage error: " << pe.what() << "\n" << app.help();
        return kUsage;
    }

    try {
        if (g->parsed()) return cmd_gen(gen, out, err);
        if (t->parsed()) return cmd_train(tr, out, err);
        if (e->parsed()) return cmd_eval(ev, out, err);
        if (m->parsed()) return cmd_match(ma, out);
        if (x->parsed()) return cmd_transform(tf, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_code_for(ex.code());
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace refpoint::cli
