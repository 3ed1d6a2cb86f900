#include "refpoint/fusion/checkpoint.hpp"

#include "refpoint/error.hpp"
#include "refpoint/fusion/layout.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace refpoint::fusion {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "REFPOINT-CKPT 1";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::uint32_t crc_of(const std::string& bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
    std::size_t left = bytes.size();
    while (left > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::string hex32(std::uint32_t v) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

json history_to_json(const TrainHistory& h) {
    json rows = json::array();
    for (const auto& e : h.epochs) rows.push_back({e.epoch, e.train_loss, e.val_loss, e.lr});
    return {{"best_epoch", h.best_epoch}, {"epochs", rows}};
}

TrainHistory history_from_json(const json& j) {
    TrainHistory h;
    h.best_epoch = j.at("best_epoch").get<int>();
    for (const auto& r : j.at("epochs")) {
        h.epochs.push_back({r.at(0).get<int>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()});
    }
    return h;
}

}  // namespace

json network_config_to_json(const NetworkConfig& c) {
    return {{"frames", c.frames},
            {"features_per_branch", c.features_per_branch},
            {"dims", c.dims},
            {"feature_maps", c.feature_maps},
            {"branch_layers", c.branch_layers},
            {"joint_layers", c.joint_layers},
            {"joint_kernel", c.joint_kernel},
            {"output_dim", c.output_dim},
            {"branches", {c.branches[0], c.branches[1], c.branches[2]}}};
}

NetworkConfig network_config_from_json(const json& j) {
    NetworkConfig c;
    c.frames = j.value("frames", c.frames);
    c.features_per_branch = j.value("features_per_branch", c.features_per_branch);
    c.dims = j.value("dims", c.dims);
    c.feature_maps = j.value("feature_maps", c.feature_maps);
    c.branch_layers = j.value("branch_layers", c.branch_layers);
    c.joint_layers = j.value("joint_layers", c.joint_layers);
    c.joint_kernel = j.value("joint_kernel", c.joint_kernel);
    c.output_dim = j.value("output_dim", c.output_dim);
    if (j.contains("branches")) {
        const auto& b = j.at("branches");
        if (!b.is_array() || b.size() != 3) throw Error(Errc::FormatError, "branches needs 3 booleans");
        for (std::size_t i = 0; i < 3; ++i) c.branches[i] = b[i].get<bool>();
    }
    return c;
}

json train_config_to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"plateau_patience", c.plateau_patience},
            {"plateau_factor", c.plateau_factor},
            {"seed", c.seed},
            {"validation_fraction", c.validation_fraction}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
    c.seed = j.value("seed", c.seed);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    return c;
}

TrainResult Checkpoint::as_resume() const {
    if (!state) throw Error(Errc::FormatError, "checkpoint carries no training state to resume from");
    return {model, history, *state};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const ParamLayout layout(ckpt.model.net);
    if (ckpt.model.params.size() != layout.total()) throw Error(Errc::ShapeMismatch, "model parameters do not match config");

    std::string blob;
    json blobs = json::array();
    auto append = [&](const std::string& name, const std::vector<int>& shape, const float* data, std::size_t n) {
        blobs.push_back({{"name", name}, {"shape", shape}, {"offset", blob.size()}, {"count", n}});
        blob.append(reinterpret_cast<const char*>(data), n * sizeof(float));
    };
    for (const auto& t : layout.tensors()) append(t.name, t.shape, ckpt.model.params.data() + t.offset, t.size);

    json header;
    header["config"] = network_config_to_json(ckpt.model.net);
    header["train"] = train_config_to_json(ckpt.train);
    header["seed"] = ckpt.model.seed;
    header["best_epoch"] = ckpt.history.best_epoch;
    header["history"] = history_to_json(ckpt.history);
    header["metrics"] = ckpt.metrics;
    header["normalizer"] = {{"mean", ckpt.model.norm.mean}, {"sd", ckpt.model.norm.sd}};
    if (ckpt.state) {
        const TrainState& s = *ckpt.state;
        const int n = static_cast<int>(layout.total());
        if (s.params.size() != layout.total() || s.adam.m.size() != layout.total() || s.adam.v.size() != layout.total()) {
            throw Error(Errc::ShapeMismatch, "training state does not match config");
        }
        append("state.params", {n}, s.params.data(), s.params.size());
        append("state.adam_m", {n}, s.adam.m.data(), s.adam.m.size());
        append("state.adam_v", {n}, s.adam.v.data(), s.adam.v.size());
        header["state"] = {{"epochs_done", s.epochs_done}, {"step", s.adam.step}, {"lr", s.lr},
                           {"wait", s.wait},               {"best_val", s.best_val}};
    }
    header["blobs"] = blobs;
    header["blob_bytes"] = blob.size();
    header["checksum"] = hex32(crc_of(blob));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write checkpoint " + path.string());
    out << kMagic << '\n' << header.dump() << '\n';
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Error(Errc::IoError, "short write to checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open checkpoint " + path.string());
    std::string magic, header_line;
    if (!std::getline(in, magic) || magic != kMagic) throw Error(Errc::FormatError, path.string() + ": not a checkpoint file");
    if (!std::getline(in, header_line)) throw Error(Errc::FormatError, path.string() + ": missing header");
    std::ostringstream rest;
    rest << in.rdbuf();
    const std::string blob = rest.str();

    Checkpoint c;
    try {
        const json h = json::parse(header_line);
        if (blob.size() != h.at("blob_bytes").get<std::size_t>()) {
            throw Error(Errc::FormatError, path.string() + ": blob section truncated or padded");
        }
        const std::string expected = h.at("checksum").get<std::string>();
        const std::string actual = hex32(crc_of(blob));
        if (expected != actual) {
            throw Error(Errc::FormatError,
                        path.string() + ": checksum mismatch (header " + expected + ", data " + actual + ")");
        }
        c.model.net = network_config_from_json(h.at("config"));
        c.model.net.validate();
        c.train = train_config_from_json(h.value("train", json::object()));
        c.model.seed = h.at("seed").get<std::uint64_t>();
        c.history = history_from_json(h.at("history"));
        c.metrics = h.value("metrics", json::object());
        c.model.norm.mean = h.at("normalizer").at("mean").get<std::array<double, 9>>();
        c.model.norm.sd = h.at("normalizer").at("sd").get<std::array<double, 9>>();

        auto read_blob = [&](const json& entry, float* dst, std::size_t expect) {
            const auto off = entry.at("offset").get<std::size_t>();
            const auto count = entry.at("count").get<std::size_t>();
            if (count != expect || off + count * sizeof(float) > blob.size()) {
                throw Error(Errc::FormatError, path.string() + ": blob " + entry.at("name").get<std::string>() + " has wrong size");
            }
            std::memcpy(dst, blob.data() + off, count * sizeof(float));
        };
        const ParamLayout layout(c.model.net);
        const auto& blobs = h.at("blobs");
        c.model.params.resize(layout.total());
        std::size_t bi = 0;
        for (const auto& t : layout.tensors()) {
            if (bi >= blobs.size() || blobs[bi].at("name") != t.name) {
                throw Error(Errc::FormatError, path.string() + ": expected blob " + t.name);
            }
            read_blob(blobs[bi++], c.model.params.data() + t.offset, t.size);
        }
        if (h.contains("state")) {
            const json& s = h.at("state");
            TrainState st;
            st.params.resize(layout.total());
            st.adam.m.resize(layout.total());
            st.adam.v.resize(layout.total());
            if (blobs.size() != bi + 3) throw Error(Errc::FormatError, path.string() + ": state blobs missing");
            read_blob(blobs[bi], st.params.data(), layout.total());
            read_blob(blobs[bi + 1], st.adam.m.data(), layout.total());
            read_blob(blobs[bi + 2], st.adam.v.data(), layout.total());
            st.epochs_done = s.at("epochs_done").get<int>();
            st.adam.step = s.at("step").get<std::int64_t>();
            st.lr = s.at("lr").get<double>();
            st.wait = s.at("wait").get<int>();
            st.best_val = s.at("best_val").get<double>();
            c.state = std::move(st);
        }
    } catch (const json::exception& e) {
        throw Error(Errc::FormatError, path.string() + ": malformed header: " + e.what());
    }
    return c;
}

}  // namespace refpoint::fusion
