#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include "refpoint/error.hpp"
#include "refpoint/fusion/adam.hpp"
#include "refpoint/fusion/checkpoint.hpp"
#include "refpoint/fusion/config.hpp"
#include "refpoint/fusion/dataset.hpp"
#include "refpoint/fusion/kernels.hpp"
#include "refpoint/fusion/layout.hpp"
#include "refpoint/fusion/loss.hpp"
#include "refpoint/fusion/network.hpp"
#include "refpoint/fusion/trainer.hpp"
#include "refpoint/reference/naive_net.hpp"

#include <doctest.h>
#include <omp.h>

#include <filesystem>
#include <fstream>
#include <numbers>

using namespace refpoint;
using namespace refpoint::fusion;
namespace fs = std::filesystem;

namespace {

NetworkConfig small_net(int maps = 8) {
    NetworkConfig c;
    c.feature_maps = maps;
    return c;
}

TrainConfig quick_train(int epochs) {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = 8;
    t.seed = 5;
    return t;
}

double max_rel_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::fabs(a[i] - b[i]));
        scale = std::max(scale, std::fabs(b[i]));
    }
    return worst / std::max(scale, 1e-300);
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("network configuration defaults") {
    const NetworkConfig c;
    CHECK(c.frames == 36);
    CHECK(c.features_per_branch == 2);
    CHECK(c.feature_maps == 128);
    CHECK(c.branch_layers == 2);
    CHECK(c.joint_layers == 2);
    CHECK(c.joint_kernel == 2);
    CHECK(c.active_branch_count() == 3);
    const TrainConfig t;
    CHECK(t.epochs == 50);
    CHECK(t.batch_size == 32);
    CHECK(t.lr == 1e-3);
    NetworkConfig bad;
    bad.branches = {false, false, false};
    CHECK_THROWS_AS(bad.validate(), Error);
    TrainConfig tb;
    tb.lr = 0;
    CHECK_THROWS_AS(tb.validate(), Error);
    CHECK(branch_mask_for("gaze") == std::array<bool, 3>{false, true, false});
    CHECK(branch_mask_for("finger") == std::array<bool, 3>{true, false, false});
    CHECK(subset_name(branch_mask_for("head")) == "head");
    CHECK_THROWS_AS(branch_mask_for("nose"), Error);
}

TEST_CASE("parameter layout matches a hand count") {
    const NetworkConfig c;
    const ParamLayout l(c);
    const std::size_t m = 128, d = 3;
    const std::size_t branch = (d * m + m) + (m * m + m);
    const std::size_t joint = (2 * 2 * 3 * m * m + m) + (2 * 2 * m * m + m);
    const std::size_t dense = 36 * 2 * m * 3 + 3;
    CHECK(l.total() == 3 * branch + joint + dense);
    CHECK(l.tensors().size() == 3 * 4 + 4 + 2);
    CHECK(l.find("dense.kernel").shape == std::vector<int>{36 * 2 * 128, 3});
    CHECK(l.find("joint.conv0.kernel").shape == std::vector<int>{2, 2, 384, 128});
    CHECK(l.find("finger.conv0.kernel").shape == std::vector<int>{1, 1, 3, 128});
    CHECK_THROWS_AS(l.find("nope"), Error);

    const ParamLayout single(NetworkConfig::with_branches(branch_mask_for("gaze")));
    CHECK(single.total() == branch + (2 * 2 * m * m + m) + (2 * 2 * m * m + m) + dense);
    std::size_t offset = 0;
    for (const auto& t : l.tensors()) {
        CHECK(t.offset == offset);
        offset += t.size;
    }
}

TEST_CASE("initialisation") {
    const ParamLayout l(NetworkConfig{});
    const auto a = init_params<double>(l, 7);
    const auto b = init_params<double>(l, 7);
    CHECK(a == b);
    CHECK(a != init_params<double>(l, 8));
    for (const auto& t : l.tensors()) {
        double s = 0, ss = 0;
        for (std::size_t i = 0; i < t.size; ++i) {
            s += a[t.offset + i];
            ss += a[t.offset + i] * a[t.offset + i];
        }
        if (t.kind == ParamKind::Bias) {
            CHECK(ss == 0.0);
        } else if (t.kind == ParamKind::ConvKernel) {
            const double var = ss / static_cast<double>(t.size) - std::pow(s / static_cast<double>(t.size), 2);
            CHECK(var == doctest::Approx(2.0 / t.fan_in).epsilon(0.2));
        } else {
            const double var = ss / static_cast<double>(t.size);
            CHECK(var == doctest::Approx(2.0 / (t.fan_in + t.fan_out)).epsilon(0.2));
        }
    }
}

TEST_CASE("GEMM kernels against triple loops") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (auto [m, n, k] : {std::array<std::size_t, 3>{1, 1, 1}, {7, 5, 3}, {130, 65, 33}, {64, 3, 200}}) {
        std::vector<double> a(m * k), b(k * n), at(k * m), bt(n * k);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
        std::vector<double> ref(m * n, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t p = 0; p < k; ++p) ref[i * n + j] += a[i * k + p] * b[p * n + j];
        std::vector<double> c1(m * n, 1.0), c2(m * n, 1.0), c3(m * n, 1.0);
        kernels::gemm_nn(m, n, k, a.data(), b.data(), c1.data(), false);
        kernels::gemm_tn(m, n, k, at.data(), b.data(), c2.data(), false);
        kernels::gemm_nt(m, n, k, a.data(), bt.data(), c3.data(), false);
        CHECK(max_rel_diff(c1, ref) < 1e-13);
        CHECK(max_rel_diff(c2, ref) < 1e-13);
        CHECK(max_rel_diff(c3, ref) < 1e-13);
        kernels::gemm_nn(m, n, k, a.data(), b.data(), c1.data(), true);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c1[i] == doctest::Approx(2 * ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("im2col and col2im are adjoint") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    const std::size_t batch = 3;
    const int h = 6, w = 2, c = 4, k = 2, pad = 0;
    std::vector<double> x(batch * h * w * c), y(batch * h * w * k * k * c), col(y.size()), back(x.size(), 0.0);
    for (auto& v : x) v = g(rng);
    for (auto& v : y) v = g(rng);
    kernels::im2col(batch, h, w, c, k, pad, x.data(), col.data());
    kernels::col2im(batch, h, w, c, k, pad, y.data(), back.data(), false);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += col[i] * y[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("forward pass trivia") {
    const NetworkConfig c = small_net();
    FusionNet<double> net(c);
    Workspace<double> ws;
    SUBCASE("zero parameters give zero output") {
        const std::vector<double> p(net.num_params(), 0.0);
        const auto x = fixtures::random_input<double>(4, 648, 1);
        net.forward(p, x, 4, ws);
        for (double v : ws.output) CHECK(v == 0.0);
    }
    SUBCASE("identical rows give identical outputs, permutation is equivariant") {
        const auto p = init_params<double>(net.layout(), 3);
        auto one = fixtures::random_input<double>(1, 648, 2);
        std::vector<double> x;
        for (int i = 0; i < 5; ++i) x.insert(x.end(), one.begin(), one.end());
        net.forward(p, x, 5, ws);
        for (std::size_t i = 1; i < 5; ++i)
            for (std::size_t j = 0; j < 3; ++j) CHECK(ws.output[i * 3 + j] == ws.output[j]);

        const auto r = fixtures::random_input<double>(3, 648, 4);
        net.forward(p, r, 3, ws);
        const auto out = ws.output;
        std::vector<double> swapped(r.begin() + 648 * 2, r.end());
        swapped.insert(swapped.end(), r.begin() + 648, r.begin() + 648 * 2);
        swapped.insert(swapped.end(), r.begin(), r.begin() + 648);
        net.forward(p, swapped, 3, ws);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(ws.output[j] == out[6 + j]);
            CHECK(ws.output[3 + j] == out[3 + j]);
            CHECK(ws.output[6 + j] == out[j]);
        }
    }
    SUBCASE("shape mismatch") {
        const auto p = init_params<double>(net.layout(), 3);
        const auto x = fixtures::random_input<double>(2, 648, 2);
        CHECK_THROWS_AS(net.forward(p, x, 3, ws), Error);
    }
}

TEST_CASE("optimized network agrees with the serial reference") {
    for (const char* subset : {"fusion", "gaze", "head", "finger"}) {
        NetworkConfig c = NetworkConfig::with_branches(branch_mask_for(subset));
        FusionNet<double> net(c);
        const auto p = init_params<double>(net.layout(), 11);
        const std::size_t batch = 3;
        const auto x = fixtures::random_input<double>(batch, 648, 12);
        const auto d_out = fixtures::random_input<double>(batch, 3, 13);
        Workspace<double> ws;
        net.forward(p, x, batch, ws);
        const auto ref_out = reference::naive_forward<double>(c, p, x, batch);
        CHECK(max_rel_diff(ws.output, ref_out) < 1e-12);
        std::vector<double> grad(net.num_params());
        net.backward(p, d_out, ws, grad);
        const auto ref_grad = reference::naive_backward<double>(c, p, x, batch, d_out);
        CHECK(max_rel_diff(grad, ref_grad) < 1e-11);
    }
    SUBCASE("float precision") {
        const NetworkConfig c;
        FusionNet<float> net(c);
        const auto p = init_params<float>(net.layout(), 11);
        const auto x = fixtures::random_input<float>(2, 648, 12);
        Workspace<float> ws;
        net.forward(p, x, 2, ws);
        const auto ref_out = reference::naive_forward<float>(c, p, x, 2);
        for (std::size_t i = 0; i < ref_out.size(); ++i) CHECK(ws.output[i] == doctest::Approx(ref_out[i]).epsilon(1e-4));
    }
}

TEST_CASE("results do not depend on the thread count") {
    const NetworkConfig c = small_net(32);
    FusionNet<float> net(c);
    const auto p = init_params<float>(net.layout(), 3);
    const auto x = fixtures::random_input<float>(9, 648, 4);
    const auto d = fixtures::random_input<float>(9, 3, 5);
    auto run = [&](int threads) {
        omp_set_num_threads(threads);
        Workspace<float> ws;
        net.forward(p, x, 9, ws);
        std::vector<float> g(net.num_params());
        net.backward(p, d, ws, g);
        std::vector<float> all = ws.output;
        all.insert(all.end(), g.begin(), g.end());
        return all;
    };
    const int before = omp_get_max_threads();
    const auto one = run(1);
    const auto four = run(4);
    omp_set_num_threads(before);
    CHECK(one == four);
}

TEST_CASE("finite-difference gradients, every entry of a small network") {
    for (const char* subset : {"fusion", "finger"}) {
        NetworkConfig c = small_net(4);
        c.branches = branch_mask_for(subset);
        for (const auto& t : gradcheck::check(c, 2, 0, 21)) {
            INFO(subset << " " << t.name);
            CHECK(t.rel < 1e-4);
        }
    }
}

TEST_CASE("finite-difference gradients, sampled entries at full width") {
    for (const auto& t : gradcheck::check(NetworkConfig{}, 2, 6, 22)) {
        INFO(t.name);
        CHECK(t.rel < 1e-4);
    }
}

TEST_CASE("mean angular loss") {
    const std::vector<double> y{1, 0, 0, 0, 1, 0};
    SUBCASE("anchors") {
        CHECK(mad_loss<double>(y, y) == 0.0);
        const std::vector<double> perp{0, 1, 0, 0, 0, 1};
        CHECK(mad_loss<double>(perp, y) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
        const std::vector<double> twice{2, 0, 0, 0, 2, 0};
        CHECK(mad_loss<double>(twice, y) == 0.0);
        const std::vector<double> opposite{-1, 0, 0, 0, -3, 0};
        CHECK(mad_loss<double>(opposite, y) == doctest::Approx(std::numbers::pi));
    }
    SUBCASE("errors") {
        const std::vector<double> zero{0, 0, 0, 1, 0, 0};
        try {
            (void)mad_loss<double>(zero, y);
            FAIL("expected ZeroPrediction");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::ZeroPrediction);
        }
        CHECK_THROWS_AS(mad_loss<double>(y, zero), Error);
        const std::vector<double> short_pred{1, 0, 0};
        CHECK_THROWS_AS(mad_loss<double>(short_pred, y), Error);
    }
    SUBCASE("scalar oracle, scale invariance and gradient") {
        std::mt19937_64 rng(4);
        std::uniform_int_distribution<int> nrows(1, 40);
        std::uniform_real_distribution<double> alpha(1e-3, 1e3);
        for (int batch = 0; batch < 100; ++batch) {
            const auto n = static_cast<std::size_t>(nrows(rng));
            const auto p = fixtures::random_input<double>(n, 3, rng());
            const auto t = fixtures::random_input<double>(n, 3, rng());
            std::vector<oracle::V3> po(n), to(n);
            for (std::size_t i = 0; i < n; ++i) {
                po[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
                to[i] = {t[3 * i], t[3 * i + 1], t[3 * i + 2]};
            }
            std::vector<double> grad(3 * n);
            const double l = mad_loss<double>(p, t, grad);
            CHECK(l == doctest::Approx(oracle::mad(po, to)).epsilon(1e-10));
            CHECK(l >= 0.0);
            const double a = alpha(rng);
            std::vector<double> scaled(p);
            for (auto& v : scaled) v *= a;
            CHECK(mad_loss<double>(scaled, t) == doctest::Approx(l).epsilon(1e-12));
            // d theta / d p = -(t_hat - cos p_hat) / (|p| sin theta), averaged over rows
            for (std::size_t i = 0; i < n; ++i) {
                const auto ph = oracle::unit(po[i]);
                const auto th = oracle::unit(to[i]);
                const double c = oracle::dot(ph, th);
                const double sn = std::sqrt(1 - c * c);
                for (int j = 0; j < 3; ++j) {
                    const double expect = -(th[j] - c * ph[j]) / (oracle::norm(po[i]) * sn) / static_cast<double>(n);
                    CHECK(grad[3 * i + j] == doctest::Approx(expect).epsilon(1e-8));
                }
            }
        }
    }
    SUBCASE("gradient stays finite at exact alignment") {
        std::vector<double> g(6);
        (void)mad_loss<double>(y, y, g);
        for (double v : g) CHECK(std::isfinite(v));
    }
}

TEST_CASE("Adam update against a hand computation") {
    std::vector<float> p{1.0f, -2.0f, 0.5f};
    const std::vector<float> g{0.1f, -0.3f, 0.0f};
    AdamState s;
    s.reset(3);
    adam_step(p, g, s, 0.01, 0.9, 0.999, 1e-8);
    // first step: m_hat = g, v_hat = g^2, so the move is lr * g / (|g| + eps)
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.1 / (0.1 + 1e-8)).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-6));
    CHECK(p[2] == 0.5f);
    CHECK(s.step == 1);
    // second step with the same gradient, from the recurrences
    adam_step(p, g, s, 0.01, 0.9, 0.999, 1e-8);
    const double m = 0.9 * 0.01 + 0.1 * 0.1, v = 0.999 * 0.001 * 0.01 + 0.001 * 0.01;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.1 / (0.1 + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-6));
}

TEST_CASE("position normalizer") {
    auto samples = fixtures::noiseless_samples(12, 3);
    const Normalizer n = Normalizer::fit(samples);
    std::vector<double> row(648);
    double sum = 0, sq = 0;
    for (const auto& s : samples) {
        n.apply(s, row.data());
        for (int t = 0; t < 36; ++t) {
            sum += row[SampleTensor::index(t, 0, 0)];
            sq += row[SampleTensor::index(t, 0, 0)] * row[SampleTensor::index(t, 0, 0)];
            // directions pass through
            CHECK(row[SampleTensor::index(t, 1, 2)] == static_cast<double>(s.at(t, 1, 2)));
        }
    }
    const double cnt = 36.0 * static_cast<double>(samples.size());
    CHECK(std::fabs(sum / cnt) < 1e-9);
    CHECK(sq / cnt == doctest::Approx(1.0).epsilon(1e-9));

    auto absent = samples.front();
    absent.present[0] = false;
    for (int t = 0; t < 36; ++t)
        for (int f = 0; f < 2; ++f)
            for (int d = 0; d < 3; ++d) absent.at(t, f, d) = 0.0;
    n.apply(absent, row.data());
    for (int t = 0; t < 36; ++t) CHECK(row[SampleTensor::index(t, 0, 1)] == 0.0);
}

TEST_CASE("training is deterministic and resumes bit-exactly") {
    const auto data = fixtures::noiseless_samples(24, 9);
    const std::span<const SampleTensor> tr(data.data(), 16), va(data.data() + 16, 8);
    const NetworkConfig c = small_net(8);
    const auto a = train(tr, va, c, quick_train(6));
    const auto b = train(tr, va, c, quick_train(6));
    CHECK(a.history == b.history);
    CHECK(a.model.params == b.model.params);

    const auto first = train(tr, va, c, quick_train(3));
    CHECK(first.history.epochs.size() == 3);
    const auto rest = train(tr, va, c, quick_train(6), &first);
    CHECK(rest.history == a.history);
    CHECK(rest.state.params == a.state.params);
    CHECK(rest.model.params == a.model.params);

    const auto best = std::min_element(a.history.epochs.begin(), a.history.epochs.end(),
                                       [](const auto& x, const auto& y) { return x.val_loss < y.val_loss; });
    CHECK(a.history.best_epoch == best->epoch);
    CHECK(evaluate_loss(a.model, va) == doctest::Approx(best->val_loss).epsilon(1e-5));

    CHECK_THROWS_AS(train({}, va, c, quick_train(1)), Error);
    CHECK_THROWS_AS(train(tr, {}, c, quick_train(1)), Error);
}

TEST_CASE("learning rate halves only after a plateau") {
    const auto data = fixtures::noiseless_samples(24, 10);
    const std::span<const SampleTensor> tr(data.data(), 16), va(data.data() + 16, 8);
    TrainConfig t = quick_train(30);
    t.lr = 0.05;  // large enough to stall validation progress
    t.plateau_patience = 2;
    const auto r = train(tr, va, small_net(8), t);
    double lr = t.lr;
    double best = std::numeric_limits<double>::infinity();
    int wait = 0;
    for (const auto& e : r.history.epochs) {
        CHECK(e.lr == doctest::Approx(lr));
        if (e.val_loss < best) {
            best = e.val_loss;
            wait = 0;
        } else if (++wait >= t.plateau_patience) {
            lr *= t.plateau_factor;
            wait = 0;
        }
    }
}

TEST_CASE("checkpoint round trip and corruption") {
    const auto data = fixtures::noiseless_samples(12, 11);
    const std::span<const SampleTensor> tr(data.data(), 8), va(data.data() + 8, 4);
    const auto r = train(tr, va, small_net(8), quick_train(2));
    Checkpoint ck;
    ck.model = r.model;
    ck.train = quick_train(2);
    ck.history = r.history;
    ck.state = r.state;
    ck.metrics = {{"note", "test"}};
    const fs::path dir = fs::temp_directory_path() / "refpoint_test_ckpt";
    fs::create_directories(dir);
    const fs::path path = dir / "m.ckpt";
    save_checkpoint(path, ck);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.model.params == ck.model.params);
    CHECK(back.model.net == ck.model.net);
    CHECK(back.history == ck.history);
    CHECK(back.state->adam.m == ck.state->adam.m);
    CHECK(back.state->adam.step == ck.state->adam.step);
    CHECK(back.metrics.at("note") == "test");
    CHECK(back.model.predict(va)[0] == ck.model.predict(va)[0]);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-5, std::ios::end);
        f.put('\x7f');
    }
    try {
        (void)load_checkpoint(path);
        FAIL("expected FormatError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::FormatError);
        CHECK(std::string(e.what()).find("checksum") != std::string::npos);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), Error);
    fs::remove_all(dir);
}

TEST_CASE("overfit trend on noiseless data") {
    const auto data = fixtures::noiseless_samples(32, 12);
    TrainConfig t = quick_train(60);
    t.batch_size = 32;
    const auto r = train(data, data, small_net(16), t);
    double running = std::numeric_limits<double>::infinity();
    for (const auto& e : r.history.epochs) {
        if (e.epoch > 20) CHECK(e.train_loss <= 1.1 * running);
        running = std::min(running, e.train_loss);
    }
    CHECK(r.history.epochs.back().train_loss < r.history.epochs.front().train_loss / 3);
}

}
