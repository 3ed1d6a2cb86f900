#include "refpoint/fusion/loss.hpp"

#include "refpoint/error.hpp"

#include <algorithm>
#include <cmath>

namespace refpoint::fusion {

namespace {

struct RowTerms {
    double cos = 0.0;
    double pn = 0.0;
    double tn = 0.0;
};

template <typename T>
RowTerms row_terms(const T* p, const T* y) {
    double dot = 0.0, pp = 0.0, yy = 0.0;
    for (int j = 0; j < 3; ++j) {
        dot += static_cast<double>(p[j]) * static_cast<double>(y[j]);
        pp += static_cast<double>(p[j]) * static_cast<double>(p[j]);
        yy += static_cast<double>(y[j]) * static_cast<double>(y[j]);
    }
    RowTerms r;
    r.pn = std::sqrt(pp);
    r.tn = std::sqrt(yy);
    if (r.pn < 1e-12) throw Error(Errc::ZeroPrediction, "prediction norm below 1e-12");
    if (r.tn < 1e-12) throw Error(Errc::ZeroVector, "truth vector has zero norm");
    r.cos = dot / (r.pn * r.tn);
    return r;
}

template <typename T>
std::size_t rows_of(std::span<const T> pred, std::span<const T> truth) {
    if (pred.size() != truth.size() || pred.size() % 3 != 0 || pred.empty()) {
        throw Error(Errc::ShapeMismatch, "prediction and truth must both be non-empty n x 3");
    }
    return pred.size() / 3;
}

}  // namespace

template <typename T>
double mad_loss(std::span<const T> pred, std::span<const T> truth, std::span<T> d_pred) {
    const std::size_t n = rows_of(pred, truth);
    if (!d_pred.empty() && d_pred.size() != pred.size()) throw Error(Errc::ShapeMismatch, "gradient buffer size");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const T* p = pred.data() + 3 * i;
        const T* y = truth.data() + 3 * i;
        const RowTerms r = row_terms(p, y);
        sum += std::acos(std::clamp(r.cos, -1.0, 1.0));
        if (d_pred.empty()) continue;
        const double c = std::clamp(r.cos, -kCosClamp, kCosClamp);
        const double dl_dc = -1.0 / std::sqrt(1.0 - c * c) / static_cast<double>(n);
        for (int j = 0; j < 3; ++j) {
            const double dc = static_cast<double>(y[j]) / (r.pn * r.tn) - r.cos * static_cast<double>(p[j]) / (r.pn * r.pn);
            d_pred[3 * i + static_cast<std::size_t>(j)] = static_cast<T>(dl_dc * dc);
        }
    }
    return sum / static_cast<double>(n);
}

template <typename T>
void angular_distances(std::span<const T> pred, std::span<const T> truth, std::span<double> out) {
    const std::size_t n = rows_of(pred, truth);
    if (out.size() != n) throw Error(Errc::ShapeMismatch, "output size");
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::acos(std::clamp(row_terms(pred.data() + 3 * i, truth.data() + 3 * i).cos, -1.0, 1.0));
    }
}

template double mad_loss<float>(std::span<const float>, std::span<const float>, std::span<float>);
template double mad_loss<double>(std::span<const double>, std::span<const double>, std::span<double>);
template void angular_distances<float>(std::span<const float>, std::span<const float>, std::span<double>);
template void angular_distances<double>(std::span<const double>, std::span<const double>, std::span<double>);

}  // namespace refpoint::fusion
