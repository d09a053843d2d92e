#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace swm::test {

std::vector<Point3> random_polyline(std::mt19937_64& rng, std::size_t points, double step) {
    std::normal_distribution<double> gauss(0.0, step);
    std::vector<Point3> out(points);
    Point3 p{gauss(rng) * 10.0, gauss(rng) * 10.0, gauss(rng) * 10.0};
    for (auto& q : out) {
        q = p;
        for (double& v : p) v += gauss(rng);
    }
    return out;
}

Streamline random_streamline(std::mt19937_64& rng, std::size_t points) {
    return Streamline(random_polyline(rng, points));
}

ResampledStreamline random_resampled(std::mt19937_64& rng, std::size_t points, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<Point3> out(points);
    for (auto& p : out) p = {u(rng), u(rng), u(rng)};
    return ResampledStreamline(std::move(out));
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
    std::normal_distribution<double> gauss(0.0, scale);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = gauss(rng);
    return m;
}

Matrix random_unit_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    Matrix m = random_matrix(rng, rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (double v : m.row(r)) sq += v * v;
        const double inv = 1.0 / std::sqrt(sq);
        for (double& v : m.row(r)) v *= inv;
    }
    return m;
}

void randomize(Model& model, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::uniform_real_distribution<double> pos(0.5, 1.5);
    auto fill = [&](const std::string& name, const auto&, std::span<double> values, bool) {
        const bool positive = name.ends_with("running_var") || name.ends_with("gamma");
        for (double& v : values) v = positive ? pos(rng) : u(rng);
    };
    for_each_block(model.encoder, "encoder", fill);
    for_each_block(model.classifier, "classifier", fill);
    if (model.projector) for_each_block(*model.projector, "projector", fill);
}

std::vector<Point3> dense_resample(const Streamline& s, std::size_t n, std::size_t dense) {
    // Dense uniform-in-parameter samples along each segment, with the exact
    // arc length of each sample.
    std::vector<Point3> samples;
    std::vector<double> arc;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) total += distance(s[i], s[i + 1]);
    double before = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double seg = distance(s[i], s[i + 1]);
        const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(seg / total * dense)));
        for (std::size_t j = 0; j < steps; ++j) {
            const double t = static_cast<double>(j) / static_cast<double>(steps);
            samples.push_back({s[i][0] + t * (s[i + 1][0] - s[i][0]), s[i][1] + t * (s[i + 1][1] - s[i][1]),
                               s[i][2] + t * (s[i + 1][2] - s[i][2])});
            arc.push_back(before + t * seg);
        }
        before += seg;
    }
    samples.push_back(s[s.size() - 1]);
    arc.push_back(total);

    std::vector<Point3> out;
    for (std::size_t j = 0; j < n; ++j) {
        const double target = total * static_cast<double>(j) / static_cast<double>(n - 1);
        std::size_t best = 0;
        for (std::size_t i = 1; i < arc.size(); ++i) {
            if (std::abs(arc[i] - target) < std::abs(arc[best] - target)) best = i;
        }
        out.push_back(samples[best]);
    }
    return out;
}

double segment_sum_length(const std::vector<Point3>& points) {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const double dx = points[i][0] - points[i - 1][0];
        const double dy = points[i][1] - points[i - 1][1];
        const double dz = points[i][2] - points[i - 1][2];
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return total;
}

double brute_mdf(const ResampledStreamline& a, const ResampledStreamline& b) {
    const std::size_t n = a.size();
    double direct = 0.0;
    double flipped = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        direct += std::hypot(a[i][0] - b[i][0], a[i][1] - b[i][1], a[i][2] - b[i][2]);
        const auto& f = b[n - 1 - i];
        flipped += std::hypot(a[i][0] - f[0], a[i][1] - f[1], a[i][2] - f[2]);
    }
    return std::min(direct, flipped) / static_cast<double>(n);
}

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    }
    return c;
}

Matrix naive_affine(const Matrix& x, const Linear& l) {
    Matrix y(x.rows(), l.out);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t o = 0; o < l.out; ++o) {
            double s = l.bias[o];
            for (std::size_t i = 0; i < l.in; ++i) s += x(r, i) * l.weight[o * l.in + i];
            y(r, o) = s;
        }
    }
    return y;
}

Matrix naive_project(const ProjectorParams& p, const Matrix& g) {
    Matrix h = g;
    for (const auto& l : p.layers) h = naive_affine(h, l);
    for (std::size_t r = 0; r < h.rows(); ++r) {
        double sq = 0.0;
        for (double v : h.row(r)) sq += v * v;
        for (double& v : h.row(r)) v /= std::sqrt(sq);
    }
    return h;
}

double logsumexp_cross_entropy(const Matrix& logits, const std::vector<std::uint32_t>& labels) {
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = logits.row(r);
        const double m = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - m);
        total += (m + std::log(s)) - row[labels[r]];
    }
    return total / static_cast<double>(logits.rows());
}

double nested_loop_supcon(const Matrix& z, const std::vector<std::uint32_t>& labels, double tau) {
    const std::size_t b = z.rows();
    auto dot = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t c = 0; c < z.cols(); ++c) s += z(i, c) * z(j, c);
        return s;
    };
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double denom = 0.0;
        for (std::size_t a = 0; a < b; ++a) {
            if (a != i) denom += std::exp(dot(i, a) / tau);
        }
        std::size_t positives = 0;
        double sum = 0.0;
        for (std::size_t p = 0; p < b; ++p) {
            if (p == i || labels[p] != labels[i]) continue;
            ++positives;
            sum += std::log(std::exp(dot(i, p) / tau) / denom);
        }
        if (positives > 0) loss += -sum / static_cast<double>(positives);
    }
    return loss;
}

void AdamOracle::step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
    if (m.empty()) {
        m.assign(params.size(), 0.0);
        v.assign(params.size(), 0.0);
    }
    ++t;
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = m[i] / (1.0 - std::pow(beta1, t));
        const double vhat = v[i] / (1.0 - std::pow(beta2, t));
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

std::vector<double> confusion_f1(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& truth,
                                 std::size_t k) {
    std::vector<std::vector<double>> confusion(k, std::vector<double>(k, 0.0));  // [truth][pred]
    for (std::size_t i = 0; i < pred.size(); ++i) confusion[truth[i]][pred[i]] += 1.0;
    std::vector<double> f1(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        double tp = confusion[c][c];
        double predicted = 0.0;
        double actual = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            predicted += confusion[j][c];
            actual += confusion[c][j];
        }
        const double precision = predicted > 0 ? tp / predicted : 0.0;
        const double recall = actual > 0 ? tp / actual : 0.0;
        f1[c] = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    return f1;
}

double brute_cda(const std::vector<ResampledStreamline>& subject, const std::vector<ResampledStreamline>& atlas) {
    double total = 0.0;
    for (const auto& s : subject) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& a : atlas) best = std::min(best, brute_mdf(s, a));
        total += best;
    }
    return total / static_cast<double>(subject.size());
}

std::optional<double> direct_ispv(const std::vector<double>& counts) {
    double mean = 0.0;
    for (double c : counts) mean += c;
    mean /= static_cast<double>(counts.size());
    if (mean == 0.0) return std::nullopt;
    double var = 0.0;
    for (double c : counts) var += (c - mean) * (c - mean);
    return std::sqrt(var / static_cast<double>(counts.size())) / mean;
}

std::vector<std::size_t> rasterize(const std::vector<ResampledStreamline>& streamlines, const GridSpec& grid) {
    std::set<std::size_t> occupied;
    for (const auto& s : streamlines) {
        for (const auto& p : s.points()) {
            std::array<long, 3> v{};
            bool inside = true;
            for (int d = 0; d < 3; ++d) {
                v[d] = static_cast<long>(std::floor((p[d] - grid.origin[d]) / grid.voxel_size));
                inside = inside && v[d] >= 0 && v[d] < static_cast<long>(grid.dims[d]);
            }
            if (inside) {
                occupied.insert(static_cast<std::size_t>(v[0]) +
                                grid.dims[0] * (static_cast<std::size_t>(v[1]) + grid.dims[1] * static_cast<std::size_t>(v[2])));
            }
        }
    }
    return {occupied.begin(), occupied.end()};
}

double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

double central_difference(std::span<double> values, std::size_t i, double h, const std::function<double()>& f) {
    const double saved = values[i];
    values[i] = saved + h;
    const double plus = f();
    values[i] = saved - h;
    const double minus = f();
    values[i] = saved;
    return (plus - minus) / (2.0 * h);
}

}  // namespace swm::test
