#include "swm/synthdata.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "swm/pipeline.hpp"

namespace swm {

namespace {

constexpr double kShellRadius = 70.0;     // mm
constexpr double kMidlineClearance = 0.35;  // prototype centres satisfy x <= -0.35 R
constexpr double kDwmReach = 20.0;        // DWM arcs pass this close to the origin
constexpr std::size_t kPrototypePoints = 64;
constexpr std::size_t kReferencePoints = 32;
constexpr int kMaxAttempts = 10000;

// Acceptance bands on MDF to the own prototype, in units of spec.sigma.
constexpr double kPlausibleBand = 3.0;
constexpr double kOutlierBand = 5.0;
constexpr double kPrototypeSeparation = 10.0;

using Rng = std::mt19937_64;

Point3 add(const Point3& a, const Point3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Point3 scale(const Point3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const Point3& a, const Point3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Point3& a) { return std::sqrt(dot(a, a)); }
Point3 cross(const Point3& a, const Point3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Point3 unit(const Point3& a) { return scale(a, 1.0 / norm(a)); }

Point3 random_direction(Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (;;) {
        const Point3 v{gauss(rng), gauss(rng), gauss(rng)};
        if (norm(v) > 1e-6) return unit(v);
    }
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::vector<Point3> bezier(const Point3& p0, const Point3& p1, const Point3& p2, const Point3& p3, std::size_t count) {
    std::vector<Point3> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        const double u = 1.0 - t;
        const double w0 = u * u * u;
        const double w1 = 3.0 * u * u * t;
        const double w2 = 3.0 * u * t * t;
        const double w3 = t * t * t;
        for (int d = 0; d < 3; ++d) out[i][d] = w0 * p0[d] + w1 * p1[d] + w2 * p2[d] + w3 * p3[d];
    }
    return out;
}

// U-shaped arc with both ends on the shell, dipping `depth` mm inward.
Streamline u_arc(const Point3& centre, const Point3& tangent, double chord, double depth) {
    const double half = std::asin(std::min(1.0, chord / (2.0 * kShellRadius)));
    const Point3 a = scale(add(scale(centre, std::cos(half)), scale(tangent, std::sin(half))), kShellRadius);
    const Point3 b = scale(add(scale(centre, std::cos(half)), scale(tangent, -std::sin(half))), kShellRadius);
    const double pull = 4.0 * depth / 3.0;  // cubic Bezier midpoint reaches 3/4 of the control offset
    return Streamline(bezier(a, scale(unit(a), kShellRadius - pull), scale(unit(b), kShellRadius - pull), b,
                             kPrototypePoints));
}

// Coordinates are kept representable in 32 bits so tractogram files round-trip exactly.
// The loop runs over a flat span: GCC 11 at -O3 miscompiles the remainder of
// the vectorized nested loop over Point3 and leaves some coordinates unrounded.
std::vector<Point3> to_float_grid(std::vector<Point3> points) {
    static_assert(sizeof(Point3) == 3 * sizeof(double));
    for (double& v : std::span(points.data()->data(), 3 * points.size())) v = static_cast<double>(static_cast<float>(v));
    return points;
}

ResampledStreamline mirrored(const ResampledStreamline& s) { return reflect_bilateral(s); }

// Smooth displacement field: four low-order terms with per-axis coefficients
// scaled so the pointwise per-axis standard deviation is about `sigma`.
std::vector<Point3> perturbed(const ResampledStreamline& base, double sigma, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, sigma);
    std::array<Point3, 4> coeff{};
    for (auto& c : coeff) c = {gauss(rng), gauss(rng), gauss(rng)};
    const std::size_t m = base.size();
    std::vector<Point3> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(m - 1);
        const std::array<double, 4> phi{0.5, std::numbers::sqrt2 * 0.5 * std::cos(std::numbers::pi * t),
                                        std::numbers::sqrt2 * 0.5 * std::cos(2.0 * std::numbers::pi * t),
                                        std::numbers::sqrt2 * 0.5 * std::sin(std::numbers::pi * t)};
        Point3 p = base[i];
        for (std::size_t j = 0; j < coeff.size(); ++j) p = add(p, scale(coeff[j], phi[j]));
        out[i] = p;
    }
    return out;
}

class Sampler {
public:
    Sampler(const SyntheticAtlasSpec& spec, std::span<const Streamline> prototypes, Rng& rng)
        : spec_(spec), prototypes_(prototypes), rng_(rng) {
        for (const auto& p : prototypes) references_.push_back(resample(p, kReferencePoints));
        const std::size_t k = references_.size();
        for (std::size_t c = 0; c < k; ++c) references_.push_back(mirrored(references_[c]));
    }

    Streamline plausible(std::size_t c) { return draw(c, spec_.sigma, 0.0, kPlausibleBand * spec_.sigma); }

    Streamline outlier(std::size_t c) {
        return draw(c, spec_.outlier_sigma, kOutlierBand * spec_.sigma, std::numeric_limits<double>::infinity());
    }

    Streamline dwm() {
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            const Point3 u = random_direction(rng_);
            const Point3 v = random_direction(rng_);
            if (dot(u, v) > std::cos(100.0 * std::numbers::pi / 180.0)) continue;
            const Point3 a = scale(u, uniform(rng_, 0.85, 1.0) * kShellRadius);
            const Point3 b = scale(v, uniform(rng_, 0.85, 1.0) * kShellRadius);
            const Point3 jitter = scale(random_direction(rng_), uniform(rng_, 0.0, 8.0));
            auto points = bezier(a, add(scale(a, 0.2), jitter), add(scale(b, 0.2), jitter), b, raw_count());
            points = to_float_grid(perturbed(ResampledStreamline(std::move(points)), 2.0 * spec_.sigma, rng_));
            double reach = std::numeric_limits<double>::infinity();
            for (const auto& p : points) reach = std::min(reach, norm(p));
            if (reach > kDwmReach) continue;
            return finish(std::move(points), false);
        }
        throw std::runtime_error("generate_atlas: could not place a deep white matter streamline");
    }

private:
    std::size_t raw_count() { return std::uniform_int_distribution<std::size_t>(30, 60)(rng_); }

    Streamline draw(std::size_t c, double sigma, double min_mdf, double max_mdf) {
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            auto points = to_float_grid(perturbed(resample(prototypes_[c], raw_count()), sigma, rng_));
            const Streamline candidate(points);
            if (streamline_length(candidate) < spec_.min_length) continue;
            const ResampledStreamline r = resample(candidate, kReferencePoints);
            const double own = mdf_distance(r, references_[c]);
            if (own < min_mdf || own > max_mdf) continue;
            bool nearest = true;
            for (std::size_t j = 0; j < references_.size() && nearest; ++j) {
                if (j != c && mdf_distance(r, references_[j]) <= own) nearest = false;
            }
            if (!nearest) continue;
            return finish(std::move(points), spec_.bilateral);
        }
        throw std::runtime_error("generate_atlas: could not place a streamline for cluster " + std::to_string(c) +
                                 "; noise levels are incompatible with the acceptance bands");
    }

    Streamline finish(std::vector<Point3> points, bool may_mirror) {
        if (may_mirror && std::bernoulli_distribution(0.5)(rng_)) {
            for (auto& p : points) p[0] = -p[0];
        }
        if (std::bernoulli_distribution(0.5)(rng_)) std::reverse(points.begin(), points.end());
        return Streamline(std::move(points));
    }

    const SyntheticAtlasSpec& spec_;
    std::span<const Streamline> prototypes_;
    Rng& rng_;
    std::vector<ResampledStreamline> references_;  // K prototypes, then their mirrors
};

std::vector<Streamline> make_prototypes(const SyntheticAtlasSpec& spec, Rng& rng) {
    std::vector<Streamline> prototypes;
    std::vector<ResampledStreamline> placed;  // prototypes and their mirrors
    const double separation = kPrototypeSeparation * spec.sigma;
    for (int attempt = 0; prototypes.size() < spec.clusters; ++attempt) {
        if (attempt >= kMaxAttempts) {
            throw std::runtime_error("generate_atlas: cannot place " + std::to_string(spec.clusters) +
                                     " prototypes at the required separation");
        }
        Point3 centre = random_direction(rng);
        if (centre[0] > 0.0) centre[0] = -centre[0];
        if (centre[0] > -kMidlineClearance) continue;
        const Point3 tangent = unit(cross(centre, random_direction(rng)));
        const Streamline proto = u_arc(centre, tangent, uniform(rng, 24.0, 34.0), uniform(rng, 10.0, 16.0));
        if (streamline_length(proto) < spec.min_length + 2.0 * spec.sigma) continue;
        const ResampledStreamline r = resample(proto, kReferencePoints);
        bool far = mdf_distance(r, mirrored(r)) >= separation;
        for (const auto& q : placed) far = far && mdf_distance(r, q) >= separation;
        if (!far) continue;
        placed.push_back(r);
        placed.push_back(mirrored(r));
        prototypes.push_back(proto);
    }
    return prototypes;
}

}  // namespace

std::size_t SyntheticAtlasSpec::outliers_per_cluster() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(per_cluster) * outlier_fraction));
}

void SyntheticAtlasSpec::validate() const {
    if (clusters < 1) throw std::invalid_argument("synthdata: at least one cluster is required");
    if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) {
        throw std::invalid_argument("synthdata: outlier fraction must lie in [0, 1)");
    }
    if (per_cluster == 0 || plausible_per_cluster() == 0) {
        throw std::invalid_argument("synthdata: spec leaves a cluster without plausible streamlines");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("synthdata: sigma must be positive");
    if (!(outlier_sigma > sigma) || !std::isfinite(outlier_sigma)) {
        throw std::invalid_argument("synthdata: outlier sigma must exceed sigma");
    }
    if (!(min_length > 0.0) || !std::isfinite(min_length)) {
        throw std::invalid_argument("synthdata: minimum length must be positive");
    }
}

SyntheticAtlas generate_atlas(const SyntheticAtlasSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SyntheticAtlas atlas;
    atlas.prototypes = make_prototypes(spec, rng);
    for (const auto& p : atlas.prototypes) atlas.checksums.push_back(checksum(p));

    const std::uint32_t k = spec.clusters;
    Sampler sampler(spec, atlas.prototypes, rng);
    atlas.d2.num_classes = 2 * k;
    for (std::uint32_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < spec.plausible_per_cluster(); ++i) {
            atlas.d2.streamlines.push_back(sampler.plausible(c));
            atlas.d2.labels.push_back(c);
        }
        for (std::size_t i = 0; i < spec.outliers_per_cluster(); ++i) {
            atlas.d2.streamlines.push_back(sampler.outlier(c));
            atlas.d2.labels.push_back(k + c);
        }
    }

    atlas.d1.num_classes = 2;
    atlas.d1.streamlines = atlas.d2.streamlines;
    atlas.d1.labels.assign(atlas.d2.size(), kSwmLabel);
    for (std::size_t i = 0; i < spec.dwm; ++i) {
        atlas.d1.streamlines.push_back(sampler.dwm());
        atlas.d1.labels.push_back(kDwmLabel);
    }
    return atlas;
}

SyntheticSubject generate_subject(std::span<const Streamline> prototypes, const SyntheticAtlasSpec& spec) {
    spec.validate();
    if (prototypes.size() != spec.clusters) {
        throw std::invalid_argument("generate_subject: prototype count differs from the spec's cluster count");
    }
    Rng rng(spec.seed);
    Sampler sampler(spec, prototypes, rng);
    SyntheticSubject subject;
    for (std::uint32_t c = 0; c < spec.clusters; ++c) {
        for (std::size_t i = 0; i < spec.plausible_per_cluster(); ++i) {
            subject.streamlines.push_back(sampler.plausible(c));
            subject.truth.push_back(static_cast<std::int32_t>(c));
        }
        for (std::size_t i = 0; i < spec.outliers_per_cluster(); ++i) {
            subject.streamlines.push_back(sampler.outlier(c));
            subject.truth.push_back(kNonSwm);
        }
    }
    for (std::size_t i = 0; i < spec.dwm; ++i) {
        subject.streamlines.push_back(sampler.dwm());
        subject.truth.push_back(kNonSwm);
    }
    std::vector<std::size_t> order(subject.streamlines.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    SyntheticSubject shuffled;
    shuffled.streamlines.reserve(order.size());
    shuffled.truth.reserve(order.size());
    for (std::size_t i : order) {
        shuffled.streamlines.push_back(std::move(subject.streamlines[i]));
        shuffled.truth.push_back(subject.truth[i]);
    }
    return shuffled;
}

std::vector<std::uint32_t> kfold_split(std::size_t size, std::uint32_t folds, std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("kfold_split: at least 2 folds are required");
    if (folds > size) throw std::invalid_argument("kfold_split: more folds than items");
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::uint32_t> fold(size);
    for (std::size_t i = 0; i < size; ++i) fold[order[i]] = static_cast<std::uint32_t>(i % folds);
    return fold;
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t hash) {
    for (std::byte b : bytes) {
        hash ^= std::to_integer<std::uint64_t>(b);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t checksum(const Streamline& s) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const auto& p : s.points()) {
        for (double v : p) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            std::array<std::byte, 8> le{};
            for (int i = 0; i < 8; ++i) le[i] = static_cast<std::byte>((bits >> (8 * i)) & 0xFF);
            hash = fnv1a(le, hash);
        }
    }
    return hash;
}

}  // namespace swm
