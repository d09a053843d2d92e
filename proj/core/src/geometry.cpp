#include "swm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace swm {

Streamline::Streamline(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.size() < 2) {
        throw std::invalid_argument("streamline needs at least 2 points, got " +
                                    std::to_string(points_.size()));
    }
    for (const auto& p : points_) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
            throw std::invalid_argument("streamline has a non-finite coordinate");
        }
    }
}

double distance(const Point3& a, const Point3& b) noexcept {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double streamline_length(const Streamline& s) {
    double total = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) total += distance(s[i - 1], s[i]);
    return total;
}

namespace {

Point3 lerp(const Point3& a, const Point3& b, double t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

}  // namespace

ResampledStreamline resample(const Streamline& s, std::size_t n) {
    if (n < 2) throw std::invalid_argument("resample: n must be at least 2");
    const auto pts = s.points();
    const std::size_t m = pts.size();

    std::vector<double> cumulative(m, 0.0);
    for (std::size_t i = 1; i < m; ++i) cumulative[i] = cumulative[i - 1] + distance(pts[i - 1], pts[i]);
    const double total = cumulative.back();

    std::vector<Point3> out(n);
    if (total <= 0.0) {
        std::fill(out.begin(), out.end(), pts.front());
        return ResampledStreamline(std::move(out));
    }

    out.front() = pts.front();
    out.back() = pts.back();
    std::size_t seg = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double target = total * static_cast<double>(i) / static_cast<double>(n - 1);
        while (seg + 2 < m && cumulative[seg + 1] < target) ++seg;
        const double seg_len = cumulative[seg + 1] - cumulative[seg];
        double t = seg_len > 0.0 ? (target - cumulative[seg]) / seg_len : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        out[i] = lerp(pts[seg], pts[seg + 1], t);
    }
    return ResampledStreamline(std::move(out));
}

Streamline reversed(const Streamline& s) {
    std::vector<Point3> pts(s.points().rbegin(), s.points().rend());
    return Streamline(std::move(pts));
}

ResampledStreamline reversed(const ResampledStreamline& s) {
    return ResampledStreamline(std::vector<Point3>(s.points().rbegin(), s.points().rend()));
}

ResampledStreamline reflect_bilateral(const ResampledStreamline& s) {
    std::vector<Point3> pts(s.points().begin(), s.points().end());
    for (auto& p : pts) p[0] = -p[0];
    return ResampledStreamline(std::move(pts));
}

double mdf_distance(const ResampledStreamline& a, const ResampledStreamline& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("mdf_distance: point counts differ (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
    const std::size_t n = a.size();
    if (n == 0) return 0.0;
    // Both orders sum the same mirrored pairs (i, n-1-i), so swapping a and b
    // or reversing either one permutes the terms only within a pair, and the
    // result is bit-identical.
    double direct = 0.0;
    double flipped = 0.0;
    for (std::size_t i = 0, j = n - 1; i < j; ++i, --j) {
        direct += distance(a[i], b[i]) + distance(a[j], b[j]);
        flipped += distance(a[i], b[j]) + distance(a[j], b[i]);
    }
    if (n % 2 == 1) {
        direct += distance(a[n / 2], b[n / 2]);
        flipped += distance(a[n / 2], b[n / 2]);
    }
    return std::min(direct, flipped) / static_cast<double>(n);
}

}  // namespace swm
