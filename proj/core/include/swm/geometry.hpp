#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace swm {

/// One point in RAS millimetres: (right, anterior, superior).
using Point3 = std::array<double, 3>;

/// An ordered polyline of at least two finite points.
class Streamline {
public:
    Streamline() = default;
    /// Throws std::invalid_argument when fewer than two points are given or
    /// any coordinate is not finite.
    explicit Streamline(std::vector<Point3> points);

    std::size_t size() const noexcept { return points_.size(); }
    const Point3& operator[](std::size_t i) const noexcept { return points_[i]; }
    std::span<const Point3> points() const noexcept { return points_; }

    friend bool operator==(const Streamline&, const Streamline&) = default;

private:
    std::vector<Point3> points_;
};

/// A streamline sampled at a fixed number of points, equally spaced in arc
/// length along the source polyline. This is the network input.
class ResampledStreamline {
public:
    ResampledStreamline() = default;
    explicit ResampledStreamline(std::vector<Point3> points) : points_(std::move(points)) {}

    std::size_t size() const noexcept { return points_.size(); }
    const Point3& operator[](std::size_t i) const noexcept { return points_[i]; }
    Point3& operator[](std::size_t i) noexcept { return points_[i]; }
    std::span<const Point3> points() const noexcept { return points_; }

    friend bool operator==(const ResampledStreamline&, const ResampledStreamline&) = default;

private:
    std::vector<Point3> points_;
};

/// Sum of consecutive point-to-point distances.
double streamline_length(const Streamline& s);

/// Places n points at equal arc-length spacing along s by linear
/// interpolation of the cumulative chord length. Endpoints are kept exactly.
/// A zero-length streamline yields n copies of its (single) location.
ResampledStreamline resample(const Streamline& s, std::size_t n);

Streamline reversed(const Streamline& s);
ResampledStreamline reversed(const ResampledStreamline& s);

/// Mirror across the midsagittal plane r = 0.
ResampledStreamline reflect_bilateral(const ResampledStreamline& s);

/// Minimum average direct-flip distance: the smaller of the mean pointwise
/// distance in the given order and in reversed order. Throws
/// std::invalid_argument when the point counts differ.
double mdf_distance(const ResampledStreamline& a, const ResampledStreamline& b);

double distance(const Point3& a, const Point3& b) noexcept;

}  // namespace swm
